use ini::Ini;

use super::{AppError, AppResult};
use crate::model::{Param, ParameterSet};

pub const PRESET_NAMES: [&str; 3] = ["mexico", "italy", "south_africa"];

/// Text of a bundled preset file.
pub fn builtin_preset_text(name: &str) -> Option<&'static str> {
    match name {
        "mexico" => Some(include_str!("../../data/presets/mexico.txt")),
        "italy" => Some(include_str!("../../data/presets/italy.txt")),
        "south_africa" => Some(include_str!("../../data/presets/south_africa.txt")),
        _ => None,
    }
}

/// Parses a flat `key = value` parameter file. Exactly the ten stored keys
/// must appear, once each.
pub fn parse_preset(text: &str) -> AppResult<ParameterSet> {
    let ini = Ini::load_from_str(text).map_err(|e| AppError::Config(format!("preset: {e}")))?;
    if ini.sections().any(|s| s.is_some()) {
        return Err(AppError::Config("preset files have no sections".into()));
    }
    parameters_from_props(ini.general_section(), "preset")
}

pub(super) fn parameters_from_props(props: &ini::Properties, what: &str) -> AppResult<ParameterSet> {
    let mut p = ParameterSet {
        recruitment: 0.0,
        contact_exposed: 0.0,
        contact_infected: 0.0,
        vaccination_rate: 0.0,
        progression: 0.0,
        recovery: 0.0,
        treatment: 0.0,
        natural_death: 0.0,
        disease_death: 0.0,
        vaccine_efficacy: 0.0,
    };
    let mut seen = Vec::new();
    for (key, value) in props.iter() {
        let param: Param = key.parse().map_err(|_| AppError::Config(format!("{what}: unknown key `{key}`")))?;
        if !Param::STORED.contains(&param) {
            return Err(AppError::Config(format!("{what}: `{key}` is derived from epsilon and cannot be set")));
        }
        if seen.contains(&param) {
            return Err(AppError::Config(format!("{what}: duplicate key `{key}`")));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| AppError::Config(format!("{what}: `{key}` has non-numeric value `{value}`")))?;
        p.set(param, v);
        seen.push(param);
    }
    let missing: Vec<&str> = Param::STORED.iter().filter(|q| !seen.contains(q)).map(|q| q.key()).collect();
    if !missing.is_empty() {
        return Err(AppError::Config(format!("{what}: missing keys {}", missing.join(", "))));
    }
    p.validate()?;
    Ok(p)
}

pub fn load_preset(name: &str) -> AppResult<ParameterSet> {
    let text = builtin_preset_text(name).ok_or_else(|| AppError::UnknownPreset(name.to_string()))?;
    parse_preset(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PRESETS;

    #[test]
    fn bundled_files_match_constants() {
        for preset in PRESETS {
            assert_eq!(load_preset(preset.name).unwrap(), preset.params);
        }
    }

    #[test]
    fn rejects_bad_files() {
        let good = builtin_preset_text("mexico").unwrap();
        assert!(parse_preset(&good.replace("beta1", "Beta1")).is_err());
        assert!(parse_preset(&good.replace("epsilon = 0.45", "lambda = 0.55")).is_err());
        assert!(parse_preset(&good.replace("delta = 0.3\n", "")).is_err());
        assert!(parse_preset(&format!("{good}alpha = 0.7\n")).is_err());
        assert!(parse_preset(&good.replace("mu = 0.05", "mu = 0")).is_err());
        assert!(matches!(load_preset("atlantis"), Err(AppError::UnknownPreset(_))));
    }
}
