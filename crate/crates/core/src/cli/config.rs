use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, Properties};
use serde::Serialize;

use super::presets::{load_preset, parameters_from_props};
use super::{AppError, AppResult};
use crate::calibration::{FitTarget, FreeParameter};
use crate::control::{ControlWeights, SweepSettings, SCENARIO_LEVELS};
use crate::model::{Param, ParameterSet, StateVector};
use crate::ode::DEFAULT_STEP;
use crate::sensitivity::{default_ranges, ParameterRange};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSource {
    Preset(String),
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeSection {
    pub t0: f64,
    /// End time; each command has its own default when absent.
    pub tf: Option<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSection {
    pub weights: ControlWeights,
    pub sweep: SweepSettings,
    /// Constant effort levels evaluated next to the optimized schedule.
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSection {
    pub data: Option<PathBuf>,
    pub free: Vec<FreeParameter>,
    /// Starting values that differ from the model parameters.
    pub start: Vec<(Param, f64)>,
    pub target: FitTarget,
    pub weeks: Option<(i64, i64)>,
    pub degree: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivitySection {
    pub samples: usize,
    pub ranges: Vec<ParameterRange>,
    /// `r0`, `r0_vaccination`, `peak_incidence` or `cumulative_incidence`.
    pub output: String,
    /// Horizon of the incidence outputs.
    pub weeks: usize,
    pub intervals: Vec<(f64, f64)>,
    pub bins: usize,
    pub grid_x: ParameterRange,
    pub grid_y: ParameterRange,
    pub grid_resolution: usize,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RtSection {
    pub data: Option<PathBuf>,
    pub envelope: Vec<(Param, f64, f64)>,
    pub envelope_levels: usize,
}

/// Everything a subcommand needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub source: ParamSource,
    pub params: ParameterSet,
    pub initial: Option<StateVector>,
    pub time: TimeSection,
    pub control: ControlSection,
    pub fit: FitSection,
    pub sensitivity: SensitivitySection,
    pub rt: RtSection,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    /// Replaces the parameters by a bundled preset.
    pub fn use_preset(&mut self, name: &str) -> AppResult<()> {
        self.params = load_preset(name)?;
        self.source = ParamSource::Preset(name.to_string());
        Ok(())
    }
}

const SECTIONS: [&str; 8] = ["run", "model", "initial", "time", "control", "fit", "sensitivity", "rt"];

fn cfg_err(section: &str, msg: impl std::fmt::Display) -> AppError {
    AppError::Config(format!("[{section}] {msg}"))
}

fn number<T: FromStr>(section: &str, key: &str, v: &str) -> AppResult<T> {
    v.trim().parse().map_err(|_| cfg_err(section, format!("`{key}` has invalid value `{v}`")))
}

fn interval(section: &str, key: &str, v: &str) -> AppResult<(f64, f64)> {
    let (a, b) = v.split_once(':').ok_or_else(|| cfg_err(section, format!("`{key}` must look like low:high")))?;
    Ok((number(section, key, a)?, number(section, key, b)?))
}

fn list<T: FromStr>(section: &str, key: &str, v: &str) -> AppResult<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| number(section, key, s)).collect()
}

fn param(section: &str, key: &str) -> AppResult<Param> {
    key.trim().parse().map_err(|_| cfg_err(section, format!("unknown parameter `{key}`")))
}

/// Parses `a:b` into an inclusive week window.
pub fn parse_week_window(s: &str) -> AppResult<(i64, i64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| AppError::Config(format!("week window `{s}` must look like a:b")))?;
    let a = a.trim().parse().map_err(|_| AppError::Config(format!("bad week `{a}`")))?;
    let b = b.trim().parse().map_err(|_| AppError::Config(format!("bad week `{b}`")))?;
    if a > b {
        return Err(AppError::Config(format!("week window {a}:{b} is reversed")));
    }
    Ok((a, b))
}

fn parse_range(section: &str, key: &str, v: &str) -> AppResult<ParameterRange> {
    let mut parts = v.split(':');
    let (Some(name), Some(lo), Some(hi), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(cfg_err(section, format!("`{key}` must look like name:low:high")));
    };
    Ok(ParameterRange::new(param(section, name)?, number(section, key, lo)?, number(section, key, hi)?)?)
}

fn resolve(base: &Path, v: &str) -> PathBuf {
    let p = PathBuf::from(v.trim());
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn require_file(section: &str, p: &Path) -> AppResult<()> {
    if !p.is_file() {
        return Err(cfg_err(section, format!("data file {} does not exist", p.display())));
    }
    Ok(())
}

fn default_bounds(p: Param, v: f64) -> (f64, f64) {
    match p {
        Param::VaccineEfficacy | Param::VaccineInefficiency => (0.0, 1.0),
        _ if v > 0.0 => (v / 10.0, v * 10.0),
        _ => (0.0, 1.0),
    }
}

/// Parses configuration text. Relative paths are resolved against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> AppResult<RunConfig> {
    let ini = Ini::load_from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
    let empty = Properties::new();
    for s in ini.sections() {
        match s {
            Some(name) if SECTIONS.contains(&name) => {}
            Some(name) => return Err(AppError::Config(format!("unknown section [{name}]"))),
            None => {
                if !ini.general_section().is_empty() {
                    return Err(AppError::Config("keys outside a section".into()));
                }
            }
        }
    }
    let sec = |name: &str| ini.section(Some(name)).unwrap_or(&empty);

    // [run]
    let mut out_dir = None;
    let mut seed = 1;
    for (k, v) in sec("run").iter() {
        match k {
            "out" => out_dir = Some(resolve(base_dir, v)),
            "seed" => seed = number("run", k, v)?,
            _ => return Err(cfg_err("run", format!("unknown key `{k}`"))),
        }
    }

    // [model]
    let model = sec("model");
    let (source, params) = match model.get("preset") {
        Some(name) => {
            if model.len() != 1 {
                return Err(cfg_err("model", "give either `preset` or the ten parameter keys, not both"));
            }
            let name = name.trim();
            (ParamSource::Preset(name.to_string()), load_preset(name)?)
        }
        None if model.is_empty() => return Err(cfg_err("model", "missing: set `preset` or all ten parameter keys")),
        None => (ParamSource::Explicit, parameters_from_props(model, "[model]")?),
    };

    // [initial]
    let init = sec("initial");
    let initial = if init.is_empty() {
        None
    } else {
        let mut x = [0.0; 6];
        for (k, v) in init.iter() {
            let j = ["S", "V", "E", "I", "R", "T"]
                .iter()
                .position(|c| *c == k)
                .ok_or_else(|| cfg_err("initial", format!("unknown compartment `{k}`")))?;
            x[j] = number("initial", k, v)?;
        }
        let x = StateVector::from(x);
        x.validate()?;
        Some(x)
    };

    // [time]
    let mut time = TimeSection { t0: 0.0, tf: None, h: DEFAULT_STEP };
    for (k, v) in sec("time").iter() {
        match k {
            "t0" => time.t0 = number("time", k, v)?,
            "tf" => time.tf = Some(number("time", k, v)?),
            "h" => time.h = number("time", k, v)?,
            _ => return Err(cfg_err("time", format!("unknown key `{k}`"))),
        }
    }

    // [control]
    let mut control = ControlSection {
        weights: ControlWeights::reference(),
        sweep: SweepSettings::default(),
        levels: SCENARIO_LEVELS.to_vec(),
    };
    for (k, v) in sec("control").iter() {
        let w = &mut control.weights;
        match k {
            "a1" => w.a1 = number("control", k, v)?,
            "a2" => w.a2 = number("control", k, v)?,
            "a3" => w.a3 = number("control", k, v)?,
            "a4" => w.a4 = number("control", k, v)?,
            "a5" => w.a5 = number("control", k, v)?,
            "max_iterations" => control.sweep.max_iterations = number("control", k, v)?,
            "tolerance" => control.sweep.convergence_tol = number("control", k, v)?,
            "relaxation" => control.sweep.relaxation = number("control", k, v)?,
            "levels" => control.levels = list("control", k, v)?,
            _ => return Err(cfg_err("control", format!("unknown key `{k}`"))),
        }
    }
    if control.levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(cfg_err("control", "levels must lie in [0, 1]"));
    }

    // [fit]
    let mut fit = FitSection {
        data: None,
        free: Vec::new(),
        start: Vec::new(),
        target: FitTarget::Cumulative,
        weeks: None,
        degree: None,
    };
    let mut free_names: Vec<Param> = Vec::new();
    let mut bounds: Vec<(Param, (f64, f64))> = Vec::new();
    for (k, v) in sec("fit").iter() {
        if let Some(name) = k.strip_prefix("bounds.") {
            bounds.push((param("fit", name)?, interval("fit", k, v)?));
            continue;
        }
        if let Some(name) = k.strip_prefix("start.") {
            fit.start.push((param("fit", name)?, number("fit", k, v)?));
            continue;
        }
        match k {
            "data" => fit.data = Some(resolve(base_dir, v)),
            "free" => {
                free_names =
                    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| param("fit", s)).collect::<AppResult<_>>()?
            }
            "target" => {
                fit.target = match v.trim() {
                    "cumulative" => FitTarget::Cumulative,
                    "weekly" => FitTarget::Weekly,
                    other => return Err(cfg_err("fit", format!("target must be cumulative or weekly, got `{other}`"))),
                }
            }
            "weeks" => fit.weeks = Some(parse_week_window(v)?),
            "degree" => fit.degree = Some(number("fit", k, v)?),
            _ => return Err(cfg_err("fit", format!("unknown key `{k}`"))),
        }
    }
    let mut start = params;
    for (p, v) in &fit.start {
        start.set(*p, *v);
    }
    for p in &free_names {
        let (low, high) =
            bounds.iter().find(|(q, _)| q == p).map(|(_, b)| *b).unwrap_or_else(|| default_bounds(*p, start.get(*p)));
        fit.free.push(FreeParameter::new(*p, low, high));
    }
    if let Some((p, _)) = bounds.iter().find(|(q, _)| !free_names.contains(q)) {
        return Err(cfg_err("fit", format!("bounds given for `{p}` which is not free")));
    }
    if let Some(d) = &fit.data {
        require_file("fit", d)?;
    }

    // [sensitivity]
    let mut sens = SensitivitySection {
        samples: 100,
        ranges: default_ranges(),
        output: "r0".into(),
        weeks: 52,
        intervals: vec![(2.0, 3.0)],
        bins: 20,
        grid_x: ParameterRange::new(Param::ContactExposed, 0.0025, 0.0065)?,
        grid_y: ParameterRange::new(Param::Recovery, 0.45, 0.75)?,
        grid_resolution: 41,
        levels: Vec::new(),
    };
    for (k, v) in sec("sensitivity").iter() {
        if let Some(name) = k.strip_prefix("range.") {
            let p = param("sensitivity", name)?;
            let (lo, hi) = interval("sensitivity", k, v)?;
            let r = ParameterRange::new(p, lo, hi)?;
            match sens.ranges.iter_mut().find(|q| q.param == p) {
                Some(slot) => *slot = r,
                None => sens.ranges.push(r),
            }
            continue;
        }
        match k {
            "samples" => sens.samples = number("sensitivity", k, v)?,
            "output" => {
                let o = v.trim();
                if !["r0", "r0_vaccination", "peak_incidence", "cumulative_incidence"].contains(&o) {
                    return Err(cfg_err("sensitivity", format!("unknown output `{o}`")));
                }
                sens.output = o.into();
            }
            "weeks" => sens.weeks = number("sensitivity", k, v)?,
            "intervals" => {
                sens.intervals = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| interval("sensitivity", k, s))
                    .collect::<AppResult<_>>()?
            }
            "bins" => sens.bins = number("sensitivity", k, v)?,
            "grid_x" => sens.grid_x = parse_range("sensitivity", k, v)?,
            "grid_y" => sens.grid_y = parse_range("sensitivity", k, v)?,
            "grid_resolution" => sens.grid_resolution = number("sensitivity", k, v)?,
            "levels" => sens.levels = list("sensitivity", k, v)?,
            _ => return Err(cfg_err("sensitivity", format!("unknown key `{k}`"))),
        }
    }

    // [rt]
    let mut rt = RtSection { data: None, envelope: Vec::new(), envelope_levels: 3 };
    for (k, v) in sec("rt").iter() {
        if let Some(name) = k.strip_prefix("envelope.") {
            let (lo, hi) = interval("rt", k, v)?;
            rt.envelope.push((param("rt", name)?, lo, hi));
            continue;
        }
        match k {
            "data" => rt.data = Some(resolve(base_dir, v)),
            "envelope_levels" => rt.envelope_levels = number("rt", k, v)?,
            _ => return Err(cfg_err("rt", format!("unknown key `{k}`"))),
        }
    }
    if let Some(d) = &rt.data {
        require_file("rt", d)?;
    }

    Ok(RunConfig { source, params, initial, time, control, fit, sensitivity: sens, rt, out_dir, seed })
}

pub fn load_config(path: &Path) -> AppResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}
