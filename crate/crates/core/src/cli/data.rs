use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::artifacts::write_atomic;
use super::{AppError, AppResult};
use crate::calibration::IncidenceSeries;

/// A loaded incidence file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataBundle {
    pub series: IncidenceSeries,
    pub source: PathBuf,
    pub country: String,
}

/// Parses `week,new_cases` text. Weeks must be consecutive integers and
/// counts nonnegative; nothing is returned unless every row is valid.
pub fn parse_incidence_csv(text: &str, path: &Path) -> AppResult<IncidenceSeries> {
    let parse_err = |line: usize, message: String| AppError::Parse { path: path.to_path_buf(), line, message };
    let invalid = |message: String| AppError::Validation { path: path.to_path_buf(), message };

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, header)) if header.trim() == "week,new_cases" => {}
        Some((n, header)) => return Err(parse_err(n, format!("expected header `week,new_cases`, found `{header}`"))),
        None => return Err(parse_err(1, "empty file".into())),
    }

    let mut first_week = None;
    let mut counts = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_err(n, format!("expected 2 fields, found {}", fields.len())));
        }
        let week: i64 =
            fields[0].parse().map_err(|_| parse_err(n, format!("week `{}` is not an integer", fields[0])))?;
        let cases: f64 =
            fields[1].parse().map_err(|_| parse_err(n, format!("new_cases `{}` is not a number", fields[1])))?;
        if !cases.is_finite() || cases < 0.0 {
            return Err(invalid(format!("line {n}: new_cases must be nonnegative (got {})", fields[1])));
        }
        match first_week {
            None => first_week = Some(week),
            Some(w0) => {
                let expected = w0 + counts.len() as i64;
                if week < expected {
                    return Err(invalid(format!(
                        "line {n}: weeks must be strictly increasing (week {week} after {})",
                        expected - 1
                    )));
                }
                if week > expected {
                    return Err(invalid(format!("line {n}: weeks must be consecutive (gap before week {week})")));
                }
            }
        }
        counts.push(cases);
    }
    let Some(w0) = first_week else {
        return Err(invalid("no data rows".into()));
    };
    IncidenceSeries::new(w0, counts).map_err(|e| invalid(e.to_string()))
}

pub fn load_incidence_csv(path: &Path) -> AppResult<DataBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let series = parse_incidence_csv(&text, path)?;
    let country = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(DataBundle { series, source: path.to_path_buf(), country })
}

/// Writes `week,new_cases` using the shortest representation that reads
/// back to the same value, so integer counts stay integers.
pub fn write_incidence_csv<W: Write>(series: &IncidenceSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "week,new_cases")?;
    for (w, c) in series.weeks().zip(series.new_cases()) {
        writeln!(out, "{w},{c}")?;
    }
    Ok(())
}

pub fn export_incidence_csv(series: &IncidenceSeries, path: &Path) -> AppResult<()> {
    write_atomic(path, |w| write_incidence_csv(series, w))
}
