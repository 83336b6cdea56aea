//! Effective reproduction number from weekly incidence by the renewal
//! equation with a two-stage (hypoexponential) generation interval.

use std::io::Write;

use serde::Serialize;

use crate::calibration::IncidenceSeries;
use crate::error::{Error, Result};
use crate::model::{Param, ParameterSet};
use crate::ode::fmt_f64;

/// Two exponential stages with rates `b1` (leaving E) and `b2` (leaving I).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenerationInterval {
    pub b1: f64,
    pub b2: f64,
}

impl GenerationInterval {
    pub fn new(b1: f64, b2: f64) -> Result<Self> {
        if !(b1 > 0.0 && b2 > 0.0 && b1.is_finite() && b2.is_finite()) {
            return Err(Error::Degenerate(format!("generation interval rates must be positive, got {b1}, {b2}")));
        }
        Ok(Self { b1, b2 })
    }

    /// `b1 = α + μ`, `b2 = μ + δ + γ + γ1`.
    pub fn from_params(p: &ParameterSet) -> Result<Self> {
        Self::new(p.exposed_exit_rate(), p.infected_exit_rate())
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.b1 + 1.0 / self.b2
    }

    fn equal_rates(&self) -> bool {
        (self.b1 - self.b2).abs() <= 1e-9 * self.b1.max(self.b2)
    }

    /// `(e^{−b1 t} − e^{−b2 t}) / (b2 − b1)`, free of cancellation.
    fn divided_difference(&self, t: f64) -> f64 {
        let d = self.b2 - self.b1;
        -(-self.b1 * t).exp() * (-d * t).exp_m1() / d
    }

    /// `P(interval > t)`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if self.equal_rates() {
            let b = 0.5 * (self.b1 + self.b2);
            return Ok((-b * t).exp() * (1.0 + b * t));
        }
        Ok((-self.b1 * t).exp() + self.b1 * self.divided_difference(t))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.survival(t)?)
    }

    /// Probability mass of the week bin `[s − 1, s)` for `s ≥ 1`.
    pub fn bin_mass(&self, s: usize) -> f64 {
        assert!(s >= 1, "week bins start at 1");
        // survival is total on t >= 0
        self.survival((s - 1) as f64).unwrap() - self.survival(s as f64).unwrap()
    }
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// `h(t) = b1·b2·(e^{−b1 t} − e^{−b2 t})/(b2 − b1)`, or `b²·t·e^{−b t}` when
/// the rates coincide.
pub fn generation_interval_density(gi: &GenerationInterval, t: f64) -> Result<f64> {
    check_time(t)?;
    if gi.equal_rates() {
        let b = 0.5 * (gi.b1 + gi.b2);
        return Ok(b * b * t * (-b * t).exp());
    }
    Ok(gi.b1 * gi.b2 * gi.divided_difference(t))
}

/// Weekly effective reproduction numbers. `rt[k]` is `None` where the
/// convolution denominator vanishes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RtSeries {
    pub first_week: i64,
    pub rt: Vec<Option<f64>>,
    /// Index of the first week with a defined value.
    pub defined_from: Option<usize>,
}

impl RtSeries {
    /// Writes `week,rt,defined`; undefined weeks carry an empty `rt` field.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "week,rt,defined")?;
        for (k, r) in self.rt.iter().enumerate() {
            let week = self.first_week + k as i64;
            match r {
                Some(v) => writeln!(out, "{week},{},1", fmt_f64(*v))?,
                None => writeln!(out, "{week},,0")?,
            }
        }
        Ok(())
    }
}

/// `rt(t) = c(t) / Σ_{s=1..t} c(t−s)·h̄(s)` with week-bin masses `h̄`.
pub fn effective_r_series(data: &IncidenceSeries, gi: &GenerationInterval) -> Result<RtSeries> {
    if data.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 1, got: data.len() });
    }
    let c = data.new_cases();
    let n = c.len();
    let masses: Vec<f64> = (1..n).map(|s| gi.bin_mass(s)).collect();
    let mut rt = Vec::with_capacity(n);
    for t in 0..n {
        let mut den = 0.0;
        for s in 1..=t {
            den += c[t - s] * masses[s - 1];
        }
        rt.push(if den > 0.0 { Some(c[t] / den) } else { None });
    }
    let defined_from = rt.iter().position(Option::is_some);
    Ok(RtSeries { first_week: data.first_week(), rt, defined_from })
}

/// Pointwise min/max of rt over a full-factorial grid of parameter values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RtEnvelope {
    pub first_week: i64,
    pub low: Vec<Option<f64>>,
    pub high: Vec<Option<f64>>,
    pub combinations: usize,
}

impl RtEnvelope {
    /// Writes `week,rt_low,rt_high,defined`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "week,rt_low,rt_high,defined")?;
        for (k, (lo, hi)) in self.low.iter().zip(&self.high).enumerate() {
            let week = self.first_week + k as i64;
            match (lo, hi) {
                (Some(a), Some(b)) => writeln!(out, "{week},{},{},1", fmt_f64(*a), fmt_f64(*b))?,
                _ => writeln!(out, "{week},,,0")?,
            }
        }
        Ok(())
    }
}

/// Deterministic band of rt when each listed parameter ranges over
/// `levels` evenly spaced values of `[low, high]`.
pub fn rt_parameter_envelope(
    data: &IncidenceSeries,
    base: &ParameterSet,
    ranges: &[(Param, f64, f64)],
    levels: usize,
) -> Result<RtEnvelope> {
    if levels < 2 {
        return Err(Error::InvalidArgument("envelope needs at least two levels per parameter".into()));
    }
    for (p, lo, hi) in ranges {
        if !(lo < hi) {
            return Err(Error::InvalidRange(format!("{p}: [{lo}, {hi}]")));
        }
    }
    let n = data.len();
    let mut low: Vec<Option<f64>> = vec![None; n];
    let mut high: Vec<Option<f64>> = vec![None; n];
    let combinations = levels.pow(ranges.len() as u32);
    for code in 0..combinations {
        let mut p = *base;
        let mut rest = code;
        for (param, lo, hi) in ranges {
            let level = rest % levels;
            rest /= levels;
            p.set(*param, lo + (hi - lo) * level as f64 / (levels - 1) as f64);
        }
        let series = effective_r_series(data, &GenerationInterval::from_params(&p)?)?;
        for (k, r) in series.rt.iter().enumerate() {
            if let Some(v) = r {
                low[k] = Some(low[k].map_or(*v, |m: f64| m.min(*v)));
                high[k] = Some(high[k].map_or(*v, |m: f64| m.max(*v)));
            }
        }
    }
    Ok(RtEnvelope { first_week: data.first_week(), low, high, combinations })
}
