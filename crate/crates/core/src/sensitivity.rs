//! Global sensitivity: Latin hypercube designs, partial rank correlation,
//! spread statistics of sampled R0 and R0 level grids.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::calibration::model_weekly_incidence;
use crate::error::{Error, Result};
use crate::model::{r0_with_control, r0_without_control, Param, ParameterSet, StateVector};
use crate::ode::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterRange {
    pub param: Param,
    pub low: f64,
    pub high: f64,
}

impl ParameterRange {
    pub fn new(param: Param, low: f64, high: f64) -> Result<Self> {
        let r = Self { param, low, high };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.low, self.high);
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidRange(format!("{}: [{lo}, {hi}] needs low < high", self.param)));
        }
        if lo < 0.0 {
            return Err(Error::InvalidRange(format!("{}: values must be >= 0", self.param)));
        }
        if matches!(self.param, Param::VaccineEfficacy | Param::VaccineInefficiency) && hi > 1.0 {
            return Err(Error::InvalidRange(format!("{}: values must lie in [0, 1]", self.param)));
        }
        Ok(())
    }

    fn lerp(&self, u: f64) -> f64 {
        self.low + (self.high - self.low) * u
    }
}

/// Default sampling ranges for the nine model inputs. Recruitment has no
/// reference range, so ±20% around the preset value is used.
pub fn default_ranges() -> Vec<ParameterRange> {
    [
        (Param::ContactExposed, 0.0025, 0.0065),
        (Param::ContactInfected, 0.0025, 0.0065),
        (Param::Progression, 0.35, 0.85),
        (Param::Recovery, 0.45, 0.75),
        (Param::Recruitment, 400.0, 600.0),
        (Param::Treatment, 0.15, 0.45),
        (Param::NaturalDeath, 0.02, 0.06),
        (Param::DiseaseDeath, 0.03, 0.045),
        (Param::VaccineInefficiency, 0.3, 0.85),
    ]
    .into_iter()
    .map(|(p, lo, hi)| ParameterRange { param: p, low: lo, high: hi })
    .collect()
}

/// `n × k` design; row `i` holds one value per column parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleMatrix {
    pub ranges: Vec<ParameterRange>,
    pub rows: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SampleMatrix {
    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_params(&self) -> usize {
        self.ranges.len()
    }

    pub fn params(&self) -> Vec<Param> {
        self.ranges.iter().map(|r| r.param).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// `base` with row `i` written over it.
    pub fn overlay(&self, i: usize, base: &ParameterSet) -> ParameterSet {
        let mut p = *base;
        for (r, v) in self.ranges.iter().zip(&self.rows[i]) {
            p.set(r.param, *v);
        }
        p
    }

    /// Keeps only rows whose output is present.
    pub fn select_rows(&self, keep: &[bool]) -> Self {
        let rows = self.rows.iter().zip(keep).filter(|(_, k)| **k).map(|(r, _)| r.clone()).collect();
        Self { ranges: self.ranges.clone(), rows, seed: self.seed }
    }

    /// One column per parameter plus `output`.
    pub fn write_csv<W: Write>(&self, output: &[Option<f64>], mut out: W) -> std::io::Result<()> {
        let header: Vec<&str> = self.ranges.iter().map(|r| r.param.key()).collect();
        writeln!(out, "{},output", header.join(","))?;
        for (row, y) in self.rows.iter().zip(output) {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            let y = y.map(fmt_f64).unwrap_or_default();
            writeln!(out, "{},{y}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Latin hypercube design: each column visits every one of its `n` equal
/// strata exactly once, with an independent seeded permutation per column.
pub fn lhs_sample(ranges: &[ParameterRange], n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("LHS needs at least one sample".into()));
    }
    if ranges.is_empty() {
        return Err(Error::InvalidRange("no parameter ranges given".into()));
    }
    for r in ranges {
        r.validate()?;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = vec![Vec::with_capacity(ranges.len()); n];
    for r in ranges {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (row, stratum) in rows.iter_mut().zip(strata) {
            let u: f64 = rng.gen();
            let upper = r.lerp((stratum + 1) as f64 / n as f64);
            let mut v = r.lerp((stratum as f64 + u) / n as f64);
            if v >= upper {
                v = upper.next_down();
            }
            row.push(v);
        }
    }
    Ok(SampleMatrix { ranges: ranges.to_vec(), rows, seed })
}

/// Scalar outputs that can be computed for a design row.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    #[default]
    R0WithoutControl,
    /// Evaluated at the disease-free total `N = Λ/μ`.
    R0WithControl,
    /// Maximum weekly incidence over the horizon.
    PeakIncidence { x0: StateVector, weeks: usize },
    /// Total incidence over the horizon.
    CumulativeIncidence { x0: StateVector, weeks: usize },
}

impl OutputKind {
    pub fn evaluate(&self, p: &ParameterSet) -> Result<f64> {
        match self {
            OutputKind::R0WithoutControl => r0_without_control(p),
            OutputKind::R0WithControl => {
                if !(p.natural_death > 0.0) {
                    return Err(Error::Degenerate("N = Lambda/mu needs mu > 0".into()));
                }
                r0_with_control(p, p.recruitment / p.natural_death)
            }
            OutputKind::PeakIncidence { x0, weeks } => {
                Ok(model_weekly_incidence(p, x0, *weeks)?.into_iter().fold(0.0, f64::max))
            }
            OutputKind::CumulativeIncidence { x0, weeks } => Ok(model_weekly_incidence(p, x0, *weeks)?.iter().sum()),
        }
    }
}

/// Per-row outputs; rows whose evaluation failed are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutputs {
    pub values: Vec<Option<f64>>,
    pub missing: usize,
}

impl SampleOutputs {
    pub fn present(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_some).collect()
    }

    pub fn complete(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

/// Evaluates `f` on every overlaid row, in parallel, keeping row order.
pub fn evaluate_with<F>(m: &SampleMatrix, base: &ParameterSet, f: F) -> SampleOutputs
where
    F: Fn(&ParameterSet) -> Result<f64> + Sync,
{
    let values: Vec<Option<f64>> =
        (0..m.n_samples()).into_par_iter().map(|i| f(&m.overlay(i, base)).ok().filter(|v| v.is_finite())).collect();
    let missing = values.iter().filter(|v| v.is_none()).count();
    SampleOutputs { values, missing }
}

pub fn evaluate_model_over_samples(m: &SampleMatrix, base: &ParameterSet, output: OutputKind) -> SampleOutputs {
    evaluate_with(m, base, |p| output.evaluate(p))
}

/// Ranks `1..=n`, ties sharing their mean rank.
pub fn rank_transform(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

/// `1 − 6ΣD²/(N(N²−1))` on the ranks of `x` and `y`. Exact only without ties.
pub fn spearman_formula(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (rank_transform(x), rank_transform(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// First-order partial correlation of x and y given z from pairwise
/// correlations.
pub fn partial_correlation_from_pairs(r_xy: f64, r_xz: f64, r_yz: f64) -> f64 {
    (r_xy - r_xz * r_yz) / ((1.0 - r_xz * r_xz) * (1.0 - r_yz * r_yz)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrccEntry {
    pub param: Param,
    pub prcc: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrccResult {
    pub entries: Vec<PrccEntry>,
    pub n_samples: usize,
    pub degrees_of_freedom: usize,
}

impl PrccResult {
    pub fn get(&self, p: Param) -> Option<&PrccEntry> {
        self.entries.iter().find(|e| e.param == p)
    }

    /// Writes `parameter,prcc,p_value,significant`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "parameter,prcc,p_value,significant")?;
        for e in &self.entries {
            writeln!(out, "{},{},{},{}", e.param, fmt_f64(e.prcc), fmt_f64(e.p_value), u8::from(e.significant))?;
        }
        Ok(())
    }
}

fn residualize(design: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let beta = design.clone().svd(true, true).solve(v, 1e-12).map_err(|e| Error::SingularDesign(e.to_string()))?;
    Ok(v - design * beta)
}

/// Partial rank correlation of `y` with each design column, with two-sided
/// p-values from a Student-t with `n − k − 1` degrees of freedom.
///
/// Significant means `|prcc| > 0.5` and `p < 0.05`.
pub fn prcc(m: &SampleMatrix, y: &[f64]) -> Result<PrccResult> {
    let n = m.n_samples();
    let k = m.n_params();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if n <= k + 2 {
        return Err(Error::InsufficientSamples { needed: k + 2, got: n });
    }
    let ranked: Vec<Vec<f64>> = (0..k).map(|j| rank_transform(&m.column(j))).collect();
    for (j, col) in ranked.iter().enumerate() {
        if col.iter().all(|r| *r == col[0]) {
            return Err(Error::SingularDesign(format!("column {} is constant", m.ranges[j].param)));
        }
    }
    let ry = DVector::from_vec(rank_transform(y));
    let df = n - k - 1;
    let t_dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut entries = Vec::with_capacity(k);
    for j in 0..k {
        let design = DMatrix::from_fn(n, k, |i, c| match c {
            0 => 1.0,
            c => ranked[if c <= j { c - 1 } else { c }][i],
        });
        let rx = residualize(&design, &DVector::from_column_slice(&ranked[j]))?;
        let ryr = residualize(&design, &ry)?;
        let r = if ryr.norm() == 0.0 { 0.0 } else { pearson(rx.as_slice(), ryr.as_slice()).clamp(-1.0, 1.0) };
        let p_value = if r.abs() >= 1.0 {
            0.0
        } else {
            let t = r * (df as f64 / (1.0 - r * r)).sqrt();
            (2.0 * t_dist.sf(t.abs())).min(1.0)
        };
        entries.push(PrccEntry {
            param: m.ranges[j].param,
            prcc: r,
            p_value,
            significant: r.abs() > 0.5 && p_value < 0.05,
        });
    }
    Ok(PrccResult { entries, n_samples: n, degrees_of_freedom: df })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalFraction {
    pub low: f64,
    pub high: f64,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` edges from the sample minimum to maximum.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub n_samples: usize,
    pub intervals: Vec<IntervalFraction>,
    pub histogram: Histogram,
    /// Sample variance (`n − 1` denominator; 0 for a single sample).
    pub variance: f64,
    pub mean: f64,
}

impl BiasReport {
    /// Writes `bin_low,bin_high,count`.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_low,bin_high,count")?;
        for (i, c) in self.histogram.counts.iter().enumerate() {
            writeln!(out, "{},{},{c}", fmt_f64(self.histogram.edges[i]), fmt_f64(self.histogram.edges[i + 1]))?;
        }
        Ok(())
    }

    /// Writes `low,high,count,fraction`.
    pub fn write_intervals_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "low,high,count,fraction")?;
        for f in &self.intervals {
            writeln!(out, "{},{},{},{}", fmt_f64(f.low), fmt_f64(f.high), f.count, fmt_f64(f.fraction))?;
        }
        Ok(())
    }
}

/// Equal-width histogram over `[min, max]`; the last bin is closed.
pub fn histogram(y: &[f64], bins: usize) -> Result<Histogram> {
    if y.is_empty() {
        return Err(Error::EmptyInput("histogram samples"));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0; bins];
    for v in y {
        let b = if width > 0.0 { (((v - lo) / width) as usize).min(bins - 1) } else { 0 };
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Fractions of `y` inside each closed interval, plus histogram and
/// variance of `y`.
pub fn relative_bias(y: &[f64], intervals: &[(f64, f64)], bins: usize) -> Result<BiasReport> {
    if y.is_empty() {
        return Err(Error::EmptyInput("relative bias samples"));
    }
    let n = y.len();
    let intervals = intervals
        .iter()
        .map(|&(low, high)| {
            let count = y.iter().filter(|v| **v >= low && **v <= high).count();
            IntervalFraction { low, high, count, fraction: count as f64 / n as f64 }
        })
        .collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 { y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Ok(BiasReport { n_samples: n, intervals, histogram: histogram(y, bins)?, variance, mean })
}

/// R0 over a rectangular parameter grid. `values[iy][ix]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelGrid {
    pub x_param: Param,
    pub y_param: Param,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
    /// Sign of ∂R0/∂x at the grid centre by central difference.
    pub dx_sign_at_center: f64,
    pub dy_sign_at_center: f64,
}

impl LevelGrid {
    /// Writes `x,y,r0`, x varying fastest; missing cells have an empty `r0`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,r0")?;
        for (iy, yv) in self.y.iter().enumerate() {
            for (ix, xv) in self.x.iter().enumerate() {
                let r = self.values[iy][ix].map(fmt_f64).unwrap_or_default();
                writeln!(out, "{},{},{r}", fmt_f64(*xv), fmt_f64(*yv))?;
            }
        }
        Ok(())
    }
}

fn axis(r: &ParameterRange, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == n - 1 { r.high } else { r.lerp(i as f64 / (n - 1) as f64) }).collect()
}

pub fn r0_level_grid(
    px: &ParameterRange,
    py: &ParameterRange,
    base: &ParameterSet,
    resolution: (usize, usize),
) -> Result<LevelGrid> {
    px.validate()?;
    py.validate()?;
    let (nx, ny) = resolution;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument("level grid needs at least 2 points per axis".into()));
    }
    let x = axis(px, nx);
    let y = axis(py, ny);
    let eval = |xv: f64, yv: f64| {
        r0_without_control(&base.with(px.param, xv).with(py.param, yv)).ok().filter(|v| v.is_finite())
    };
    let values: Vec<Vec<Option<f64>>> = y.par_iter().map(|&yv| x.iter().map(|&xv| eval(xv, yv)).collect()).collect();
    let (cx, cy) = (0.5 * (px.low + px.high), 0.5 * (py.low + py.high));
    let (hx, hy) = (1e-6 * (px.high - px.low), 1e-6 * (py.high - py.low));
    let diff_sign = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a - b).signum() * f64::from(u8::from(a != b)),
        _ => f64::NAN,
    };
    let dx_sign_at_center = diff_sign(eval(cx + hx, cy), eval(cx - hx, cy));
    let dy_sign_at_center = diff_sign(eval(cx, cy + hy), eval(cx, cy - hy));
    Ok(LevelGrid { x_param: px.param, y_param: py.param, x, y, values, dx_sign_at_center, dy_sign_at_center })
}

/// For each grid column, the first `y` at which R0 crosses `level`, found by
/// linear interpolation between neighbouring rows.
pub fn level_curve(grid: &LevelGrid, level: f64) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for (ix, &xv) in grid.x.iter().enumerate() {
        for iy in 0..grid.y.len() - 1 {
            let (Some(a), Some(b)) = (grid.values[iy][ix], grid.values[iy + 1][ix]) else { continue };
            if a == level {
                pts.push((xv, grid.y[iy]));
                break;
            }
            if (a - level) * (b - level) < 0.0 {
                let f = (level - a) / (b - a);
                pts.push((xv, grid.y[iy] + f * (grid.y[iy + 1] - grid.y[iy])));
                break;
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MEXICO;

    fn range(p: Param, lo: f64, hi: f64) -> ParameterRange {
        ParameterRange::new(p, lo, hi).unwrap()
    }

    #[test]
    fn single_row_design() {
        let m = lhs_sample(&default_ranges(), 1, 3).unwrap();
        assert_eq!(m.n_samples(), 1);
        for (r, v) in m.ranges.iter().zip(&m.rows[0]) {
            assert!(*v >= r.low && *v < r.high);
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = lhs_sample(&default_ranges(), 20, 11).unwrap();
        assert_eq!(a, lhs_sample(&default_ranges(), 20, 11).unwrap());
        assert_ne!(a.rows, lhs_sample(&default_ranges(), 20, 12).unwrap().rows);
    }

    #[test]
    fn invalid_ranges() {
        assert!(ParameterRange::new(Param::Progression, 0.5, 0.5).is_err());
        assert!(ParameterRange::new(Param::VaccineEfficacy, 0.5, 1.5).is_err());
        assert!(ParameterRange::new(Param::Recovery, -0.1, 0.5).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(rank_transform(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(rank_transform(&[5.0; 4]), vec![2.5; 4]);
        assert_eq!(rank_transform(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn constant_output_ignores_the_design() {
        let m = lhs_sample(&default_ranges(), 10, 1).unwrap();
        let out = evaluate_with(&m, &MEXICO.params, |_| Ok(2.5));
        assert!(out.values.iter().all(|v| *v == Some(2.5)));
        assert_eq!(out.missing, 0);
    }

    #[test]
    fn failing_rows_are_missing() {
        let m = lhs_sample(&[range(Param::NaturalDeath, 0.0, 0.1)], 10, 1).unwrap();
        let base = MEXICO.params.with(Param::VaccinationRate, 0.0).with(Param::Progression, 0.0);
        let out =
            evaluate_with(
                &m,
                &base,
                |p| if p.natural_death < 0.05 { Err(Error::Degenerate("x".into())) } else { Ok(1.0) },
            );
        assert_eq!(out.missing, 5);
        assert_eq!(out.complete().len(), 5);
    }

    #[test]
    fn prcc_needs_enough_rows() {
        let m = lhs_sample(&default_ranges(), 11, 1).unwrap();
        let y = vec![0.0; 11];
        assert!(matches!(prcc(&m, &y), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn constant_column_is_singular() {
        let mut m = lhs_sample(&default_ranges()[..2], 20, 1).unwrap();
        for r in &mut m.rows {
            r[1] = 0.003;
        }
        let y: Vec<f64> = m.column(0);
        assert!(matches!(prcc(&m, &y), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn bias_worked_example() {
        let y: Vec<f64> = (0..100).map(|i| if i < 20 { 2.0 + i as f64 / 20.0 } else { 5.0 + i as f64 }).collect();
        let r = relative_bias(&y, &[(2.0, 3.0)], 10).unwrap();
        assert_eq!(r.intervals[0].fraction, 0.2);
        assert_eq!(r.histogram.counts.iter().sum::<usize>(), 100);
        assert!(relative_bias(&[], &[], 3).is_err());
    }

    #[test]
    fn level_grid_corners_match_direct_evaluation() {
        let p = MEXICO.params;
        let g = r0_level_grid(
            &range(Param::ContactExposed, 0.0025, 0.0065),
            &range(Param::ContactInfected, 0.0025, 0.0065),
            &p,
            (5, 4),
        )
        .unwrap();
        let direct =
            r0_without_control(&p.with(Param::ContactExposed, 0.0065).with(Param::ContactInfected, 0.0025)).unwrap();
        assert_eq!(g.values[0][4], Some(direct));
        assert_eq!(g.dx_sign_at_center, 1.0);
        assert_eq!(g.dy_sign_at_center, 1.0);
    }
}
