//! Least-squares calibration against weekly incidence, a Nelder–Mead
//! simplex search, and exponential-phase growth regression.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{base_rhs, Param, ParameterSet, StateVector};
use crate::ode::{integrate_forward, TimeGrid, DEFAULT_STEP};

/// Default initial state for fitting: 500 susceptible, one vaccinated,
/// exposed and infected person.
pub const DEFAULT_FIT_STATE: StateVector = StateVector::new(500.0, 1.0, 1.0, 1.0, 0.0, 0.0);

/// Weekly new cases on consecutive weeks, with their running total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncidenceSeries {
    first_week: i64,
    new_cases: Vec<f64>,
    cumulative: Vec<f64>,
}

impl IncidenceSeries {
    pub fn new(first_week: i64, new_cases: Vec<f64>) -> Result<Self> {
        if new_cases.is_empty() {
            return Err(Error::EmptyInput("incidence series"));
        }
        if let Some((k, x)) = new_cases.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "new_cases must be nonnegative and finite (week {} has {x})",
                first_week + k as i64
            )));
        }
        let cumulative = new_cases
            .iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        Ok(Self { first_week, new_cases, cumulative })
    }

    /// Series starting at week 0.
    pub fn from_counts(new_cases: Vec<f64>) -> Result<Self> {
        Self::new(0, new_cases)
    }

    pub fn len(&self) -> usize {
        self.new_cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_cases.is_empty()
    }

    pub fn first_week(&self) -> i64 {
        self.first_week
    }

    pub fn weeks(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len()).map(move |k| self.first_week + k as i64)
    }

    pub fn new_cases(&self) -> &[f64] {
        &self.new_cases
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    fn require_len(&self, min: usize) -> Result<()> {
        if self.len() < min {
            return Err(Error::InsufficientSamples { needed: min - 1, got: self.len() });
        }
        Ok(())
    }
}

/// Which view of the data the sum of squares is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitTarget {
    #[default]
    Cumulative,
    Weekly,
}

/// Weekly incidence predicted by the uncontrolled model: the system is
/// augmented with `C' = αE` and week `j` reports `C(j) − C(j−1)`.
pub fn model_weekly_incidence(p: &ParameterSet, x0: &StateVector, n_weeks: usize) -> Result<Vec<f64>> {
    model_weekly_incidence_with_step(p, x0, n_weeks, DEFAULT_STEP)
}

pub fn model_weekly_incidence_with_step(
    p: &ParameterSet,
    x0: &StateVector,
    n_weeks: usize,
    h: f64,
) -> Result<Vec<f64>> {
    if n_weeks == 0 {
        return Err(Error::InvalidArgument("n_weeks must be >= 1".into()));
    }
    let per_week = (1.0 / h - 1e-9).ceil().max(1.0) as usize;
    let grid = TimeGrid::new(0.0, n_weeks as f64, n_weeks * per_week)?;
    let a = x0.to_array();
    let start = [a[0], a[1], a[2], a[3], a[4], a[5], 0.0];
    let traj = integrate_forward(
        |_, y: &[f64; 7]| {
            let x = StateVector::new(y[0], y[1], y[2], y[3], y[4], y[5]);
            let d = base_rhs(&x, p);
            [d.s, d.v, d.e, d.i, d.r, d.t, p.progression * y[2]]
        },
        start,
        &grid,
    )?;
    Ok((1..=n_weeks).map(|j| traj.values[j * per_week][6] - traj.values[(j - 1) * per_week][6]).collect())
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    v.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Observation minus model, elementwise.
pub fn residuals_from_series(observed: &[f64], model: &[f64]) -> Result<Vec<f64>> {
    if observed.len() != model.len() {
        return Err(Error::LengthMismatch { expected: observed.len(), got: model.len() });
    }
    Ok(observed.iter().zip(model).map(|(y, m)| y - m).collect())
}

pub fn sse_from_series(observed: &[f64], model: &[f64]) -> Result<f64> {
    Ok(residuals_from_series(observed, model)?.iter().map(|r| r * r).sum())
}

/// Residuals `Y_j − model_j` in the chosen view.
pub fn residuals_for(
    p: &ParameterSet,
    data: &IncidenceSeries,
    x0: &StateVector,
    target: FitTarget,
) -> Result<Vec<f64>> {
    let weekly = model_weekly_incidence(p, x0, data.len())?;
    match target {
        FitTarget::Cumulative => residuals_from_series(data.cumulative(), &prefix_sums(&weekly)),
        FitTarget::Weekly => residuals_from_series(data.new_cases(), &weekly),
    }
}

/// Cumulative-count residuals.
pub fn residuals(p: &ParameterSet, data: &IncidenceSeries, x0: &StateVector) -> Result<Vec<f64>> {
    residuals_for(p, data, x0, FitTarget::Cumulative)
}

pub fn sse_for(p: &ParameterSet, data: &IncidenceSeries, x0: &StateVector, target: FitTarget) -> Result<f64> {
    Ok(residuals_for(p, data, x0, target)?.iter().map(|r| r * r).sum())
}

/// Sum of squared cumulative-count residuals.
pub fn sse(p: &ParameterSet, data: &IncidenceSeries, x0: &StateVector) -> Result<f64> {
    sse_for(p, data, x0, FitTarget::Cumulative)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NelderMeadSettings {
    /// Initial simplex edge in the search coordinates.
    pub initial_step: f64,
    /// Stop once the simplex diameter falls below this times `max(1, |x_best|)`.
    pub diameter_tol: f64,
    /// Evaluation budget per search dimension.
    pub evaluations_per_dim: usize,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        Self { initial_step: 0.1, diameter_tol: 1e-8, evaluations_per_dim: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each iteration, starting with the initial simplex.
    pub history: Vec<f64>,
}

/// Minimizes `f` with the Nelder–Mead simplex (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5). Non-finite values count as `+∞`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], settings: &NelderMeadSettings) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::EmptyInput("nelder-mead start point"));
    }
    let budget = settings.evaluations_per_dim * n;
    let mut evaluations = 0;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evaluations)));
    for j in 0..n {
        let mut x = x0.to_vec();
        x[j] += settings.initial_step;
        let fx = eval(&x, &mut evaluations);
        simplex.push((x, fx));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);

    let mut history = vec![simplex[0].1];
    let mut iterations = 0;
    let mut converged = false;
    let combine =
        |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };

    loop {
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(best).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0_f64, f64::max);
        let scale = best.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        if diameter < settings.diameter_tol * scale {
            converged = true;
            break;
        }
        if evaluations >= budget {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let (worst, f_worst) = simplex[n].clone();
        let f_best = simplex[0].1;
        let f_second = simplex[n - 1].1;

        let xr = combine(&centroid, &worst, -1.0);
        let fr = eval(&xr, &mut evaluations);
        if fr < f_best {
            let xe = combine(&centroid, &worst, -2.0);
            let fe = eval(&xe, &mut evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < f_second {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < f_worst {
                let xc = combine(&centroid, &xr, 0.5);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            } else {
                let xc = combine(&centroid, &worst, 0.5);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            };
            if fc < fr.min(f_worst) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let xs = combine(&x_best, &v.0, 0.5);
                    let fs = eval(&xs, &mut evaluations);
                    *v = (xs, fs);
                }
            }
        }
        order(&mut simplex);
        history.push(simplex[0].1);
    }

    let (x, fx) = simplex.swap_remove(0);
    Ok(NelderMeadResult { x, fx, iterations, evaluations, converged, history })
}

/// A free parameter and its admissible interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeParameter {
    pub param: Param,
    pub low: f64,
    pub high: f64,
}

impl FreeParameter {
    pub fn new(param: Param, low: f64, high: f64) -> Self {
        Self { param, low, high }
    }

    fn log_scaled(&self) -> bool {
        self.param.is_rate() && self.low > 0.0
    }

    fn search_coord(&self, v: f64) -> f64 {
        if self.log_scaled() {
            v.ln()
        } else {
            v
        }
    }

    fn param_value(&self, z: f64) -> f64 {
        if self.log_scaled() {
            z.exp()
        } else {
            z
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: ParameterSet,
    pub sse: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub target: FitTarget,
    /// Best SSE after each simplex iteration.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FitOptions {
    pub target: FitTarget,
    pub simplex: NelderMeadSettings,
}

/// Fits the `free` fields of `initial` to `data` by least squares.
///
/// Rates with a positive lower bound are searched in log space. Points
/// outside the box are evaluated at their projection and pay an additional
/// quadratic penalty, so the minimum always lies inside.
pub fn nelder_mead_fit(
    data: &IncidenceSeries,
    x0: &StateVector,
    initial: &ParameterSet,
    free: &[FreeParameter],
    options: &FitOptions,
) -> Result<FitResult> {
    if free.is_empty() {
        return Err(Error::InvalidBounds("at least one free parameter is required".into()));
    }
    for fp in free {
        let v = initial.get(fp.param);
        if !(fp.low.is_finite() && fp.high.is_finite() && fp.low < fp.high) {
            return Err(Error::InvalidBounds(format!(
                "{}: [{}, {}] is not a proper interval",
                fp.param, fp.low, fp.high
            )));
        }
        if fp.param.is_rate() && fp.low < 0.0 {
            return Err(Error::InvalidBounds(format!("{}: rates cannot have a negative lower bound", fp.param)));
        }
        if matches!(fp.param, Param::VaccineEfficacy | Param::VaccineInefficiency) && (fp.low < 0.0 || fp.high > 1.0) {
            return Err(Error::InvalidBounds(format!("{}: bounds must lie in [0, 1]", fp.param)));
        }
        if !(v >= fp.low && v <= fp.high) {
            return Err(Error::InvalidBounds(format!("{} = {v} lies outside [{}, {}]", fp.param, fp.low, fp.high)));
        }
    }
    initial.validate()?;
    data.require_len(2)?;

    let target = options.target;
    let overlay = |z: &[f64]| -> (ParameterSet, f64) {
        let mut p = *initial;
        let mut excess = 0.0;
        for (fp, zi) in free.iter().zip(z) {
            let (zl, zh) = (fp.search_coord(fp.low), fp.search_coord(fp.high));
            let zc = zi.clamp(zl, zh);
            let d = (zi - zc) / (zh - zl);
            excess += d * d;
            p.set(fp.param, fp.param_value(zc));
        }
        (p, excess)
    };
    let objective = |z: &[f64]| -> f64 {
        let (p, excess) = overlay(z);
        let base = sse_for(&p, data, x0, target).unwrap_or(f64::INFINITY);
        if excess > 0.0 {
            base + (1.0 + base.abs()) * 1e3 * excess
        } else {
            base
        }
    };

    let z0: Vec<f64> = free.iter().map(|fp| fp.search_coord(initial.get(fp.param))).collect();
    let nm = nelder_mead(objective, &z0, &options.simplex)?;
    let (params, _) = overlay(&nm.x);
    let residuals = residuals_for(&params, data, x0, target)?;
    let sse = residuals.iter().map(|r| r * r).sum();
    Ok(FitResult {
        params,
        sse,
        residuals,
        iterations: nm.iterations,
        evaluations: nm.evaluations,
        converged: nm.converged,
        target,
        history: nm.history,
    })
}

/// Straight-line fit of weekly new cases against cumulative cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRegression {
    /// Growth rate, week⁻¹.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least squares of `new_cases` on `cumulative` over the inclusive
/// week range `window`.
pub fn epidemic_growth_rate(data: &IncidenceSeries, window: (i64, i64)) -> Result<GrowthRegression> {
    let (a, b) = window;
    let first = data.first_week();
    let last = first + data.len() as i64 - 1;
    if a > b || a < first || b > last {
        return Err(Error::DegenerateWindow(format!("weeks {a}:{b} outside the data range {first}:{last}")));
    }
    if b - a + 1 < 2 {
        return Err(Error::DegenerateWindow("window needs at least two weeks".into()));
    }
    let (lo, hi) = ((a - first) as usize, (b - first) as usize);
    let xs = &data.cumulative()[lo..=hi];
    let ys = &data.new_cases()[lo..=hi];
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateWindow(format!("cumulative cases are constant over weeks {a}:{b}")));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(GrowthRegression { slope, intercept, r_squared, n_points: xs.len() })
}

/// Reproduction number from the exponential growth phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialPhaseR0 {
    pub r0: f64,
    pub growth_rate: f64,
    /// Always set: the closed form mixes recruitment and growth rate and is
    /// not dimensionally consistent, so the number is informational only.
    pub formula_caveat: bool,
}

/// Evaluates
///
/// ```text
/// Λαβ2 / ((μ+φ)(α+μ)k) + αμ(r + α + μ − β1Λ/μ)(r + k) / ((μ+φ)(α+μ)k)
/// ```
///
/// with `k = μ+δ+γ+γ1`, recruitment `Λ` and growth rate `r = growth.slope`.
pub fn r0_from_exponential_phase(growth: &GrowthRegression, p: &ParameterSet) -> Result<ExponentialPhaseR0> {
    let mu = p.natural_death;
    let a2 = mu + p.vaccination_rate;
    let a1 = p.exposed_exit_rate();
    let k = p.infected_exit_rate();
    if !(mu > 0.0 && a2 > 0.0 && a1 > 0.0 && k > 0.0) {
        return Err(Error::Degenerate("growth-phase R0 denominators must be positive".into()));
    }
    let r = growth.slope;
    let alpha = p.progression;
    let den = a2 * a1 * k;
    let first = p.recruitment * alpha * p.contact_infected / den;
    let second = alpha * mu * (r + alpha + mu - p.contact_exposed * p.recruitment / mu) * (r + k) / den;
    Ok(ExponentialPhaseR0 { r0: first + second, growth_rate: r, formula_caveat: true })
}

/// Least-squares polynomial trend of new cases against week.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialTrend {
    /// Coefficients in increasing degree, in the week variable.
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub sse: f64,
}

pub fn polynomial_trend(data: &IncidenceSeries, degree: usize) -> Result<PolynomialTrend> {
    if data.len() <= degree {
        return Err(Error::InsufficientSamples { needed: degree, got: data.len() });
    }
    // centre and scale the abscissa to keep the Vandermonde matrix well conditioned
    let n = data.len();
    let t: Vec<f64> = data.weeks().map(|w| w as f64).collect();
    let c = (t[0] + t[n - 1]) / 2.0;
    let s = ((t[n - 1] - t[0]) / 2.0).max(1.0);
    let u: Vec<f64> = t.iter().map(|x| (x - c) / s).collect();
    let a = DMatrix::from_fn(n, degree + 1, |i, j| u[i].powi(j as i32));
    let y = DVector::from_column_slice(data.new_cases());
    let svd = a.clone().svd(true, true);
    let beta = svd.solve(&y, 1e-12).map_err(|e| Error::SingularDesign(e.to_string()))?;
    let fitted_v = &a * &beta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let sse = fitted.iter().zip(data.new_cases()).map(|(f, y)| (y - f).powi(2)).sum();

    // expand Σ β_j ((t − c)/s)^j into powers of t
    let mut coefficients = vec![0.0; degree + 1];
    for (j, bj) in beta.iter().enumerate() {
        let scale = bj / s.powi(j as i32);
        for (m, coef) in coefficients.iter_mut().enumerate().take(j + 1) {
            *coef += scale * binomial(j, m) * (-c).powi((j - m) as i32);
        }
    }
    Ok(PolynomialTrend { coefficients, fitted, sse })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
