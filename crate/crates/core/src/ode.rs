//! Fixed-step classical RK4 for state and adjoint systems, plus trajectory
//! validity checks (nonnegativity and the population bound).

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ParameterSet, StateVector};

/// Default step length in weeks.
pub const DEFAULT_STEP: f64 = 0.1;

/// Uniform grid `t0, t0 + h, …, tf` with `n_steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite()) || tf <= t0 {
            return Err(Error::InvalidArgument(format!("time grid needs t0 < tf, got [{t0}, {tf}]")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        Ok(Self { t0, tf, n_steps })
    }

    /// Grid on `[t0, tf]` whose step is as close as possible to `h` without
    /// exceeding it.
    pub fn with_step(t0: f64, tf: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
        }
        let n = ((tf - t0) / h - 1e-9).ceil().max(1.0) as usize;
        Self::new(t0, tf, n)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn tf(&self) -> f64 {
        self.tf
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }
    pub fn step(&self) -> f64 {
        (self.tf - self.t0) / self.n_steps as f64
    }

    /// Time of node `k`. The last node is exactly `tf`.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.tf
        } else {
            self.t0 + k as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| self.time(k)).collect()
    }
}

/// Node values of an integration on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize = 6> {
    pub grid: TimeGrid,
    pub values: Vec<[f64; N]>,
}

impl<const N: usize> Trajectory<N> {
    pub fn new(grid: TimeGrid, values: Vec<[f64; N]>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::LengthMismatch { expected: grid.n_nodes(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn first(&self) -> &[f64; N] {
        &self.values[0]
    }

    pub fn last(&self) -> &[f64; N] {
        &self.values[self.values.len() - 1]
    }

    /// Linear interpolation between stored nodes, clamped to the grid ends.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        let g = &self.grid;
        let u = ((t - g.t0()) / g.step()).clamp(0.0, g.n_steps() as f64);
        let k = (u.floor() as usize).min(g.n_steps() - 1);
        let frac = u - k as f64;
        if frac == 0.0 {
            return self.values[k];
        }
        let (a, b) = (&self.values[k], &self.values[k + 1]);
        std::array::from_fn(|j| a[j] + frac * (b[j] - a[j]))
    }

    /// Largest relative change of any component against `other`, scaled by
    /// the largest magnitude of that component in `self`.
    pub fn relative_change(&self, other: &Self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..N {
            let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v[j].abs()));
            let diff = self.values.iter().zip(&other.values).fold(0.0_f64, |m, (a, b)| m.max((a[j] - b[j]).abs()));
            if diff > 0.0 {
                worst = worst.max(diff / scale.max(f64::MIN_POSITIVE));
            }
        }
        worst
    }
}

impl Trajectory<6> {
    pub fn state(&self, k: usize) -> StateVector {
        StateVector::from(self.values[k])
    }

    /// Writes `t,S,V,E,I,R,T` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,S,V,E,I,R,T")?;
        for (k, v) in self.values.iter().enumerate() {
            write!(out, "{}", fmt_f64(self.grid.time(k)))?;
            for x in v {
                write!(out, ",{}", fmt_f64(*x))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn rk4_step<const N: usize, F>(rhs: &F, t: f64, x: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = rhs(t, x);
    let x2: [f64; N] = std::array::from_fn(|j| x[j] + 0.5 * h * k1[j]);
    let k2 = rhs(t + 0.5 * h, &x2);
    let x3: [f64; N] = std::array::from_fn(|j| x[j] + 0.5 * h * k2[j]);
    let k3 = rhs(t + 0.5 * h, &x3);
    let x4: [f64; N] = std::array::from_fn(|j| x[j] + h * k3[j]);
    let k4 = rhs(t + h, &x4);
    std::array::from_fn(|j| x[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
}

/// Integrates `x' = rhs(t, x)` from `grid.t0` with classical RK4.
pub fn integrate_forward<const N: usize, F>(rhs: F, x0: [f64; N], grid: &TimeGrid) -> Result<Trajectory<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { step: 0, time: grid.t0() });
    }
    let h = grid.step();
    let mut values = Vec::with_capacity(grid.n_nodes());
    values.push(x0);
    let mut x = x0;
    for k in 0..grid.n_steps() {
        x = rk4_step(&rhs, grid.time(k), &x, h);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k + 1, time: grid.time(k + 1) });
        }
        values.push(x);
    }
    Ok(Trajectory { grid: *grid, values })
}

/// Integrates from `grid.tf` down to `grid.t0` with step `−h`. The returned
/// values are ordered by ascending time, so `values[last] == xf`.
pub fn integrate_backward<const N: usize, F>(rhs: F, xf: [f64; N], grid: &TimeGrid) -> Result<Trajectory<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let n = grid.n_steps();
    if xf.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { step: n, time: grid.tf() });
    }
    let h = grid.step();
    let mut values = vec![[0.0; N]; grid.n_nodes()];
    values[n] = xf;
    let mut x = xf;
    for k in (0..n).rev() {
        x = rk4_step(&rhs, grid.time(k + 1), &x, -h);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k, time: grid.time(k) });
        }
        values[k] = x;
    }
    Ok(Trajectory { grid: *grid, values })
}

/// Outcome of a trajectory check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub passed: bool,
    /// Size of the largest violation (0 when nothing is violated).
    pub worst_violation: f64,
    /// Node index of the worst violation.
    pub location: usize,
    pub tolerance: f64,
}

fn report(worst: f64, location: usize, tolerance: f64) -> TrajectoryReport {
    TrajectoryReport { passed: worst <= tolerance, worst_violation: worst, location, tolerance }
}

/// Passes when no component drops below `−1e-9·max(1, ‖x0‖∞)`.
pub fn check_positivity<const N: usize>(traj: &Trajectory<N>) -> TrajectoryReport {
    let x0 = traj.first().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-9 * x0.max(1.0);
    let mut worst = 0.0_f64;
    let mut location = 0;
    for (k, v) in traj.values.iter().enumerate() {
        for &x in v {
            if -x > worst {
                worst = -x;
                location = k;
            }
        }
    }
    report(worst, location, tolerance)
}

/// Passes when the total population never exceeds `max(N(0), Λ/μ)` by more
/// than a relative `1e-9`.
pub fn check_population_bound(traj: &Trajectory<6>, p: &ParameterSet) -> Result<TrajectoryReport> {
    if p.natural_death <= 0.0 {
        return Err(Error::Degenerate("population bound needs mu > 0".into()));
    }
    let total = |v: &[f64; 6]| v.iter().sum::<f64>();
    let bound = total(traj.first()).max(p.recruitment / p.natural_death);
    let tolerance = 1e-9 * bound;
    let mut worst = 0.0_f64;
    let mut location = 0;
    for (k, v) in traj.values.iter().enumerate() {
        let excess = total(v) - bound;
        if excess > worst {
            worst = excess;
            location = k;
        }
    }
    Ok(report(worst, location, tolerance))
}
