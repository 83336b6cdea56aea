//! Optimal control of the SVEIRT system: cost functional, Hamiltonian,
//! costate equations, the pointwise control law and a relaxed
//! forward–backward sweep.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{controlled_rhs, ControlVector, ParameterSet, StateVector};
use crate::ode::{fmt_f64, integrate_backward, integrate_forward, TimeGrid, Trajectory};

/// Cost weights: `a1`, `a2` on exposed and infected people, `a3..a5` on the
/// squared efforts w1..w3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlWeights {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
}

impl ControlWeights {
    pub const fn new(a1: f64, a2: f64, a3: f64, a4: f64, a5: f64) -> Self {
        Self { a1, a2, a3, a4, a5 }
    }

    /// Weights used by the reference scenario.
    pub const fn reference() -> Self {
        Self::new(20.0, 20.0, 45.0, 25.0, 50.0)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a1, self.a2, self.a3, self.a4, self.a5];
        if all.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidArgument(format!("control weights must be finite and >= 0: {self:?}")));
        }
        self.check_effort()
    }

    fn check_effort(&self) -> Result<()> {
        if !(self.a3 > 0.0) {
            return Err(Error::ZeroEffortWeight("a3"));
        }
        if !(self.a4 > 0.0) {
            return Err(Error::ZeroEffortWeight("a4"));
        }
        if !(self.a5 > 0.0) {
            return Err(Error::ZeroEffortWeight("a5"));
        }
        Ok(())
    }

    /// Curvature `∂²H/∂w_i²` of the Hamiltonian in each control.
    pub fn curvature(&self) -> [f64; 3] {
        [2.0 * self.a3, 2.0 * self.a4, 2.0 * self.a5]
    }
}

/// Costates (ΨS, ΨV, ΨE, ΨI, ΨR, ΨT).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AdjointVector(pub [f64; 6]);

impl AdjointVector {
    pub fn s(&self) -> f64 {
        self.0[0]
    }
    pub fn v(&self) -> f64 {
        self.0[1]
    }
    pub fn e(&self) -> f64 {
        self.0[2]
    }
    pub fn i(&self) -> f64 {
        self.0[3]
    }
    pub fn r(&self) -> f64 {
        self.0[4]
    }
    pub fn t(&self) -> f64 {
        self.0[5]
    }
}

/// Controls stored at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub grid: TimeGrid,
    values: Vec<ControlVector>,
}

impl ControlSchedule {
    pub fn new(grid: TimeGrid, values: Vec<ControlVector>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::LengthMismatch { expected: grid.n_nodes(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, w: ControlVector) -> Self {
        Self { grid, values: vec![w; grid.n_nodes()] }
    }

    pub fn values(&self) -> &[ControlVector] {
        &self.values
    }

    /// Linear interpolation between nodes. Convex combinations of clamped
    /// nodes stay in `[0, 1]³`.
    pub fn at(&self, t: f64) -> ControlVector {
        let g = &self.grid;
        let u = ((t - g.t0()) / g.step()).clamp(0.0, g.n_steps() as f64);
        let k = (u.floor() as usize).min(g.n_steps() - 1);
        let frac = u - k as f64;
        if frac == 0.0 {
            return self.values[k];
        }
        let (a, b) = (self.values[k].to_array(), self.values[k + 1].to_array());
        let w: [f64; 3] = std::array::from_fn(|j| a[j] + frac * (b[j] - a[j]));
        ControlVector::new(w[0], w[1], w[2])
    }

    fn as_trajectory(&self) -> Trajectory<3> {
        Trajectory { grid: self.grid, values: self.values.iter().map(|w| w.to_array()).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSettings {
    pub max_iterations: usize,
    /// Relative change below which states, costates and controls count as
    /// converged.
    pub convergence_tol: f64,
    /// Weight θ of the fresh candidate in `w ← θ·w_candidate + (1−θ)·w_old`.
    pub relaxation: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { max_iterations: 200, convergence_tol: 1e-3, relaxation: 0.5 }
    }
}

impl SweepSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidArgument("convergence_tol must be > 0".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidArgument("relaxation must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub states: Trajectory,
    pub adjoints: Trajectory,
    pub controls: ControlSchedule,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative change of the final iteration.
    pub last_change: f64,
}

impl SweepResult {
    /// Writes `t,S,V,E,I,R,T,psiS,psiV,psiE,psiI,psiR,psiT,w1,w2,w3`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,S,V,E,I,R,T,psiS,psiV,psiE,psiI,psiR,psiT,w1,w2,w3")?;
        let g = &self.states.grid;
        for k in 0..g.n_nodes() {
            write!(out, "{}", fmt_f64(g.time(k)))?;
            let w = self.controls.values[k].to_array();
            let row = self.states.values[k].iter().chain(self.adjoints.values[k].iter()).chain(w.iter());
            for x in row {
                write!(out, ",{}", fmt_f64(*x))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// A fixed (non-optimized) control schedule and the cost it incurs.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub states: Trajectory,
    pub controls: ControlSchedule,
    pub objective: f64,
}

impl ScenarioRun {
    /// Writes `t,S,V,E,I,R,T,w1,w2,w3`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,S,V,E,I,R,T,w1,w2,w3")?;
        let g = &self.states.grid;
        for k in 0..g.n_nodes() {
            write!(out, "{}", fmt_f64(g.time(k)))?;
            let w = self.controls.values[k].to_array();
            for x in self.states.values[k].iter().chain(w.iter()) {
                write!(out, ",{}", fmt_f64(*x))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn running_cost(x: &[f64; 6], w: &ControlVector, aw: &ControlWeights) -> f64 {
    aw.a1 * x[2] + aw.a2 * x[3] + aw.a3 * w.w1() * w.w1() + aw.a4 * w.w2() * w.w2() + aw.a5 * w.w3() * w.w3()
}

/// Cost `∫ a1E + a2I + a3w1² + a4w2² + a5w3² dt` by the composite trapezoid
/// rule on the shared grid.
pub fn objective(states: &Trajectory, controls: &ControlSchedule, aw: &ControlWeights) -> Result<f64> {
    if states.grid != controls.grid {
        return Err(Error::GridMismatch(format!("states on {:?}, controls on {:?}", states.grid, controls.grid)));
    }
    let h = states.grid.step();
    let g: Vec<f64> = states.values.iter().zip(&controls.values).map(|(x, w)| running_cost(x, w, aw)).collect();
    let n = g.len() - 1;
    let inner: f64 = g[1..n].iter().sum();
    Ok(h * (0.5 * (g[0] + g[n]) + inner))
}

/// `H = a1E + a2I + a3w1² + a4w2² + a5w3² + Σ Ψ_i·F_i(x, w)`.
pub fn hamiltonian(
    x: &StateVector,
    psi: &AdjointVector,
    w: &ControlVector,
    p: &ParameterSet,
    aw: &ControlWeights,
) -> f64 {
    let f = controlled_rhs(x, p, w).to_array();
    let mut h = running_cost(&x.to_array(), w, aw);
    for (psi_j, f_j) in psi.0.iter().zip(f) {
        h += psi_j * f_j;
    }
    h
}

/// Costate derivative `Ψ' = −∂H/∂x`.
pub fn adjoint_rhs(
    psi: &AdjointVector,
    x: &StateVector,
    w: &ControlVector,
    p: &ParameterSet,
    aw: &ControlWeights,
) -> AdjointVector {
    let (b1, b2) = (p.contact_exposed, p.contact_infected);
    let force = b1 * x.e + b2 * x.i;
    let lambda = p.vaccine_inefficiency();
    let u = 1.0 - w.w1();
    let mu = p.natural_death;
    let rec = (1.0 + w.w3()) * p.recovery;
    let trt = (1.0 + w.w2()) * p.treatment;
    let k = mu + p.disease_death + rec + trt;
    let [ps, pv, pe, pi, pr, pt] = psi.0;

    let d_s = ps * (u * force + mu + p.vaccination_rate) - pv * p.vaccination_rate - pe * u * force;
    let d_v = pv * (lambda * force + mu) - pi * lambda * force;
    let d_e = -aw.a1 + u * b1 * x.s * (ps - pe) + lambda * b1 * x.v * (pv - pi) + (p.progression + mu) * pe
        - p.progression * pi;
    let d_i = -aw.a2 + u * b2 * x.s * (ps - pe) + lambda * b2 * x.v * (pv - pi) + k * pi - rec * pr - trt * pt;
    let d_r = mu * pr;
    let d_t = mu * pt;
    AdjointVector([d_s, d_v, d_e, d_i, d_r, d_t])
}

/// The three switching drives `(ΨE−ΨS)·B·S`, `(ΨI−ΨT)·γ1·I`, `(ΨI−ΨR)·γ·I`
/// with `B = β1E + β2I`. `∂H/∂w_i = 2a_{i+2}·w_i − drive_i`.
pub fn control_drive(x: &StateVector, psi: &AdjointVector, p: &ParameterSet) -> [f64; 3] {
    let force = p.contact_exposed * x.e + p.contact_infected * x.i;
    [(psi.e() - psi.s()) * force * x.s, (psi.i() - psi.t()) * p.treatment * x.i, (psi.i() - psi.r()) * p.recovery * x.i]
}

/// `∂H/∂w` at the given point.
pub fn control_gradient(
    x: &StateVector,
    psi: &AdjointVector,
    w: &ControlVector,
    p: &ParameterSet,
    aw: &ControlWeights,
) -> [f64; 3] {
    let d = control_drive(x, psi, p);
    let c = aw.curvature();
    let w = w.to_array();
    std::array::from_fn(|j| c[j] * w[j] - d[j])
}

/// Pointwise minimizer of `H` over `[0, 1]³`.
pub fn optimality_update(
    x: &StateVector,
    psi: &AdjointVector,
    p: &ParameterSet,
    aw: &ControlWeights,
) -> Result<ControlVector> {
    aw.check_effort()?;
    let d = control_drive(x, psi, p);
    Ok(ControlVector::new(d[0] / (2.0 * aw.a3), d[1] / (2.0 * aw.a4), d[2] / (2.0 * aw.a5)))
}

/// Integrates the controlled system under `schedule`.
pub fn simulate_controlled(p: &ParameterSet, x0: &StateVector, schedule: &ControlSchedule) -> Result<Trajectory> {
    integrate_forward(
        |t, x| controlled_rhs(&StateVector::from(*x), p, &schedule.at(t)).to_array(),
        x0.to_array(),
        &schedule.grid,
    )
}

/// Integrates the costates backward from `Ψ(tf) = 0` along `states`.
pub fn solve_adjoints(
    p: &ParameterSet,
    aw: &ControlWeights,
    states: &Trajectory,
    schedule: &ControlSchedule,
) -> Result<Trajectory> {
    integrate_backward(
        |t, psi| {
            let x = StateVector::from(states.interpolate(t));
            adjoint_rhs(&AdjointVector(*psi), &x, &schedule.at(t), p, aw).0
        },
        [0.0; 6],
        &schedule.grid,
    )
}

/// Cost of a fixed schedule.
pub fn evaluate_schedule(
    p: &ParameterSet,
    aw: &ControlWeights,
    x0: &StateVector,
    schedule: &ControlSchedule,
) -> Result<ScenarioRun> {
    let states = simulate_controlled(p, x0, schedule)?;
    let objective = objective(&states, schedule, aw)?;
    Ok(ScenarioRun { states, controls: schedule.clone(), objective })
}

/// Cost of holding all three controls at `level` for the whole horizon.
pub fn evaluate_constant(
    p: &ParameterSet,
    aw: &ControlWeights,
    x0: &StateVector,
    grid: &TimeGrid,
    w: ControlVector,
) -> Result<ScenarioRun> {
    evaluate_schedule(p, aw, x0, &ControlSchedule::constant(*grid, w))
}

/// Initial state of the reference scenario.
pub const REFERENCE_INITIAL_STATE: StateVector = StateVector::new(500.0, 1.0, 1.0, 0.0, 0.0, 0.0);

/// Constant levels of the reference scenarios: no control, then three
/// uniform effort levels.
pub const SCENARIO_LEVELS: [f64; 4] = [0.0, 0.45, 0.6, 0.75];

/// Solves the optimality system by a relaxed forward–backward sweep starting
/// from `w ≡ 0`.
pub fn forward_backward_sweep(
    p: &ParameterSet,
    aw: &ControlWeights,
    x0: &StateVector,
    grid: &TimeGrid,
    settings: &SweepSettings,
) -> Result<SweepResult> {
    p.validate()?;
    aw.validate()?;
    settings.validate()?;
    x0.validate()?;
    let theta = settings.relaxation;

    let mut controls = ControlSchedule::constant(*grid, ControlVector::zero());
    let mut states = simulate_controlled(p, x0, &controls)?;
    let mut adjoints = solve_adjoints(p, aw, &states, &controls)?;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;

    while iterations < settings.max_iterations {
        iterations += 1;
        let mut next = Vec::with_capacity(grid.n_nodes());
        for k in 0..grid.n_nodes() {
            let cand = optimality_update(&states.state(k), &AdjointVector(adjoints.values[k]), p, aw)?.to_array();
            let old = controls.values[k].to_array();
            let w: [f64; 3] = std::array::from_fn(|j| theta * cand[j] + (1.0 - theta) * old[j]);
            next.push(ControlVector::new(w[0], w[1], w[2]));
        }
        let next = ControlSchedule::new(*grid, next)?;
        let next_states = simulate_controlled(p, x0, &next)?;
        let next_adjoints = solve_adjoints(p, aw, &next_states, &next)?;

        last_change = next_states
            .relative_change(&states)
            .max(next_adjoints.relative_change(&adjoints))
            .max(next.as_trajectory().relative_change(&controls.as_trajectory()));
        controls = next;
        states = next_states;
        adjoints = next_adjoints;
        if last_change <= settings.convergence_tol {
            converged = true;
            break;
        }
    }

    let objective = objective(&states, &controls, aw)?;
    Ok(SweepResult { states, adjoints, controls, objective, iterations, converged, last_change })
}

/// Worst interior first-order violation of a sweep result:
/// `max |∂H/∂w_i| / max |drive_i|` over nodes where `margin < w_i < 1 − margin`.
pub fn stationarity_violation(res: &SweepResult, p: &ParameterSet, aw: &ControlWeights, margin: f64) -> f64 {
    let n = res.states.grid.n_nodes();
    let mut worst = 0.0_f64;
    for j in 0..3 {
        let mut max_drive = 0.0_f64;
        let mut max_grad = 0.0_f64;
        for k in 0..n {
            let x = res.states.state(k);
            let psi = AdjointVector(res.adjoints.values[k]);
            let w = res.controls.values[k];
            max_drive = max_drive.max(control_drive(&x, &psi, p)[j].abs());
            let wj = w.to_array()[j];
            if wj > margin && wj < 1.0 - margin {
                max_grad = max_grad.max(control_gradient(&x, &psi, &w, p, aw)[j].abs());
            }
        }
        if max_grad > 0.0 {
            worst = worst.max(max_grad / max_drive);
        }
    }
    worst
}
