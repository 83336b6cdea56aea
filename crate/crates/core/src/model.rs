//! SVEIRT compartmental model: parameters, state, right-hand sides,
//! equilibria, reproduction numbers and their local elasticities.
//!
//! All rates are per week. Every function here is pure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vaccination rate assumed by the bundled presets (week⁻¹). The fitted
/// parameter sets do not include it, so presets pin it explicitly.
pub const DEFAULT_VACCINATION_RATE: f64 = 0.1;

/// Recruitment used by the bundled presets (persons·week⁻¹).
pub const DEFAULT_RECRUITMENT: f64 = 500.0;

/// A named scalar of [`ParameterSet`].
///
/// `VaccineInefficiency` is the derived quantity `1 − ε`; reading it computes
/// `1 − epsilon` and writing it stores `epsilon = 1 − value`. It is accepted
/// in sampling designs but never in preset files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    Recruitment,
    ContactExposed,
    ContactInfected,
    VaccinationRate,
    Progression,
    Recovery,
    Treatment,
    NaturalDeath,
    DiseaseDeath,
    VaccineEfficacy,
    VaccineInefficiency,
}

impl Param {
    /// The ten stored fields, in preset-file order.
    pub const STORED: [Param; 10] = [
        Param::Recruitment,
        Param::ContactExposed,
        Param::ContactInfected,
        Param::VaccinationRate,
        Param::Progression,
        Param::Recovery,
        Param::Treatment,
        Param::NaturalDeath,
        Param::DiseaseDeath,
        Param::VaccineEfficacy,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Param::Recruitment => "Lambda",
            Param::ContactExposed => "beta1",
            Param::ContactInfected => "beta2",
            Param::VaccinationRate => "phi",
            Param::Progression => "alpha",
            Param::Recovery => "gamma",
            Param::Treatment => "gamma1",
            Param::NaturalDeath => "mu",
            Param::DiseaseDeath => "delta",
            Param::VaccineEfficacy => "epsilon",
            Param::VaccineInefficiency => "lambda",
        }
    }

    /// Rates that must stay strictly positive when searched in log space.
    pub fn is_rate(self) -> bool {
        !matches!(self, Param::VaccineEfficacy | Param::VaccineInefficiency)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = match s {
            "Lambda" => Param::Recruitment,
            "beta1" => Param::ContactExposed,
            "beta2" => Param::ContactInfected,
            "phi" => Param::VaccinationRate,
            "alpha" => Param::Progression,
            "gamma" => Param::Recovery,
            "gamma1" => Param::Treatment,
            "mu" => Param::NaturalDeath,
            "delta" => Param::DiseaseDeath,
            "epsilon" => Param::VaccineEfficacy,
            "lambda" => Param::VaccineInefficiency,
            other => return Err(Error::InvalidArgument(format!("unknown parameter `{other}`"))),
        };
        Ok(p)
    }
}

/// Epidemiological rates of the SVEIRT system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    /// Λ, persons·week⁻¹.
    pub recruitment: f64,
    /// β1, transmission from E–S contact.
    pub contact_exposed: f64,
    /// β2, transmission from I–S contact.
    pub contact_infected: f64,
    /// φ.
    pub vaccination_rate: f64,
    /// α, E → I.
    pub progression: f64,
    /// γ, I → R.
    pub recovery: f64,
    /// γ1, I → T.
    pub treatment: f64,
    /// μ.
    pub natural_death: f64,
    /// δ.
    pub disease_death: f64,
    /// ε ∈ [0, 1].
    pub vaccine_efficacy: f64,
}

impl ParameterSet {
    /// Vaccine inefficiency λ = 1 − ε. The only place λ is defined.
    #[inline]
    pub fn vaccine_inefficiency(&self) -> f64 {
        1.0 - self.vaccine_efficacy
    }

    /// α + μ: exit rate from E.
    #[inline]
    pub fn exposed_exit_rate(&self) -> f64 {
        self.progression + self.natural_death
    }

    /// μ + δ + γ + γ1: exit rate from I.
    #[inline]
    pub fn infected_exit_rate(&self) -> f64 {
        self.natural_death + self.disease_death + self.recovery + self.treatment
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Recruitment => self.recruitment,
            Param::ContactExposed => self.contact_exposed,
            Param::ContactInfected => self.contact_infected,
            Param::VaccinationRate => self.vaccination_rate,
            Param::Progression => self.progression,
            Param::Recovery => self.recovery,
            Param::Treatment => self.treatment,
            Param::NaturalDeath => self.natural_death,
            Param::DiseaseDeath => self.disease_death,
            Param::VaccineEfficacy => self.vaccine_efficacy,
            Param::VaccineInefficiency => self.vaccine_inefficiency(),
        }
    }

    pub fn set(&mut self, p: Param, value: f64) {
        match p {
            Param::Recruitment => self.recruitment = value,
            Param::ContactExposed => self.contact_exposed = value,
            Param::ContactInfected => self.contact_infected = value,
            Param::VaccinationRate => self.vaccination_rate = value,
            Param::Progression => self.progression = value,
            Param::Recovery => self.recovery = value,
            Param::Treatment => self.treatment = value,
            Param::NaturalDeath => self.natural_death = value,
            Param::DiseaseDeath => self.disease_death = value,
            Param::VaccineEfficacy => self.vaccine_efficacy = value,
            Param::VaccineInefficiency => self.vaccine_efficacy = 1.0 - value,
        }
    }

    pub fn with(mut self, p: Param, value: f64) -> Self {
        self.set(p, value);
        self
    }

    /// Checks the domain: every field finite and ≥ 0, ε ∈ [0, 1], μ > 0.
    pub fn validate(&self) -> Result<()> {
        for p in Param::STORED {
            let v = self.get(p);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameters(format!("{p} = {v} must be finite and >= 0")));
            }
        }
        if self.vaccine_efficacy > 1.0 {
            return Err(Error::InvalidParameters(format!("epsilon = {} must lie in [0, 1]", self.vaccine_efficacy)));
        }
        if self.natural_death <= 0.0 {
            return Err(Error::Degenerate("mu must be strictly positive".into()));
        }
        Ok(())
    }
}

/// The six compartments, in persons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub s: f64,
    pub v: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
    pub t: f64,
}

impl StateVector {
    pub const fn new(s: f64, v: f64, e: f64, i: f64, r: f64, t: f64) -> Self {
        Self { s, v, e, i, r, t }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn total(&self) -> f64 {
        self.s + self.v + self.e + self.i + self.r + self.t
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.s, self.v, self.e, self.i, self.r, self.t]
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument(format!("state components must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }
}

impl From<[f64; 6]> for StateVector {
    fn from(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }
}

impl From<StateVector> for [f64; 6] {
    fn from(x: StateVector) -> Self {
        x.to_array()
    }
}

/// Control efforts (w1, w2, w3), each clamped to [0, 1] on construction.
///
/// w1 scales down the infection term, w2 boosts treatment, w3 boosts recovery.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlVector {
    w: [f64; 3],
}

impl ControlVector {
    pub fn new(w1: f64, w2: f64, w3: f64) -> Self {
        let clamp = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        Self { w: [clamp(w1), clamp(w2), clamp(w3)] }
    }

    pub const fn zero() -> Self {
        Self { w: [0.0; 3] }
    }

    pub fn uniform(level: f64) -> Self {
        Self::new(level, level, level)
    }

    #[inline]
    pub fn w1(&self) -> f64 {
        self.w[0]
    }
    #[inline]
    pub fn w2(&self) -> f64 {
        self.w[1]
    }
    #[inline]
    pub fn w3(&self) -> f64 {
        self.w[2]
    }

    pub fn to_array(self) -> [f64; 3] {
        self.w
    }
}

/// A named, fitted parameter column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountryPreset {
    pub name: &'static str,
    pub params: ParameterSet,
}

#[allow(clippy::too_many_arguments)]
const fn fitted(
    contact_exposed: f64,
    contact_infected: f64,
    progression: f64,
    recovery: f64,
    treatment: f64,
    natural_death: f64,
    disease_death: f64,
    vaccine_efficacy: f64,
) -> ParameterSet {
    ParameterSet {
        recruitment: DEFAULT_RECRUITMENT,
        contact_exposed,
        contact_infected,
        vaccination_rate: DEFAULT_VACCINATION_RATE,
        progression,
        recovery,
        treatment,
        natural_death,
        disease_death,
        vaccine_efficacy,
    }
}

pub const MEXICO: CountryPreset =
    CountryPreset { name: "mexico", params: fitted(0.0055, 0.0055, 0.75, 0.65, 0.25, 0.05, 0.3, 0.45) };

pub const ITALY: CountryPreset =
    CountryPreset { name: "italy", params: fitted(0.0053, 0.0061, 0.67, 0.61, 0.31, 0.03, 0.27, 0.41) };

pub const SOUTH_AFRICA: CountryPreset =
    CountryPreset { name: "south_africa", params: fitted(0.0075, 0.0081, 0.78, 0.63, 0.35, 0.03, 0.29, 0.44) };

pub const PRESETS: [CountryPreset; 3] = [MEXICO, ITALY, SOUTH_AFRICA];

pub fn preset(name: &str) -> Option<CountryPreset> {
    PRESETS.iter().copied().find(|p| p.name == name)
}

/// Uncontrolled SVEIRT right-hand side.
pub fn base_rhs(x: &StateVector, p: &ParameterSet) -> StateVector {
    let force = p.contact_exposed * x.e + p.contact_infected * x.i;
    let lambda = p.vaccine_inefficiency();
    StateVector {
        s: p.recruitment - force * x.s - (p.natural_death + p.vaccination_rate) * x.s,
        v: p.vaccination_rate * x.s - lambda * force * x.v - p.natural_death * x.v,
        e: force * x.s - (p.progression + p.natural_death) * x.e,
        i: p.progression * x.e + lambda * force * x.v
            - (p.natural_death + p.disease_death + p.recovery + p.treatment) * x.i,
        r: p.recovery * x.i - p.natural_death * x.r,
        t: p.treatment * x.i - p.natural_death * x.t,
    }
}

/// Right-hand side under control efforts `w`.
///
/// At `w = 0` this evaluates the same floating-point expressions as
/// [`base_rhs`], so the two agree bit for bit.
pub fn controlled_rhs(x: &StateVector, p: &ParameterSet, w: &ControlVector) -> StateVector {
    let force = p.contact_exposed * x.e + p.contact_infected * x.i;
    let lambda = p.vaccine_inefficiency();
    let infection = (1.0 - w.w1()) * force * x.s;
    let recovered = (1.0 + w.w3()) * p.recovery;
    let treated = (1.0 + w.w2()) * p.treatment;
    StateVector {
        s: p.recruitment - infection - (p.natural_death + p.vaccination_rate) * x.s,
        v: p.vaccination_rate * x.s - lambda * force * x.v - p.natural_death * x.v,
        e: infection - (p.progression + p.natural_death) * x.e,
        i: p.progression * x.e + lambda * force * x.v - (p.natural_death + p.disease_death + recovered + treated) * x.i,
        r: recovered * x.i - p.natural_death * x.r,
        t: treated * x.i - p.natural_death * x.t,
    }
}

/// Disease-free equilibrium `(Λ/(μ+φ), φΛ/(μ(μ+φ)), 0, 0, 0, 0)`.
pub fn disease_free_equilibrium(p: &ParameterSet) -> Result<StateVector> {
    let mu = p.natural_death;
    if mu <= 0.0 {
        return Err(Error::Degenerate("disease-free equilibrium needs mu > 0".into()));
    }
    let s0 = p.recruitment / (mu + p.vaccination_rate);
    let v0 = p.vaccination_rate * s0 / mu;
    Ok(StateVector::new(s0, v0, 0.0, 0.0, 0.0, 0.0))
}

/// Endemic equilibrium, if one with E*, I* > 0 exists.
///
/// The fixed-point relations are reduced to a single unknown, the force of
/// infection `B = β1E + β2I`. Given `B` every compartment is explicit:
///
/// ```text
/// S = Λ/(B+μ+φ)   V = φS/(λB+μ)   E = BS/(α+μ)   I = (αE + λBV)/(μ+δ+γ+γ1)
/// ```
///
/// and consistency requires `F(B) = (β1E + β2I)/B = 1`. `F` is strictly
/// decreasing on `B ≥ 0` and tends to zero, so a positive root exists iff
/// `F(0) > 1`, and it is unique. The root is found by bisection-safeguarded
/// Newton and the resulting state is certified against `base_rhs`.
pub fn endemic_equilibrium(p: &ParameterSet) -> Result<Option<StateVector>> {
    p.validate()?;
    let mu = p.natural_death;
    let a1 = p.exposed_exit_rate();
    let k = p.infected_exit_rate();
    let lambda = p.vaccine_inefficiency();
    let (b1, b2) = (p.contact_exposed, p.contact_infected);
    let phi = p.vaccination_rate;
    let rec = p.recruitment;
    if rec <= 0.0 || (b1 == 0.0 && b2 == 0.0) {
        return Ok(None);
    }
    // F(B) = S(B)·c_s + V(B)·c_v
    let c_s = b1 / a1 + b2 * p.progression / (a1 * k);
    let c_v = b2 * lambda / k;
    let ratio = |force: f64| -> (f64, f64) {
        let d = force + mu + phi;
        let s = rec / d;
        let ds = -s / d;
        let dv_den = lambda * force + mu;
        let v = phi * s / dv_den;
        let dv = phi * ds / dv_den - phi * s * lambda / (dv_den * dv_den);
        (s * c_s + v * c_v - 1.0, ds * c_s + dv * c_v)
    };

    let (g0, _) = ratio(0.0);
    if g0 <= 0.0 {
        return Ok(None);
    }
    let mut lo = 0.0;
    let mut hi = 1.0_f64.max(g0);
    while ratio(hi).0 > 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Degenerate("could not bracket the endemic force of infection".into()));
        }
    }
    let mut force = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (g, dg) = ratio(force);
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            lo = force;
        } else {
            hi = force;
        }
        let newton = force - g / dg;
        force = if dg < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (hi - lo) <= 1e-15 * hi || g.abs() <= 1e-15 {
            break;
        }
    }

    let s = rec / (force + mu + phi);
    let v = phi * s / (lambda * force + mu);
    let e = force * s / a1;
    let i = (p.progression * e + lambda * force * v) / k;
    let state = StateVector::new(s, v, e, i, p.recovery * i / mu, p.treatment * i / mu);
    if !(state.e > 0.0 && state.i > 0.0) {
        return Ok(None);
    }
    let residual = base_rhs(&state, p).max_abs();
    let bound = 1e-8 * rec;
    if residual >= bound {
        return Err(Error::UncertifiedEquilibrium { residual, bound });
    }
    Ok(Some(state))
}

/// Basic reproduction number without control,
/// `S0[αβ2 + β1(γ+γ1+μ+δ)] / ((α+μ)(γ+γ1+δ+μ))` with `S0 = Λ/(μ+φ)`.
pub fn r0_without_control(p: &ParameterSet) -> Result<f64> {
    let a2 = p.natural_death + p.vaccination_rate;
    let a1 = p.exposed_exit_rate();
    let k = p.infected_exit_rate();
    if a2 <= 0.0 || a1 <= 0.0 || k <= 0.0 {
        return Err(Error::Degenerate("R0 denominators must be positive".into()));
    }
    let s0 = p.recruitment / a2;
    Ok(s0 * (p.progression * p.contact_infected + p.contact_exposed * k) / (a1 * k))
}

/// Reproduction number associated with vaccination for total population `n`.
///
/// With `n = Λ/μ` the first summand equals [`r0_without_control`] and the
/// sum is exactly the threshold `F(0)` that decides whether an endemic
/// equilibrium exists (see [`endemic_equilibrium`]).
pub fn r0_with_control(p: &ParameterSet, n: f64) -> Result<f64> {
    let mu = p.natural_death;
    let a2 = mu + p.vaccination_rate;
    let a1 = p.exposed_exit_rate();
    let k = p.infected_exit_rate();
    if a2 <= 0.0 || a1 <= 0.0 || k <= 0.0 {
        return Err(Error::Degenerate("R0V denominators must be positive".into()));
    }
    if !(n > 0.0) {
        return Err(Error::InvalidArgument(format!("population N = {n} must be positive")));
    }
    let lambda = p.vaccine_inefficiency();
    let first = mu * n * (p.progression * p.contact_infected + p.contact_exposed * k) / (a2 * a1 * k);
    let second = n * p.vaccination_rate * p.contact_infected * lambda / (a2 * k);
    Ok(first + second)
}

/// Normalized sensitivity index `(∂R0/∂P)(P/R0)` of [`r0_without_control`],
/// from the analytic derivative.
pub fn local_sensitivity_index(p: &ParameterSet, which: Param) -> Result<f64> {
    let r0 = r0_without_control(p)?;
    if r0 == 0.0 {
        return Err(Error::Degenerate("sensitivity index undefined at R0 = 0".into()));
    }
    let mu = p.natural_death;
    let phi = p.vaccination_rate;
    let alpha = p.progression;
    let (b1, b2) = (p.contact_exposed, p.contact_infected);
    let a1 = p.exposed_exit_rate();
    let k = p.infected_exit_rate();
    // R0 = S0·Q with Q = β1/a1 + αβ2/(a1·k)
    let q = b1 / a1 + alpha * b2 / (a1 * k);
    let dq_dk = -alpha * b2 / (a1 * k * k);
    let index = match which {
        Param::Recruitment => 1.0,
        Param::ContactExposed => (b1 / a1) / q,
        Param::ContactInfected => (alpha * b2 / (a1 * k)) / q,
        Param::VaccinationRate => -phi / (mu + phi),
        Param::Progression => {
            let dq = -b1 / (a1 * a1) + b2 * mu / (a1 * a1 * k);
            alpha * dq / q
        }
        Param::Recovery => p.recovery * dq_dk / q,
        Param::Treatment => p.treatment * dq_dk / q,
        Param::DiseaseDeath => p.disease_death * dq_dk / q,
        Param::NaturalDeath => {
            let dq = -b1 / (a1 * a1) - alpha * b2 * (k + a1) / (a1 * a1 * k * k);
            -mu / (mu + phi) + mu * dq / q
        }
        Param::VaccineEfficacy | Param::VaccineInefficiency => 0.0,
    };
    Ok(index)
}
