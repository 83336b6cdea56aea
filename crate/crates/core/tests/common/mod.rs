#![allow(dead_code)]

use std::io::Write;

use epk_core::model::ParameterSet;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng;

/// Writes a verdict line straight to the process stderr so it shows up in
/// the test log whether or not the harness captures output, then asserts.
pub fn verdict(name: &str, pass: bool, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("representable")
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Exact rational versions of the reproduction-number formulas, built from
/// the binary values of the inputs.
pub struct RationalParams {
    pub rec: BigRational,
    pub b1: BigRational,
    pub b2: BigRational,
    pub phi: BigRational,
    pub alpha: BigRational,
    pub gamma: BigRational,
    pub gamma1: BigRational,
    pub mu: BigRational,
    pub delta: BigRational,
    pub lambda: BigRational,
}

impl RationalParams {
    pub fn new(p: &ParameterSet) -> Self {
        Self {
            rec: exact(p.recruitment),
            b1: exact(p.contact_exposed),
            b2: exact(p.contact_infected),
            phi: exact(p.vaccination_rate),
            alpha: exact(p.progression),
            gamma: exact(p.recovery),
            gamma1: exact(p.treatment),
            mu: exact(p.natural_death),
            delta: exact(p.disease_death),
            lambda: BigRational::one() - exact(p.vaccine_efficacy),
        }
    }

    fn k(&self) -> BigRational {
        &self.gamma + &self.gamma1 + &self.mu + &self.delta
    }

    pub fn r0(&self) -> BigRational {
        let s0 = &self.rec / (&self.mu + &self.phi);
        let k = self.k();
        s0 * (&self.alpha * &self.b2 + &self.b1 * &k) / ((&self.alpha + &self.mu) * &k)
    }

    pub fn r0v(&self, n: &BigRational) -> BigRational {
        let k = self.k();
        let a2 = &self.mu + &self.phi;
        let first = &self.mu * n * (&self.alpha * &self.b2 + &self.b1 * &k) / (&a2 * (&self.alpha + &self.mu) * &k);
        let second = n * &self.phi * &self.b2 * &self.lambda / (&a2 * &k);
        first + second
    }

    pub fn growth_r0(&self, r: &BigRational) -> BigRational {
        let k = self.k();
        let den = (&self.mu + &self.phi) * (&self.alpha + &self.mu) * &k;
        let first = &self.rec * &self.alpha * &self.b2 / &den;
        let second =
            &self.alpha * &self.mu * (r + &self.alpha + &self.mu - &self.b1 * &self.rec / &self.mu) * (r + &k) / &den;
        first + second
    }
}

/// Adaptive Simpson quadrature with Richardson correction, started on unit
/// pieces so narrow features cannot slip between the first samples.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let pieces = (b - a).ceil().max(1.0) as usize;
    let w = (b - a) / pieces as f64;
    (0..pieces).map(|k| simpson_piece(f, a + k as f64 * w, a + (k + 1) as f64 * w, tol / pieces as f64)).sum()
}

fn simpson_piece<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Composite Simpson on an odd number of equally spaced samples.
pub fn composite_simpson(samples: &[f64], h: f64) -> f64 {
    let n = samples.len() - 1;
    assert!(n.is_multiple_of(2), "need an even number of intervals");
    let mut s = samples[0] + samples[n];
    for (i, v) in samples.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// A random, valid parameter set covering a wide range of dynamics.
pub fn random_params<R: Rng>(rng: &mut R) -> ParameterSet {
    ParameterSet {
        recruitment: rng.gen_range(50.0..2000.0),
        contact_exposed: rng.gen_range(1e-6..1e-2),
        contact_infected: rng.gen_range(1e-6..1e-2),
        vaccination_rate: rng.gen_range(0.01..0.5),
        progression: rng.gen_range(0.1..1.5),
        recovery: rng.gen_range(0.05..1.0),
        treatment: rng.gen_range(0.01..0.5),
        natural_death: rng.gen_range(0.005..0.1),
        disease_death: rng.gen_range(0.0..0.5),
        vaccine_efficacy: rng.gen_range(0.0..1.0),
    }
}

/// Pearson correlation computed the textbook way, two passes.
pub fn pearson_two_pass(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Ranks 1..n; ties get their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}
