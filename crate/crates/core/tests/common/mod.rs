//! Shared helpers for the integration test suites: small synthetic datasets,
//! warmed Gibbs states, and grid oracles that compare a claimed conditional
//! density against the brute-force normalization of `model::log_joint`.

#![allow(dead_code)]

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use signet::model::{ln_beta_pdf, ln_gamma_pdf, ln_normal, ChainState, Hyperparameters, ModelKind};
use signet::sampler::kernels::{sweep, SweepOptions};
use signet::types::{Condition, Dataset, InterventionDesign, ProteinPanel};

pub fn dataset(p: usize, ns: &[usize], seed: u64) -> Dataset {
    let names = (0..p).map(|i| format!("p{i}")).collect();
    let panel = ProteinPanel::new(names).unwrap();
    let conds = (0..ns.len())
        .map(|k| Condition::general(format!("c{k}")))
        .collect();
    let design = InterventionDesign::new(conds, p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = ns
        .iter()
        .map(|&n| {
            Array2::from_shape_fn((n, p), |_| {
                use rand_distr::Distribution;
                rand_distr::Normal::new(0.0, 1.0).unwrap().sample(&mut rng)
            })
        })
        .collect();
    Dataset::new(panel, design, blocks).unwrap()
}

/// A state in the typical set: a few warm-up sweeps from the deterministic
/// start, so precisions, coefficients, and latent truths are all generic.
pub fn warmed_state(
    data: &Dataset,
    hp: &Hyperparameters,
    model: ModelKind,
    varying: bool,
    seed: u64,
) -> ChainState {
    let mut state = ChainState::init(data, hp, model, varying);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        sweep(&mut state, data, hp, &SweepOptions::default(), &mut rng).unwrap();
    }
    state
}

/// Simpson integration of exp(lj - shift) over a uniform grid of `m + 1`
/// log-density values with spacing `h`.
pub fn simpson(lj: &[f64], h: f64, shift: f64) -> f64 {
    let m = lj.len() - 1;
    assert!(m >= 2 && m.is_multiple_of(2));
    let mut z = 0.0;
    for (idx, &l) in lj.iter().enumerate() {
        let w = if idx == 0 || idx == m {
            1.0
        } else if idx % 2 == 1 {
            4.0
        } else {
            2.0
        };
        z += w * (l - shift).exp();
    }
    z * h / 3.0
}

/// Checks that the normalized restriction of the joint density along one
/// scalar coordinate equals N(mean, var). `eval(t)` must set the coordinate
/// to `t` and return `log_joint`.
pub fn check_gaussian(mean: f64, var: f64, mut eval: impl FnMut(f64) -> f64, label: &str) {
    let sd = var.sqrt();
    let (lo, hi) = (mean - 8.0 * sd, mean + 8.0 * sd);
    let m = 2000usize;
    let h = (hi - lo) / m as f64;
    let lj: Vec<f64> = (0..=m).map(|idx| eval(lo + idx as f64 * h)).collect();
    let shift = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = simpson(&lj, h, shift);
    let peak = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let tol = 1e-8 * peak.max(1.0);
    for idx in (0..=m).step_by(25) {
        let t = lo + idx as f64 * h;
        let grid_density = (lj[idx] - shift).exp() / z;
        let analytic = ln_normal(t, mean, var).exp();
        assert!(
            (grid_density - analytic).abs() <= tol,
            "{label}: density mismatch at t = {t}: grid {grid_density} vs analytic {analytic}"
        );
    }
}

/// Same check for a Gamma(shape, rate) conditional on a positive coordinate.
pub fn check_gamma(shape: f64, rate: f64, mut eval: impl FnMut(f64) -> f64, label: &str) {
    assert!(shape >= 1.5, "{label}: grid oracle needs a smooth density at 0");
    let mean = shape / rate;
    let sd = shape.sqrt() / rate;
    let lo = (mean - 14.0 * sd).max(1e-12);
    let hi = mean + 20.0 * sd;
    // fine grid: the x^(shape-1) factor limits Simpson's order near zero
    let m = 20_000usize;
    let h = (hi - lo) / m as f64;
    let lj: Vec<f64> = (0..=m).map(|idx| eval(lo + idx as f64 * h)).collect();
    let shift = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = simpson(&lj, h, shift);
    let peak = ln_gamma_pdf((shape - 1.0) / rate, shape, rate).exp();
    let tol = 1e-8 * peak.max(1.0);
    for idx in (0..=m).step_by(50) {
        let t = lo + idx as f64 * h;
        let grid_density = (lj[idx] - shift).exp() / z;
        let analytic = ln_gamma_pdf(t, shape, rate).exp();
        assert!(
            (grid_density - analytic).abs() <= tol,
            "{label}: density mismatch at t = {t}: grid {grid_density} vs analytic {analytic}"
        );
    }
}

/// Same check for a Beta(a, b) conditional on a (0,1) coordinate. Requires
/// a, b >= 2 so the density vanishes at both endpoints and the truncated
/// grid loses no mass.
pub fn check_beta(a: f64, b: f64, mut eval: impl FnMut(f64) -> f64, label: &str) {
    assert!(a >= 2.0 && b >= 2.0, "{label}: oracle needs interior mass");
    let eps = 1e-9;
    let (lo, hi) = (eps, 1.0 - eps);
    let m = 4000usize;
    let h = (hi - lo) / m as f64;
    let lj: Vec<f64> = (0..=m).map(|idx| eval(lo + idx as f64 * h)).collect();
    let shift = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = simpson(&lj, h, shift);
    for idx in (0..=m).step_by(50) {
        let t = lo + idx as f64 * h;
        let grid_density = (lj[idx] - shift).exp() / z;
        let analytic = ln_beta_pdf(t, a, b).exp();
        assert!(
            (grid_density - analytic).abs() <= 1e-8 * analytic.max(1.0),
            "{label}: density mismatch at t = {t}: grid {grid_density} vs analytic {analytic}"
        );
    }
}
