//! Model definition: hyperparameters, the full MCMC state, and the exact
//! log-density formulas for the hierarchical (HM), restricted hierarchical
//! (RHM), and pooled nonhierarchical (NHM) models.
//!
//! Every sampler kernel and every oracle test evaluates against the functions
//! in this module; nothing else defines the target density.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::types::Dataset;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Hierarchical model: condition-level coefficients, per ordered pair.
    Hm,
    /// Restricted HM: one inclusion probability per unordered pair.
    Rhm,
    /// Pooled nonhierarchical model: condition-free coefficients.
    Nhm,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hm" => Some(ModelKind::Hm),
            "rhm" => Some(ModelKind::Rhm),
            "nhm" => Some(ModelKind::Nhm),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Hm => "hm",
            ModelKind::Rhm => "rhm",
            ModelKind::Nhm => "nhm",
        }
    }

    /// Whether the model carries the slab-mean/slab-sd hierarchy.
    pub fn hierarchical(&self) -> bool {
        !matches!(self, ModelKind::Nhm)
    }
}

/// Prior hyperparameters.
///
/// Gamma priors are shape-rate (mean = shape/rate). `tau` is a variance-like
/// scale by default (slab-mean prior sd = sqrt(tau)); set `tau_is_sd` to read
/// it as a standard deviation instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub beta1: f64,
    pub beta2: f64,
    /// (gamma1, gamma2): prior for intrinsic precisions.
    pub gamma_intrinsic: (f64, f64),
    /// (gamma3, gamma4): prior for slab precisions.
    pub gamma_slab: (f64, f64),
    /// (gamma5, gamma6): prior for the measurement precision.
    pub gamma_meas: (f64, f64),
    /// Slab-mean prior mean, per protein.
    pub a: Vec<f64>,
    /// Slab-mean prior scale, per protein.
    pub tau: Vec<f64>,
    pub tau_is_sd: bool,
    /// Shared beta concentration for the condition-level probabilities.
    pub v: f64,
    pub intercept_prior_sd: f64,
}

impl Hyperparameters {
    /// Weakly informative defaults: beta = gamma = 1, a = 0, tau = 1000, v = 0.1.
    pub fn defaults(n_proteins: usize) -> Self {
        Hyperparameters {
            beta1: 1.0,
            beta2: 1.0,
            gamma_intrinsic: (1.0, 1.0),
            gamma_slab: (1.0, 1.0),
            gamma_meas: (1.0, 1.0),
            a: vec![0.0; n_proteins],
            tau: vec![1000.0; n_proteins],
            tau_is_sd: false,
            v: 0.1,
            intercept_prior_sd: 1000f64.sqrt(),
        }
    }

    /// Slab-mean prior variance for protein `i`.
    pub fn tau_var(&self, i: usize) -> f64 {
        if self.tau_is_sd {
            self.tau[i] * self.tau[i]
        } else {
            self.tau[i]
        }
    }

    pub fn validate(&self, n_proteins: usize) -> Result<()> {
        let pos = [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("gamma1", self.gamma_intrinsic.0),
            ("gamma2", self.gamma_intrinsic.1),
            ("gamma3", self.gamma_slab.0),
            ("gamma4", self.gamma_slab.1),
            ("gamma5", self.gamma_meas.0),
            ("gamma6", self.gamma_meas.1),
            ("v", self.v),
            ("intercept_prior_sd", self.intercept_prior_sd),
        ];
        for (name, x) in pos {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::validation(format!("hyperparameter {name} must be positive")));
            }
        }
        if self.a.len() != n_proteins || self.tau.len() != n_proteins {
            return Err(Error::validation("a and tau must have one entry per protein"));
        }
        if self.tau.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::validation("tau entries must be positive"));
        }
        if self.a.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("a entries must be finite"));
        }
        Ok(())
    }
}

/// All latent quantities of one MCMC chain.
///
/// Coefficient tensors have shape (Kc, P, P) where `Kc` is the number of
/// conditions for HM/RHM and 1 for NHM; entry (k, i, j) is the coefficient of
/// protein j in the regression for protein i. Excluded coefficients are
/// exactly zero. Under RHM one inclusion probability is stored per unordered
/// pair (canonical slot (min, max)); read it through [`ChainState::w_of`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub model: ModelKind,
    pub varying_intrinsic: bool,
    /// Regression intercepts, shape (Kc, P).
    pub intercept: Array2<f64>,
    /// Regression coefficients, shape (Kc, P, P); diagonal unused.
    pub coeff: Array3<f64>,
    /// Inclusion indicators; `incl == false` iff the coefficient is exactly 0.
    pub incl: Array3<bool>,
    /// Overall inclusion probabilities, shape (P, P).
    pub w: Array2<f64>,
    /// Slab means (HM/RHM), shape (P, P).
    pub slab_mean: Array2<f64>,
    /// Slab precisions (HM/RHM), shape (P, P).
    pub slab_prec: Array2<f64>,
    /// Intrinsic precisions, shape (K, P) when `varying_intrinsic`, else (1, P).
    pub intrinsic_prec: Array2<f64>,
    /// Measurement precision, shared across proteins.
    pub meas_prec: f64,
    /// Latent true activities, one (N_k, P) matrix per condition.
    pub latent: Vec<Array2<f64>>,
}

impl ChainState {
    /// Dispersed-but-stable start: latent truths at the observed values, all
    /// indicators off, w at its prior mean, unit precisions, intercepts at the
    /// per-block response means.
    pub fn init(data: &Dataset, hp: &Hyperparameters, model: ModelKind, varying: bool) -> Self {
        let p = data.n_proteins();
        let k = data.n_conditions();
        let kc = if model == ModelKind::Nhm { 1 } else { k };
        let kv = if varying { k } else { 1 };
        let w0 = hp.beta1 / (hp.beta1 + hp.beta2);

        let mut intercept = Array2::zeros((kc, p));
        if model == ModelKind::Nhm {
            let total = data.total_cells() as f64;
            for i in 0..p {
                let s: f64 = data.blocks.iter().map(|b| b.column(i).sum()).sum();
                intercept[[0, i]] = s / total;
            }
        } else {
            for kk in 0..k {
                let n = data.n_cells(kk) as f64;
                for i in 0..p {
                    intercept[[kk, i]] = data.blocks[kk].column(i).sum() / n;
                }
            }
        }

        ChainState {
            model,
            varying_intrinsic: varying,
            intercept,
            coeff: Array3::zeros((kc, p, p)),
            incl: Array3::from_elem((kc, p, p), false),
            w: Array2::from_elem((p, p), w0),
            slab_mean: Array2::zeros((p, p)),
            slab_prec: Array2::ones((p, p)),
            intrinsic_prec: Array2::ones((kv, p)),
            meas_prec: 1.0,
            latent: data.blocks.clone(),
        }
    }

    pub fn n_proteins(&self) -> usize {
        self.w.nrows()
    }

    /// Number of coefficient slots along the condition axis (K, or 1 for NHM).
    pub fn n_cond_slots(&self) -> usize {
        self.coeff.shape()[0]
    }

    /// Condition slot holding the coefficients used in condition `k`.
    pub fn cond_slot(&self, k: usize) -> usize {
        if self.model == ModelKind::Nhm {
            0
        } else {
            k
        }
    }

    /// Overall inclusion probability for the ordered pair (i, j). Under RHM
    /// both orderings read the single canonical slot.
    pub fn w_of(&self, i: usize, j: usize) -> f64 {
        match self.model {
            ModelKind::Rhm => self.w[[i.min(j), i.max(j)]],
            _ => self.w[[i, j]],
        }
    }

    pub fn set_w(&mut self, i: usize, j: usize, value: f64) {
        match self.model {
            ModelKind::Rhm => self.w[[i.min(j), i.max(j)]] = value,
            _ => self.w[[i, j]] = value,
        }
    }

    /// Intrinsic precision of protein `i` under condition `k`.
    pub fn intrinsic_prec_of(&self, i: usize, k: usize) -> f64 {
        if self.varying_intrinsic {
            self.intrinsic_prec[[k, i]]
        } else {
            self.intrinsic_prec[[0, i]]
        }
    }

    pub fn check_shapes(&self, data: &Dataset) -> Result<()> {
        let p = data.n_proteins();
        let k = data.n_conditions();
        let kc = if self.model == ModelKind::Nhm { 1 } else { k };
        let kv = if self.varying_intrinsic { k } else { 1 };
        if self.coeff.shape() != [kc, p, p]
            || self.incl.shape() != [kc, p, p]
            || self.intercept.shape() != [kc, p]
            || self.w.shape() != [p, p]
            || self.intrinsic_prec.shape() != [kv, p]
            || self.latent.len() != k
        {
            return Err(Error::validation("state dimensions do not match the dataset"));
        }
        for (kk, l) in self.latent.iter().enumerate() {
            if l.dim() != data.blocks[kk].dim() {
                return Err(Error::validation(format!(
                    "latent block {kk} shape does not match the data"
                )));
            }
        }
        Ok(())
    }
}

/// log N(x | mean, var).
pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// log Gamma(x | shape, rate), shape-rate parameterization.
pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// log Beta(x | a, b).
pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}

/// Structural mean of protein `i` for cell `n` in condition `k`, evaluated at
/// the current latent truths.
pub fn structural_mean(state: &ChainState, k: usize, n: usize, i: usize) -> f64 {
    let kc = state.cond_slot(k);
    let latent = &state.latent[k];
    let mut m = state.intercept[[kc, i]];
    for j in 0..state.n_proteins() {
        if j != i {
            let c = state.coeff[[kc, i, j]];
            if c != 0.0 {
                m += c * latent[[n, j]];
            }
        }
    }
    m
}

/// Log-likelihood contribution of protein `i` in condition `k`: the structural
/// equation over all cells plus the measurement layer for that protein.
pub fn log_likelihood_block(
    state: &ChainState,
    data: &Dataset,
    protein: usize,
    condition: usize,
) -> Result<f64> {
    state.check_shapes(data)?;
    let i = protein;
    let k = condition;
    if i >= data.n_proteins() || k >= data.n_conditions() {
        return Err(Error::validation("protein or condition index out of range"));
    }
    let var_i = 1.0 / state.intrinsic_prec_of(i, k);
    let var_m = 1.0 / state.meas_prec;
    let block = &data.blocks[k];
    let latent = &state.latent[k];
    let mut total = 0.0;
    for n in 0..block.nrows() {
        let m = structural_mean(state, k, n, i);
        total += ln_normal(latent[[n, i]], m, var_i);
        total += ln_normal(block[[n, i]], latent[[n, i]], var_m);
    }
    if !total.is_finite() {
        return Err(Error::numerical("non-finite log-likelihood"));
    }
    Ok(total)
}

/// Joint log prior with the condition-level probabilities analytically
/// integrated out. Includes the spike-and-slab terms, the Beta prior on the
/// overall probabilities, the slab hyperpriors, the Gamma precision priors,
/// and the intercept priors.
pub fn log_prior(state: &ChainState, hp: &Hyperparameters) -> Result<f64> {
    let p = state.n_proteins();
    hp.validate(p)?;
    let mut lp = 0.0;

    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let w = state.w_of(i, j);
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::validation(format!("w[{i},{j}] = {w} outside (0,1)")));
            }
            match state.model {
                ModelKind::Hm | ModelKind::Rhm => {
                    let slab_var = 1.0 / state.slab_prec[[i, j]];
                    for kc in 0..state.n_cond_slots() {
                        if state.incl[[kc, i, j]] {
                            lp += w.ln()
                                + ln_normal(state.coeff[[kc, i, j]], state.slab_mean[[i, j]], slab_var);
                        } else {
                            lp += (1.0 - w).ln();
                        }
                    }
                    // slab hyperpriors, per ordered pair
                    lp += ln_normal(state.slab_mean[[i, j]], hp.a[i], hp.tau_var(i));
                    lp += ln_gamma_pdf(state.slab_prec[[i, j]], hp.gamma_slab.0, hp.gamma_slab.1);
                }
                ModelKind::Nhm => {
                    if state.incl[[0, i, j]] {
                        lp += w.ln() + ln_normal(state.coeff[[0, i, j]], hp.a[i], hp.tau_var(i));
                    } else {
                        lp += (1.0 - w).ln();
                    }
                }
            }
        }
    }

    // Beta prior on the overall probabilities: per ordered pair for HM/NHM,
    // once per unordered pair for RHM (single storage slot).
    for i in 0..p {
        for j in 0..p {
            if i == j || (state.model == ModelKind::Rhm && i > j) {
                continue;
            }
            lp += ln_beta_pdf(state.w_of(i, j), hp.beta1, hp.beta2);
        }
    }

    for row in state.intrinsic_prec.rows() {
        for &prec in row {
            if prec.is_nan() || prec <= 0.0 {
                return Err(Error::validation("non-positive intrinsic precision"));
            }
            lp += ln_gamma_pdf(prec, hp.gamma_intrinsic.0, hp.gamma_intrinsic.1);
        }
    }
    if state.meas_prec.is_nan() || state.meas_prec <= 0.0 {
        return Err(Error::validation("non-positive measurement precision"));
    }
    lp += ln_gamma_pdf(state.meas_prec, hp.gamma_meas.0, hp.gamma_meas.1);

    let s0_var = hp.intercept_prior_sd * hp.intercept_prior_sd;
    for &a0 in state.intercept.iter() {
        lp += ln_normal(a0, 0.0, s0_var);
    }

    if !lp.is_finite() {
        return Err(Error::numerical("non-finite log prior"));
    }
    Ok(lp)
}

/// Full joint log density (up to the spike point masses, which contribute
/// probability, not density): prior plus every likelihood block.
pub fn log_joint(state: &ChainState, data: &Dataset, hp: &Hyperparameters) -> Result<f64> {
    let mut total = log_prior(state, hp)?;
    for k in 0..data.n_conditions() {
        for i in 0..data.n_proteins() {
            total += log_likelihood_block(state, data, i, k)?;
        }
    }
    Ok(total)
}

/// Parameters of the conditional Beta posterior for a condition-level
/// probability given the overall probability and one inclusion indicator.
pub fn wcond_posterior_params(w_ij: f64, v: f64, included: bool) -> (f64, f64) {
    debug_assert!(w_ij > 0.0 && w_ij < 1.0 && v > 0.0);
    let (z1, z0) = if included { (1.0, 0.0) } else { (0.0, 1.0) };
    (w_ij * v + z1, (1.0 - w_ij) * v + z0)
}
