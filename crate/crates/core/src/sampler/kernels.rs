//! Gibbs full-conditional kernels.
//!
//! Each kernel is split into a `*_conditional` function that returns the
//! parameters of the exact full-conditional distribution and an `update_*`
//! function that draws from it and mutates the state. The conditionals are
//! what the oracle tests check against grid normalizations of
//! [`crate::model::log_joint`].

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::model::{ChainState, Hyperparameters, ModelKind};
use crate::types::Dataset;

/// Cached structural fits f[k][[n, i]] = intercept + sum_j coeff * latent_j.
/// Recomputed at the top of every sweep and maintained incrementally by the
/// update kernels so each kernel sees residuals in O(N).
pub struct Fitted {
    pub f: Vec<Array2<f64>>,
}

impl Fitted {
    pub fn compute(state: &ChainState, data: &Dataset) -> Fitted {
        // f[k] = latent * coeff^T + intercept; the coefficient diagonal is
        // never written, so the product already excludes the self term
        let f = (0..data.n_conditions())
            .map(|k| {
                let kc = state.cond_slot(k);
                let coeff = state.coeff.index_axis(Axis(0), kc);
                let mut out = state.latent[k].dot(&coeff.t());
                out += &state.intercept.row(kc);
                out
            })
            .collect();
        Fitted { f }
    }
}

/// Conditions whose coefficients live in slot `kc` of the coefficient tensor.
fn blocks_of_slot(state: &ChainState, data: &Dataset, kc: usize) -> std::ops::Range<usize> {
    if state.model == ModelKind::Nhm {
        0..data.n_conditions()
    } else {
        kc..kc + 1
    }
}

/// Exact full conditional of one (indicator, coefficient) pair.
#[derive(Debug, Clone, Copy)]
pub struct CoeffConditional {
    pub include_prob: f64,
    /// Slab posterior mean and variance given inclusion.
    pub mean: f64,
    pub var: f64,
}

/// Shared tail of the coefficient conditional: turns the accumulated
/// precision-weighted sums into the inclusion probability and slab posterior.
fn coeff_conditional_from_sums(
    quad: f64,
    lin: f64,
    m0: f64,
    v0: f64,
    w: f64,
    context: &dyn Fn() -> String,
) -> Result<CoeffConditional> {
    let post_prec = quad + 1.0 / v0;
    if !(post_prec.is_finite() && post_prec > 0.0) {
        return Err(Error::numerical(format!(
            "non-finite conditional precision for coefficient {}",
            context()
        )));
    }
    let mean = (lin + m0 / v0) / post_prec;
    // log Bayes factor of inclusion vs the point mass at zero
    let log_bf = -0.5 * (v0 * post_prec).ln() + 0.5 * (mean * mean * post_prec - m0 * m0 / v0);
    let logit = (w / (1.0 - w)).ln() + log_bf;
    // logistic in log space; saturates cleanly for large |logit|
    let include_prob = if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    };
    Ok(CoeffConditional {
        include_prob,
        mean,
        var: 1.0 / post_prec,
    })
}

pub fn coefficient_conditional(
    state: &ChainState,
    fitted: &Fitted,
    data: &Dataset,
    hp: &Hyperparameters,
    i: usize,
    j: usize,
    kc: usize,
) -> Result<CoeffConditional> {
    debug_assert_ne!(i, j);
    let (m0, v0) = match state.model {
        ModelKind::Hm | ModelKind::Rhm => {
            (state.slab_mean[[i, j]], 1.0 / state.slab_prec[[i, j]])
        }
        ModelKind::Nhm => (hp.a[i], hp.tau_var(i)),
    };
    let cur = state.coeff[[kc, i, j]];

    let mut quad = 0.0; // sum of prec * x_j^2
    let mut lin = 0.0; // sum of prec * r * x_j
    for k in blocks_of_slot(state, data, kc) {
        let prec = state.intrinsic_prec_of(i, k);
        let latent = &state.latent[k];
        let mut q = 0.0;
        let mut l = 0.0;
        Zip::from(latent.column(j))
            .and(latent.column(i))
            .and(fitted.f[k].column(i))
            .for_each(|&xj, &xi, &fi| {
                let r = xi - (fi - cur * xj);
                q += xj * xj;
                l += r * xj;
            });
        quad += prec * q;
        lin += prec * l;
    }

    coeff_conditional_from_sums(quad, lin, m0, v0, state.w_of(i, j), &|| {
        format!("({i},{j},{kc})")
    })
}

/// Jointly resamples (z, alpha) for one pair and condition slot, keeping the
/// fitted cache consistent.
#[allow(clippy::too_many_arguments)]
pub fn update_coefficient_pair(
    state: &mut ChainState,
    fitted: &mut Fitted,
    data: &Dataset,
    hp: &Hyperparameters,
    i: usize,
    j: usize,
    kc: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let cond = coefficient_conditional(state, fitted, data, hp, i, j, kc)?;
    let include = rng.random::<f64>() < cond.include_prob;
    let new = if include {
        Normal::new(cond.mean, cond.var.sqrt())
            .map_err(|e| Error::numerical(e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    let old = state.coeff[[kc, i, j]];
    state.coeff[[kc, i, j]] = new;
    state.incl[[kc, i, j]] = include;
    let delta = new - old;
    if delta != 0.0 {
        for k in blocks_of_slot(state, data, kc) {
            Zip::from(fitted.f[k].column_mut(i))
                .and(state.latent[k].column(j))
                .for_each(|fi, &xj| *fi += delta * xj);
        }
    }
    Ok(())
}

/// Resamples every (indicator, coefficient) pair of equation `i` in slot `kc`
/// in one pass. Uses per-block Gram matrices `gram[k] = latent_k^T latent_k`
/// so each pair costs O(P) instead of a rescan of all cells; draw-for-draw it
/// targets the same full conditionals as `update_coefficient_pair` over
/// j = 0..P in order.
#[allow(clippy::too_many_arguments)]
pub fn update_coefficient_row(
    state: &mut ChainState,
    fitted: &mut Fitted,
    data: &Dataset,
    hp: &Hyperparameters,
    i: usize,
    kc: usize,
    gram: &[Array2<f64>],
    support: Option<&Array2<bool>>,
    rng: &mut impl Rng,
) -> Result<()> {
    let p = state.n_proteins();
    // a = sum over blocks of intrinsic precision times the Gram matrix;
    // v[j] = precision-weighted sum over cells of x_j * (x_i - f_i)
    let mut a = Array2::<f64>::zeros((p, p));
    let mut v = Array1::<f64>::zeros(p);
    for k in blocks_of_slot(state, data, kc) {
        let prec = state.intrinsic_prec_of(i, k);
        a.scaled_add(prec, &gram[k]);
        let mut r = state.latent[k].column(i).to_owned();
        r -= &fitted.f[k].column(i);
        v.scaled_add(prec, &state.latent[k].t().dot(&r));
    }

    let mut changed = false;
    for j in 0..p {
        if j == i || !allowed(support, i, j) {
            continue;
        }
        let (m0, v0) = match state.model {
            ModelKind::Hm | ModelKind::Rhm => {
                (state.slab_mean[[i, j]], 1.0 / state.slab_prec[[i, j]])
            }
            ModelKind::Nhm => (hp.a[i], hp.tau_var(i)),
        };
        let cur = state.coeff[[kc, i, j]];
        let quad = a[[j, j]];
        // v excludes nothing, so add back the current coefficient's own term
        let lin = v[j] + cur * quad;
        let cond = coeff_conditional_from_sums(quad, lin, m0, v0, state.w_of(i, j), &|| {
            format!("({i},{j},{kc})")
        })?;
        let include = rng.random::<f64>() < cond.include_prob;
        let new = if include {
            Normal::new(cond.mean, cond.var.sqrt())
                .map_err(|e| Error::numerical(e.to_string()))?
                .sample(rng)
        } else {
            0.0
        };
        state.coeff[[kc, i, j]] = new;
        state.incl[[kc, i, j]] = include;
        let delta = new - cur;
        if delta != 0.0 {
            changed = true;
            // residuals shrink by delta * x_j, so v shifts by -delta * A[:, j]
            v.scaled_add(-delta, &a.column(j));
        }
    }

    if changed {
        // refresh the fitted column of equation i from the updated row
        let coeffs = state.coeff.index_axis(Axis(0), kc).row(i).to_owned();
        for k in blocks_of_slot(state, data, kc) {
            let mut fi = state.latent[k].dot(&coeffs);
            fi += state.intercept[[kc, i]];
            fitted.f[k].column_mut(i).assign(&fi);
        }
    }
    Ok(())
}

/// Beta parameters of the overall-probability full conditional: prior counts
/// plus the inclusion indicators it governs (K for HM, 2K pooled for RHM, one
/// for NHM).
pub fn w_overall_conditional(state: &ChainState, hp: &Hyperparameters, i: usize, j: usize) -> (f64, f64) {
    let kc = state.n_cond_slots();
    let (included, total) = match state.model {
        ModelKind::Hm => {
            let s = (0..kc).filter(|&k| state.incl[[k, i, j]]).count();
            (s, kc)
        }
        ModelKind::Rhm => {
            let s = (0..kc)
                .map(|k| state.incl[[k, i, j]] as usize + state.incl[[k, j, i]] as usize)
                .sum();
            (s, 2 * kc)
        }
        ModelKind::Nhm => (state.incl[[0, i, j]] as usize, 1),
    };
    (hp.beta1 + included as f64, hp.beta2 + (total - included) as f64)
}

pub fn update_w_overall(
    state: &mut ChainState,
    hp: &Hyperparameters,
    i: usize,
    j: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let (a, b) = w_overall_conditional(state, hp, i, j);
    let draw = Beta::new(a, b)
        .map_err(|e| Error::numerical(e.to_string()))?
        .sample(rng);
    // keep w in the open interval; Beta draws can round to 0 or 1
    state.set_w(i, j, draw.clamp(1e-300, 1.0 - 1e-16));
    Ok(())
}

/// One Beta draw of the condition-level probability. A derived quantity: it
/// is accumulated into the posterior summary and never fed back into the
/// chain. Under RHM the single shared stream conditions on both indicators.
pub fn sample_w_condition(
    state: &ChainState,
    hp: &Hyperparameters,
    i: usize,
    j: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let w = state.w_of(i, j);
    let (a, b) = match state.model {
        ModelKind::Hm => crate::model::wcond_posterior_params(w, hp.v, state.incl[[k, i, j]]),
        ModelKind::Rhm => {
            let s = state.incl[[k, i, j]] as u8 + state.incl[[k, j, i]] as u8;
            (w * hp.v + s as f64, (1.0 - w) * hp.v + (2 - s) as f64)
        }
        ModelKind::Nhm => {
            return Err(Error::validation(
                "condition-level probabilities are undefined under NHM",
            ))
        }
    };
    Ok(Beta::new(a, b)
        .map_err(|e| Error::numerical(e.to_string()))?
        .sample(rng))
}

/// Normal full conditional (mean, var) of the slab mean for pair (i, j) from
/// the currently included coefficients; the prior when none are included.
pub fn slab_mean_conditional(state: &ChainState, hp: &Hyperparameters, i: usize, j: usize) -> (f64, f64) {
    let prior_var = hp.tau_var(i);
    let mut prec = 1.0 / prior_var;
    let mut lin = hp.a[i] / prior_var;
    let slab_prec = state.slab_prec[[i, j]];
    for k in 0..state.n_cond_slots() {
        if state.incl[[k, i, j]] {
            prec += slab_prec;
            lin += slab_prec * state.coeff[[k, i, j]];
        }
    }
    (lin / prec, 1.0 / prec)
}

/// Gamma full conditional (shape, rate) of the slab precision for pair (i, j).
pub fn slab_prec_conditional(state: &ChainState, hp: &Hyperparameters, i: usize, j: usize) -> (f64, f64) {
    let mut count = 0usize;
    let mut ss = 0.0;
    let m = state.slab_mean[[i, j]];
    for k in 0..state.n_cond_slots() {
        if state.incl[[k, i, j]] {
            let d = state.coeff[[k, i, j]] - m;
            count += 1;
            ss += d * d;
        }
    }
    (hp.gamma_slab.0 + count as f64 / 2.0, hp.gamma_slab.1 + ss / 2.0)
}

pub fn update_slab_params(
    state: &mut ChainState,
    hp: &Hyperparameters,
    i: usize,
    j: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let (mean, var) = slab_mean_conditional(state, hp, i, j);
    state.slab_mean[[i, j]] = Normal::new(mean, var.sqrt())
        .map_err(|e| Error::numerical(e.to_string()))?
        .sample(rng);
    let (shape, rate) = slab_prec_conditional(state, hp, i, j);
    state.slab_prec[[i, j]] = sample_gamma(shape, rate, rng)?;
    Ok(())
}

/// Gamma full conditional (shape, rate) of an intrinsic precision. `k` is
/// `Some` when variances vary by condition, `None` for the pooled case.
pub fn intrinsic_prec_conditional(
    state: &ChainState,
    fitted: &Fitted,
    hp: &Hyperparameters,
    i: usize,
    k: Option<usize>,
) -> (f64, f64) {
    let range = match k {
        Some(k) => k..k + 1,
        None => 0..state.latent.len(),
    };
    let mut count = 0usize;
    let mut ss = 0.0;
    for kk in range {
        let latent = &state.latent[kk];
        let f = &fitted.f[kk];
        for n in 0..latent.nrows() {
            let r = latent[[n, i]] - f[[n, i]];
            ss += r * r;
            count += 1;
        }
    }
    (
        hp.gamma_intrinsic.0 + count as f64 / 2.0,
        hp.gamma_intrinsic.1 + ss / 2.0,
    )
}

/// Gamma full conditional (shape, rate) of the measurement precision, pooled
/// over every protein, cell, and condition.
pub fn meas_prec_conditional(state: &ChainState, data: &Dataset, hp: &Hyperparameters) -> (f64, f64) {
    let mut count = 0usize;
    let mut ss = 0.0;
    for (k, block) in data.blocks.iter().enumerate() {
        let latent = &state.latent[k];
        for (x, xt) in block.iter().zip(latent.iter()) {
            let d = x - xt;
            ss += d * d;
            count += 1;
        }
    }
    (hp.gamma_meas.0 + count as f64 / 2.0, hp.gamma_meas.1 + ss / 2.0)
}

pub fn update_variances(
    state: &mut ChainState,
    fitted: &Fitted,
    data: &Dataset,
    hp: &Hyperparameters,
    fix_sigma_m: Option<f64>,
    rng: &mut impl Rng,
) -> Result<()> {
    let p = state.n_proteins();
    if state.varying_intrinsic {
        for k in 0..data.n_conditions() {
            for i in 0..p {
                let (shape, rate) = intrinsic_prec_conditional(state, fitted, hp, i, Some(k));
                state.intrinsic_prec[[k, i]] = sample_gamma(shape, rate, rng)?;
            }
        }
    } else {
        for i in 0..p {
            let (shape, rate) = intrinsic_prec_conditional(state, fitted, hp, i, None);
            state.intrinsic_prec[[0, i]] = sample_gamma(shape, rate, rng)?;
        }
    }
    match fix_sigma_m {
        Some(sigma) => state.meas_prec = 1.0 / (sigma * sigma),
        None => {
            let (shape, rate) = meas_prec_conditional(state, data, hp);
            state.meas_prec = sample_gamma(shape, rate, rng)?;
        }
    }
    Ok(())
}

/// Normal full conditional (mean, var) of one latent true activity, combining
/// the measurement likelihood, its own structural equation, and every
/// equation where it currently appears as a predictor.
pub fn latent_conditional(
    state: &ChainState,
    fitted: &Fitted,
    data: &Dataset,
    j: usize,
    n: usize,
    k: usize,
) -> Result<(f64, f64)> {
    let kc = state.cond_slot(k);
    let latent = &state.latent[k];
    let f = &fitted.f[k];
    let xj = latent[[n, j]];

    let mut prec = state.meas_prec;
    let mut lin = state.meas_prec * data.blocks[k][[n, j]];

    // own equation: response side (f for equation j never involves latent j)
    let pj = state.intrinsic_prec_of(j, k);
    prec += pj;
    lin += pj * f[[n, j]];

    // predictor side
    for i in 0..state.n_proteins() {
        if i == j {
            continue;
        }
        let c = state.coeff[[kc, i, j]];
        if c != 0.0 {
            let pi = state.intrinsic_prec_of(i, k);
            let mean_without = f[[n, i]] - c * xj;
            prec += pi * c * c;
            lin += pi * c * (latent[[n, i]] - mean_without);
        }
    }

    if !(prec.is_finite() && prec > 0.0) {
        return Err(Error::numerical(format!(
            "non-positive combined precision for latent ({j},{n},{k})"
        )));
    }
    Ok((lin / prec, 1.0 / prec))
}

pub fn update_latent_truth(
    state: &mut ChainState,
    fitted: &mut Fitted,
    data: &Dataset,
    j: usize,
    n: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let (mean, var) = latent_conditional(state, fitted, data, j, n, k)?;
    let new = Normal::new(mean, var.sqrt())
        .map_err(|e| Error::numerical(e.to_string()))?
        .sample(rng);
    let kc = state.cond_slot(k);
    let delta = new - state.latent[k][[n, j]];
    state.latent[k][[n, j]] = new;
    if delta != 0.0 {
        let f = &mut fitted.f[k];
        for i in 0..state.n_proteins() {
            if i != j {
                let c = state.coeff[[kc, i, j]];
                if c != 0.0 {
                    f[[n, i]] += c * delta;
                }
            }
        }
    }
    Ok(())
}

/// Resamples the latent truths of protein `j` for every cell of condition
/// `k`. Cells are independent given the parameters, so this is the same scan
/// as cell-by-cell updates, with the predictor bookkeeping hoisted out of the
/// inner loop.
pub fn update_latent_column(
    state: &mut ChainState,
    fitted: &mut Fitted,
    data: &Dataset,
    j: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let kc = state.cond_slot(k);
    let p = state.n_proteins();
    // equations where latent j currently appears as a predictor
    let mut preds: Vec<(usize, f64, f64)> = Vec::new(); // (i, coeff, prec)
    for i in 0..p {
        if i != j {
            let c = state.coeff[[kc, i, j]];
            if c != 0.0 {
                preds.push((i, c, state.intrinsic_prec_of(i, k)));
            }
        }
    }
    let pj = state.intrinsic_prec_of(j, k);
    let mp = state.meas_prec;
    let prec = mp + pj + preds.iter().map(|&(_, c, pi)| pi * c * c).sum::<f64>();
    if !(prec.is_finite() && prec > 0.0) {
        return Err(Error::numerical(format!(
            "non-positive combined precision for latent column ({j},{k})"
        )));
    }
    let sd = (1.0 / prec).sqrt();
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    // Cells are conditionally independent, so the scan is column-vectorized:
    // accumulate the precision-weighted linear term, draw the whole column,
    // then push the shifts into the fitted columns that use j as a predictor.
    let block = &data.blocks[k];
    let n = block.nrows();
    let mut lin = Array1::<f64>::zeros(n);
    {
        let latent = &state.latent[k];
        let f = &fitted.f[k];
        Zip::from(&mut lin)
            .and(block.column(j))
            .and(f.column(j))
            .for_each(|l, &x, &fj| *l = mp * x + pj * fj);
        for &(i, c, pi) in &preds {
            Zip::from(&mut lin)
                .and(latent.column(i))
                .and(f.column(i))
                .and(latent.column(j))
                .for_each(|l, &xi, &fi, &xj| *l += pi * c * (xi - (fi - c * xj)));
        }
    }
    let mut delta = Array1::<f64>::zeros(n);
    Zip::from(&mut delta)
        .and(&lin)
        .and(state.latent[k].column(j))
        .for_each(|d, &l, &xj| *d = l / prec + sd * std_normal.sample(rng) - xj);
    Zip::from(state.latent[k].column_mut(j))
        .and(&delta)
        .for_each(|xj, &d| *xj += d);
    for &(i, c, _) in &preds {
        Zip::from(fitted.f[k].column_mut(i))
            .and(&delta)
            .for_each(|fi, &d| *fi += c * d);
    }
    Ok(())
}

/// Normal full conditional (mean, var) of one intercept slot under its
/// N(0, intercept_prior_sd^2) prior. For NHM the single slot pools all blocks.
pub fn intercept_conditional(
    state: &ChainState,
    fitted: &Fitted,
    data: &Dataset,
    hp: &Hyperparameters,
    i: usize,
    kc: usize,
) -> (f64, f64) {
    let s0 = hp.intercept_prior_sd;
    let mut prec = 1.0 / (s0 * s0);
    let mut lin = 0.0;
    let cur = state.intercept[[kc, i]];
    for k in blocks_of_slot(state, data, kc) {
        let pi = state.intrinsic_prec_of(i, k);
        let latent = &state.latent[k];
        let f = &fitted.f[k];
        let n = latent.nrows();
        let mut rsum = 0.0;
        for row in 0..n {
            rsum += latent[[row, i]] - (f[[row, i]] - cur);
        }
        prec += pi * n as f64;
        lin += pi * rsum;
    }
    (lin / prec, 1.0 / prec)
}

pub fn update_intercept(
    state: &mut ChainState,
    fitted: &mut Fitted,
    data: &Dataset,
    hp: &Hyperparameters,
    i: usize,
    kc: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let (mean, var) = intercept_conditional(state, fitted, data, hp, i, kc);
    let new = Normal::new(mean, var.sqrt())
        .map_err(|e| Error::numerical(e.to_string()))?
        .sample(rng);
    let delta = new - state.intercept[[kc, i]];
    state.intercept[[kc, i]] = new;
    if delta != 0.0 {
        for k in blocks_of_slot(state, data, kc) {
            let f = &mut fitted.f[k];
            for n in 0..f.nrows() {
                f[[n, i]] += delta;
            }
        }
    }
    Ok(())
}

fn sample_gamma(shape: f64, rate: f64, rng: &mut impl Rng) -> Result<f64> {
    let draw = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::numerical(e.to_string()))?
        .sample(rng);
    if !(draw.is_finite() && draw > 0.0) {
        return Err(Error::numerical("degenerate gamma draw"));
    }
    Ok(draw)
}

/// Options for a single systematic-scan sweep.
#[derive(Default)]
pub struct SweepOptions<'a> {
    pub fix_sigma_m: Option<f64>,
    /// Restricts coefficient updates to ordered pairs where the mask is true.
    /// Pairs outside the support keep z = 0 and coefficient 0. Used by
    /// joint-distribution tests that need an acyclic support.
    pub support: Option<&'a Array2<bool>>,
}

fn allowed(support: Option<&Array2<bool>>, i: usize, j: usize) -> bool {
    support.is_none_or(|s| s[[i, j]])
}

/// One systematic-scan Gibbs sweep: latent truths, coefficient pairs, slab
/// parameters, overall probabilities, variances, intercepts.
pub fn sweep(
    state: &mut ChainState,
    data: &Dataset,
    hp: &Hyperparameters,
    opts: &SweepOptions<'_>,
    rng: &mut impl Rng,
) -> Result<()> {
    let p = state.n_proteins();
    let mut fitted = Fitted::compute(state, data);

    for k in 0..data.n_conditions() {
        for j in 0..p {
            update_latent_column(state, &mut fitted, data, j, k, rng)?;
        }
    }

    let gram: Vec<Array2<f64>> = state.latent.iter().map(|l| l.t().dot(l)).collect();
    for kc in 0..state.n_cond_slots() {
        for i in 0..p {
            update_coefficient_row(state, &mut fitted, data, hp, i, kc, &gram, opts.support, rng)?;
        }
    }

    if state.model.hierarchical() {
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    update_slab_params(state, hp, i, j, rng)?;
                }
            }
        }
    }

    for i in 0..p {
        for j in 0..p {
            if i == j || (state.model == ModelKind::Rhm && i > j) {
                continue;
            }
            update_w_overall(state, hp, i, j, rng)?;
        }
    }

    update_variances(state, &fitted, data, hp, opts.fix_sigma_m, rng)?;

    for kc in 0..state.n_cond_slots() {
        for i in 0..p {
            update_intercept(state, &mut fitted, data, hp, i, kc, rng)?;
        }
    }

    Ok(())
}
