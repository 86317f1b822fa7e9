//! Metropolis-within-Gibbs MCMC engine: chain orchestration, burn-in and
//! thinning, trace retention, checkpointing, and posterior summarization.

pub mod kernels;

use std::io::Write;
use std::path::Path;

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChainState, Hyperparameters, ModelKind};
use crate::types::{n_pairs, pair_index, Dataset};
use kernels::{sample_w_condition, sweep, SweepOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_chains: usize,
    /// Pins sigma^M instead of sampling it.
    pub fix_sigma_m: Option<f64>,
    /// Global per-protein z-scoring before fitting.
    pub standardize: bool,
    /// Per-condition intrinsic variances instead of a shared one per protein.
    pub varying_intrinsic_variance: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 10_000,
            burn_in: 2_000,
            thin: 10,
            seed: 0,
            n_chains: 5,
            fix_sigma_m: None,
            standardize: false,
            varying_intrinsic_variance: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::validation("burn_in must be smaller than iterations"));
        }
        if self.thin == 0 || self.thin > self.iterations - self.burn_in {
            return Err(Error::validation("thin must be in [1, iterations - burn_in]"));
        }
        if self.n_chains == 0 {
            return Err(Error::validation("n_chains must be positive"));
        }
        if let Some(s) = self.fix_sigma_m {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::validation("fix_sigma_m must be positive"));
            }
        }
        Ok(())
    }

    pub fn n_retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Retained draws of one chain plus running sums for the posterior summary.
///
/// Draw vectors are row-major per retained draw:
/// `w_draws` holds P*P entries (diagonal zero), `coeff_draws`/`z_draws` hold
/// Kc*P*P entries, `var_draws` holds the intrinsic precisions (Kv*P entries)
/// followed by the measurement precision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainTrace {
    pub model: ModelKind,
    pub p: usize,
    pub n_conditions: usize,
    pub n_cond_slots: usize,
    pub seed: u64,
    pub n_retained: usize,
    pub w_draws: Vec<f64>,
    pub coeff_draws: Vec<f64>,
    pub z_draws: Vec<u8>,
    pub var_draws: Vec<f64>,
    /// Running sums of the per-pair association signal, canonical pair order.
    pub sum_pair_w: Vec<f64>,
    /// Running sums of condition-level probability draws, (K, P, P); zero
    /// (and unused) for NHM.
    pub sum_cond_w: Array3<f64>,
}

/// Runs one chain: systematic-scan sweeps with burn-in and thinning.
/// Deterministic given the dataset, hyperparameters, and `config.seed`.
pub fn run_chain(
    data: &Dataset,
    hp: &Hyperparameters,
    config: &SamplerConfig,
    model: ModelKind,
) -> Result<ChainTrace> {
    config.validate()?;
    hp.validate(data.n_proteins())?;
    let standardized;
    let data = if config.standardize {
        standardized = data.standardized();
        &standardized
    } else {
        data
    };

    let p = data.n_proteins();
    let k = data.n_conditions();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = ChainState::init(data, hp, model, config.varying_intrinsic_variance);
    if let Some(sigma) = config.fix_sigma_m {
        state.meas_prec = 1.0 / (sigma * sigma);
    }
    let opts = SweepOptions {
        fix_sigma_m: config.fix_sigma_m,
        support: None,
    };

    let n_retained = config.n_retained();
    let kc = state.n_cond_slots();
    let kv = state.intrinsic_prec.nrows();
    let mut trace = ChainTrace {
        model,
        p,
        n_conditions: k,
        n_cond_slots: kc,
        seed: config.seed,
        n_retained: 0,
        w_draws: Vec::with_capacity(n_retained * p * p),
        coeff_draws: Vec::with_capacity(n_retained * kc * p * p),
        z_draws: Vec::with_capacity(n_retained * kc * p * p),
        var_draws: Vec::with_capacity(n_retained * (kv * p + 1)),
        sum_pair_w: vec![0.0; n_pairs(p)],
        sum_cond_w: Array3::zeros((k, p, p)),
    };

    for iter in 0..config.iterations {
        sweep(&mut state, data, hp, &opts, &mut rng)
            .map_err(|e| Error::numerical(format!("iteration {iter}: {e}")))?;
        if iter >= config.burn_in && (iter - config.burn_in + 1).is_multiple_of(config.thin) {
            retain(&mut trace, &state, data, hp, &mut rng)?;
        }
    }
    Ok(trace)
}

fn retain(
    trace: &mut ChainTrace,
    state: &ChainState,
    data: &Dataset,
    hp: &Hyperparameters,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let p = state.n_proteins();
    trace.n_retained += 1;
    trace.w_draws.extend((0..p).flat_map(|i| {
        (0..p).map(move |j| if i == j { 0.0 } else { state.w_of(i, j) })
    }));
    trace.coeff_draws.extend(state.coeff.iter().copied());
    trace.z_draws.extend(state.incl.iter().map(|&z| z as u8));
    trace.var_draws.extend(state.intrinsic_prec.iter().copied());
    trace.var_draws.push(state.meas_prec);

    for (idx, (i, j)) in crate::types::pairs(p).enumerate() {
        let signal = match state.model {
            ModelKind::Rhm => state.w_of(i, j),
            _ => 0.5 * (state.w_of(i, j) + state.w_of(j, i)),
        };
        trace.sum_pair_w[idx] += signal;
    }

    match state.model {
        ModelKind::Hm => {
            for k in 0..data.n_conditions() {
                for i in 0..p {
                    for j in 0..p {
                        if i != j {
                            let draw = sample_w_condition(state, hp, i, j, k, rng)?;
                            trace.sum_cond_w[[k, i, j]] += draw;
                        }
                    }
                }
            }
        }
        ModelKind::Rhm => {
            // one stream per unordered pair, mirrored into both ordered slots
            for k in 0..data.n_conditions() {
                for (i, j) in crate::types::pairs(p) {
                    let draw = sample_w_condition(state, hp, i, j, k, rng)?;
                    trace.sum_cond_w[[k, i, j]] += draw;
                    trace.sum_cond_w[[k, j, i]] += draw;
                }
            }
        }
        ModelKind::Nhm => {}
    }
    Ok(())
}

/// Derives the per-chain seed from a master seed (splitmix64 over the chain
/// index so chains are decorrelated but reproducible).
pub fn chain_seed(master: u64, chain: usize) -> u64 {
    let mut z = master
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add((chain as u64).wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Runs `config.n_chains` independent chains (parallel execution contexts,
/// merged deterministically by chain index).
pub fn run_chains(
    data: &Dataset,
    hp: &Hyperparameters,
    config: &SamplerConfig,
    model: ModelKind,
) -> Result<Vec<ChainTrace>> {
    config.validate()?;
    let mut results: Vec<Option<Result<ChainTrace>>> = (0..config.n_chains).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chain in 0..config.n_chains {
            let mut cfg = config.clone();
            cfg.seed = chain_seed(config.seed, chain);
            cfg.n_chains = 1;
            handles.push(scope.spawn(move || run_chain(data, hp, &cfg, model)));
        }
        for (chain, h) in handles.into_iter().enumerate() {
            results[chain] = Some(h.join().expect("chain thread panicked"));
        }
    });
    results.into_iter().map(|r| r.unwrap()).collect()
}

/// Per-run posterior means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub n_draws: usize,
    /// Posterior mean association signal per unordered pair, canonical order.
    pub pair_mean: Vec<f64>,
    /// Posterior means of the condition-level probabilities, (K, P, P);
    /// `None` for NHM.
    pub cond_mean: Option<Array3<f64>>,
}

impl RunSummary {
    pub fn pair_mean_of(&self, i: usize, j: usize, p: usize) -> f64 {
        self.pair_mean[pair_index(i, j, p)]
    }
}

/// Posterior means per chain plus the pooled (draw-weighted) combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub model: ModelKind,
    pub p: usize,
    pub n_conditions: usize,
    pub runs: Vec<RunSummary>,
    pub pooled: RunSummary,
}

pub fn summarize(traces: &[ChainTrace]) -> Result<PosteriorSummary> {
    let first = traces.first().ok_or_else(|| Error::validation("no chain traces"))?;
    let (model, p, k) = (first.model, first.p, first.n_conditions);
    if traces
        .iter()
        .any(|t| t.model != model || t.p != p || t.n_conditions != k || t.n_retained == 0)
    {
        return Err(Error::validation("chain traces are inconsistent or empty"));
    }

    let runs: Vec<RunSummary> = traces
        .iter()
        .map(|t| {
            let nd = t.n_retained as f64;
            RunSummary {
                seed: t.seed,
                n_draws: t.n_retained,
                pair_mean: t.sum_pair_w.iter().map(|s| s / nd).collect(),
                cond_mean: match model {
                    ModelKind::Nhm => None,
                    _ => Some(t.sum_cond_w.mapv(|s| s / nd)),
                },
            }
        })
        .collect();

    let total: usize = traces.iter().map(|t| t.n_retained).sum();
    let mut pair_mean = vec![0.0; n_pairs(p)];
    let mut cond_mean = Array3::zeros((k, p, p));
    for t in traces {
        for (acc, s) in pair_mean.iter_mut().zip(&t.sum_pair_w) {
            *acc += s;
        }
        cond_mean += &t.sum_cond_w;
    }
    let pooled = RunSummary {
        seed: first.seed,
        n_draws: total,
        pair_mean: pair_mean.into_iter().map(|s| s / total as f64).collect(),
        cond_mean: match model {
            ModelKind::Nhm => None,
            _ => Some(cond_mean.mapv(|s| s / total as f64)),
        },
    };

    Ok(PosteriorSummary {
        model,
        p,
        n_conditions: k,
        runs,
        pooled,
    })
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    format_version: u32,
    state: ChainState,
}

/// Writes a versioned chain-state checkpoint.
pub fn save_state(path: &Path, state: &ChainState) -> Result<()> {
    let file = StateFile {
        format_version: 1,
        state: state.clone(),
    };
    let json = serde_json::to_string(&file).map_err(|e| Error::numerical(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Restores a chain-state checkpoint.
pub fn load_state(path: &Path) -> Result<ChainState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: StateFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    if file.format_version != 1 {
        return Err(Error::parse(
            path,
            format!("unsupported state format version {}", file.format_version),
        ));
    }
    Ok(file.state)
}

/// Dumps a chain trace as CSV, one row per retained draw.
///
/// Column order: `draw`, then `w_<i>_<j>` for all ordered pairs (row-major,
/// i != j), then `z_<k>_<i>_<j>` and `coeff_<k>_<i>_<j>` for every condition
/// slot, then the intrinsic precisions `iprec[_<k>]_<i>` and `mprec`.
pub fn write_trace_csv(path: &Path, trace: &ChainTrace, names: &[String]) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let p = trace.p;
    let kc = trace.n_cond_slots;
    let kv = if trace.var_draws.len() / trace.n_retained.max(1) > p + 1 {
        trace.n_conditions
    } else {
        1
    };
    let mut header = vec!["draw".to_string()];
    for i in 0..p {
        for j in 0..p {
            if i != j {
                header.push(format!("w_{}_{}", names[i], names[j]));
            }
        }
    }
    for k in 0..kc {
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    header.push(format!("z_{k}_{}_{}", names[i], names[j]));
                }
            }
        }
    }
    for k in 0..kc {
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    header.push(format!("coeff_{k}_{}_{}", names[i], names[j]));
                }
            }
        }
    }
    for k in 0..kv {
        for name in names {
            header.push(if kv > 1 {
                format!("iprec_{k}_{name}")
            } else {
                format!("iprec_{name}")
            });
        }
    }
    header.push("mprec".to_string());
    writeln!(out, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;

    let wrow = p * p;
    let crow = kc * p * p;
    let vrow = kv * p + 1;
    for d in 0..trace.n_retained {
        let mut row = vec![d.to_string()];
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    row.push(format!("{}", trace.w_draws[d * wrow + i * p + j]));
                }
            }
        }
        for k in 0..kc {
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        row.push(format!("{}", trace.z_draws[d * crow + (k * p + i) * p + j]));
                    }
                }
            }
        }
        for k in 0..kc {
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        row.push(format!("{}", trace.coeff_draws[d * crow + (k * p + i) * p + j]));
                    }
                }
            }
        }
        for v in &trace.var_draws[d * vrow..(d + 1) * vrow] {
            row.push(format!("{v}"));
        }
        writeln!(out, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
