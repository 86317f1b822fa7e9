//! Synthetic data generation: linear-Gaussian sampling along a known directed
//! acyclic network, tail-clamping interventions drawn from empirical pools,
//! and additive measurement noise.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Gamma, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::chain_seed;
use crate::types::{Dataset, InterventionDesign, InterventionMode, ProteinPanel};

/// One directed edge, parent -> child. The coefficient is optional; missing
/// coefficients are drawn when a study is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub coeff: Option<f64>,
}

/// A ground-truth directed network over a protein panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueNetwork {
    pub panel: ProteinPanel,
    pub edges: Vec<Edge>,
}

impl TrueNetwork {
    pub fn new(panel: ProteinPanel, edges: Vec<Edge>) -> Result<Self> {
        let p = panel.len();
        for e in &edges {
            if e.parent >= p || e.child >= p {
                return Err(Error::validation(format!(
                    "edge {} -> {} out of range for {p} proteins",
                    e.parent, e.child
                )));
            }
            if e.parent == e.child {
                return Err(Error::validation(format!("self loop on protein {}", e.parent)));
            }
        }
        for (idx, e) in edges.iter().enumerate() {
            if edges[..idx]
                .iter()
                .any(|o| o.parent == e.parent && o.child == e.child)
            {
                return Err(Error::validation(format!(
                    "duplicate edge {} -> {}",
                    e.parent, e.child
                )));
            }
        }
        Ok(TrueNetwork { panel, edges })
    }

    pub fn n_proteins(&self) -> usize {
        self.panel.len()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.iter().any(|e| e.parent == parent && e.child == child)
    }

    /// Kahn's algorithm; errors if the network has a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let p = self.n_proteins();
        let mut indeg = vec![0usize; p];
        for e in &self.edges {
            indeg[e.child] += 1;
        }
        let mut queue: Vec<usize> = (0..p).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(p);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            order.push(u);
            for e in &self.edges {
                if e.parent == u {
                    indeg[e.child] -= 1;
                    if indeg[e.child] == 0 {
                        queue.push(e.child);
                    }
                }
            }
        }
        if order.len() != p {
            return Err(Error::validation("network contains a cycle"));
        }
        Ok(order)
    }

    /// Parents of each protein as (parent, coefficient) lists; errors if any
    /// edge still lacks a coefficient.
    fn parent_lists(&self) -> Result<Vec<Vec<(usize, f64)>>> {
        let mut lists = vec![Vec::new(); self.n_proteins()];
        for e in &self.edges {
            let c = e.coeff.ok_or_else(|| {
                Error::validation(format!("edge {} -> {} has no coefficient", e.parent, e.child))
            })?;
            lists[e.child].push((e.parent, c));
        }
        Ok(lists)
    }
}

/// Intrinsic-noise regime for the structural equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRegime {
    /// Unit intrinsic standard deviation for every protein.
    Constant,
    /// Per-protein variances 0.01 / Gamma(2, 1), drawn once per study.
    Variable,
    /// Standard Cauchy (t with 1 df) intrinsic noise.
    HeavyTail,
}

impl NoiseRegime {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(NoiseRegime::Constant),
            "variable" => Some(NoiseRegime::Variable),
            "heavy" | "heavy_tail" => Some(NoiseRegime::HeavyTail),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseRegime::Constant => "constant",
            NoiseRegime::Variable => "variable",
            NoiseRegime::HeavyTail => "heavy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cells_per_condition: usize,
    pub regime: NoiseRegime,
    /// Measurement-noise standard deviation added to every latent value.
    pub sigma_m: f64,
    /// Cells simulated per empirical clamping pool.
    pub pool_size: usize,
    /// Tail mass used for inhibit/activate clamping.
    pub tail_quantile: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cells_per_condition: 600,
            regime: NoiseRegime::Constant,
            sigma_m: 0.1,
            pool_size: 10_000,
            tail_quantile: 0.05,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells_per_condition == 0 {
            return Err(Error::validation("cells_per_condition must be positive"));
        }
        if self.pool_size < 20 {
            return Err(Error::validation("pool_size must be at least 20"));
        }
        if !(self.tail_quantile > 0.0 && self.tail_quantile < 0.5) {
            return Err(Error::validation("tail_quantile must be in (0, 0.5)"));
        }
        if !(self.sigma_m >= 0.0 && self.sigma_m.is_finite()) {
            return Err(Error::validation("sigma_m must be nonnegative"));
        }
        Ok(())
    }
}

/// Draws coefficients for every edge that lacks one: magnitude uniform on
/// [0.5, 2], sign equiprobable.
pub fn generate_coefficients(network: &TrueNetwork, rng: &mut impl Rng) -> TrueNetwork {
    let mag = Uniform::new_inclusive(0.5, 2.0).unwrap();
    let mut out = network.clone();
    for e in &mut out.edges {
        if e.coeff.is_none() {
            let m = mag.sample(rng);
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            e.coeff = Some(s * m);
        }
    }
    out
}

fn intrinsic_sds(p: usize, regime: NoiseRegime, rng: &mut impl Rng) -> Vec<f64> {
    match regime {
        NoiseRegime::Constant | NoiseRegime::HeavyTail => vec![1.0; p],
        NoiseRegime::Variable => {
            let g = Gamma::<f64>::new(2.0, 1.0).unwrap();
            (0..p).map(|_| 0.1 * (1.0 / g.sample(rng)).sqrt()).collect()
        }
    }
}

fn intrinsic_noise(regime: NoiseRegime, sd: f64, rng: &mut impl Rng) -> f64 {
    match regime {
        NoiseRegime::HeavyTail => sd * Cauchy::new(0.0, 1.0).unwrap().sample(rng),
        _ => Normal::new(0.0, sd).unwrap().sample(rng),
    }
}

/// Empirical clamping pools: the per-protein lower and upper tails of an
/// unperturbed population.
#[derive(Debug, Clone)]
pub struct ClampPools {
    pub low: Vec<Vec<f64>>,
    pub high: Vec<Vec<f64>>,
}

/// Number of pool members in a tail of mass `q` out of `n` values.
pub fn tail_count(n: usize, q: f64) -> usize {
    ((q * n as f64).ceil() as usize).clamp(1, n)
}

/// Builds the clamping pools from `pool_size` unperturbed cells.
pub fn build_clamp_pools(
    order: &[usize],
    parents: &[Vec<(usize, f64)>],
    sds: &[f64],
    config: &SimConfig,
    rng: &mut impl Rng,
) -> ClampPools {
    let p = parents.len();
    let latent = simulate_latent(order, parents, sds, config.regime, &[], None, config.pool_size, rng);
    let m = tail_count(config.pool_size, config.tail_quantile);
    let mut low = Vec::with_capacity(p);
    let mut high = Vec::with_capacity(p);
    for i in 0..p {
        let mut col: Vec<f64> = latent.column(i).to_vec();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        low.push(col[..m].to_vec());
        high.push(col[col.len() - m..].to_vec());
    }
    ClampPools { low, high }
}

/// Samples `n` latent cells along the topological order. Clamped proteins are
/// drawn uniformly from the matching tail pool and never follow their parents.
#[allow(clippy::too_many_arguments)]
fn simulate_latent(
    order: &[usize],
    parents: &[Vec<(usize, f64)>],
    sds: &[f64],
    regime: NoiseRegime,
    clamps: &[(usize, InterventionMode)],
    pools: Option<&ClampPools>,
    n: usize,
    rng: &mut impl Rng,
) -> Array2<f64> {
    let p = parents.len();
    let mut x = Array2::zeros((n, p));
    for cell in 0..n {
        for &i in order {
            let clamp = clamps.iter().find(|&&(t, _)| t == i).map(|&(_, m)| m);
            x[[cell, i]] = match clamp {
                Some(InterventionMode::Inhibit) => {
                    let pool = &pools.expect("clamping needs pools").low[i];
                    pool[rng.random_range(0..pool.len())]
                }
                Some(InterventionMode::Activate) => {
                    let pool = &pools.expect("clamping needs pools").high[i];
                    pool[rng.random_range(0..pool.len())]
                }
                _ => {
                    let mut v = intrinsic_noise(regime, sds[i], rng);
                    for &(parent, c) in &parents[i] {
                        v += c * x[[cell, parent]];
                    }
                    v
                }
            };
        }
    }
    x
}

fn add_measurement_noise(latent: &Array2<f64>, sigma_m: f64, rng: &mut impl Rng) -> Array2<f64> {
    if sigma_m == 0.0 {
        return latent.clone();
    }
    let noise = Normal::new(0.0, sigma_m).unwrap();
    latent.mapv(|v| v + noise.sample(rng))
}

/// Simulates one study: draws any missing coefficients and the intrinsic
/// scales, builds the clamping pools from an unperturbed population, then
/// samples every condition. Returns the dataset and the coefficient-complete
/// network actually used.
///
/// Deterministic given `config.seed`; each condition runs on its own RNG
/// substream, so reordering conditions does not reshuffle their draws.
pub fn simulate_study(
    network: &TrueNetwork,
    design: &InterventionDesign,
    config: &SimConfig,
) -> Result<(Dataset, TrueNetwork)> {
    config.validate()?;
    let order = network.topological_order()?;
    let mut setup_rng = ChaCha8Rng::seed_from_u64(chain_seed(config.seed, 0));
    let net = generate_coefficients(network, &mut setup_rng);
    let parents = net.parent_lists()?;
    let sds = intrinsic_sds(net.n_proteins(), config.regime, &mut setup_rng);

    let needs_pools = design
        .conditions
        .iter()
        .any(|c| !c.targets.is_empty());
    let pools = if needs_pools {
        let mut pool_rng = ChaCha8Rng::seed_from_u64(chain_seed(config.seed, 1));
        Some(build_clamp_pools(&order, &parents, &sds, config, &mut pool_rng))
    } else {
        None
    };

    let mut blocks = Vec::with_capacity(design.n_conditions());
    for (k, cond) in design.conditions.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(config.seed, 2 + k));
        let latent = simulate_latent(
            &order,
            &parents,
            &sds,
            config.regime,
            &cond.targets,
            pools.as_ref(),
            config.cells_per_condition,
            &mut rng,
        );
        blocks.push(add_measurement_noise(&latent, config.sigma_m, &mut rng));
    }

    let data = Dataset::new(net.panel.clone(), design.clone(), blocks)?;
    Ok((data, net))
}
