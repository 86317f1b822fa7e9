//! Command-line orchestration: simulate, fit, infer, eval, and the full
//! pipeline, with reproducible seeds and a config hash recorded in every
//! artifact.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::classify_edges;
use crate::inference::{assemble_network, detect_jump, Thresholds};
use crate::io;
use crate::model::{Hyperparameters, ModelKind};
use crate::sampler::{run_chains, summarize, write_trace_csv, SamplerConfig};
use crate::simulator::{simulate_study, NoiseRegime, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "signet", version, about = "Causal protein-signaling network inference from single-cell interventional data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic interventional dataset from a known network.
    Simulate(SimulateArgs),
    /// Fit a model by MCMC and write posterior summaries.
    Fit(FitArgs),
    /// Turn posterior summaries into a partially directed network.
    Infer(InferArgs),
    /// Score an inferred network against a reference.
    Eval(EvalArgs),
    /// Run simulate, fit, infer, and eval end to end from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ground-truth network file (`node NAME` lines, then `parent child [coeff]`).
    #[arg(long)]
    pub network: PathBuf,
    /// Intervention design file (`label mode [target]` per condition).
    #[arg(long)]
    pub design: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Cells per condition.
    #[arg(long, default_value_t = 600)]
    pub cells: usize,
    /// Intrinsic-noise regime: constant, variable, or heavy.
    #[arg(long, default_value = "constant")]
    pub regime: String,
    /// Measurement-noise standard deviation.
    #[arg(long = "sigma-m", default_value_t = 0.1)]
    pub sigma_m: f64,
    /// Cells per empirical clamping pool.
    #[arg(long, default_value_t = 10_000)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Sidecar design file.
    #[arg(long)]
    pub design: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Model family: hm, rhm, or nhm.
    #[arg(long, default_value = "hm")]
    pub model: String,
    /// Beta concentration for the condition-level probabilities.
    #[arg(long, default_value_t = 0.1)]
    pub v: f64,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 2_000)]
    pub burn: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long, default_value_t = 5)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pin the measurement-noise standard deviation instead of sampling it.
    #[arg(long = "fix-sigma-m")]
    pub fix_sigma_m: Option<f64>,
    /// Z-score each protein globally before fitting.
    #[arg(long)]
    pub standardize: bool,
    /// Per-condition intrinsic variances instead of shared ones.
    #[arg(long)]
    pub varying_variance: bool,
    /// Also dump per-chain trace CSVs.
    #[arg(long)]
    pub dump_traces: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Directory holding summaries.json from `fit`.
    #[arg(long)]
    pub summaries: PathBuf,
    /// Output directory; defaults to the summaries directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fixed association threshold; jump-detected per run when absent.
    #[arg(long)]
    pub u1: Option<f64>,
    /// RHM association threshold; falls back to --u1.
    #[arg(long)]
    pub u1_prime: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub u2: f64,
    #[arg(long, default_value_t = 0.3)]
    pub u3: f64,
    #[arg(long, default_value_t = 0.8)]
    pub uf: f64,
    /// Print the jump-detected threshold suggestion for the pooled summary.
    #[arg(long)]
    pub suggest_u1: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Inferred network JSON from `infer`.
    #[arg(long)]
    pub inferred: PathBuf,
    /// Reference network file.
    #[arg(long)]
    pub reference: PathBuf,
    /// Optional path for the JSON report; the text table prints to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// TOML config file; paths inside are resolved relative to it.
    #[arg(long)]
    pub config: PathBuf,
}

/// Hex SHA-256 of the effective configuration; stamped into every artifact.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

fn hash_of<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_string(value).map_err(|e| Error::numerical(e.to_string()))?;
    Ok(config_hash(json.as_bytes()))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{name}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("{name}: {m}")),
        other => other,
    })
}

#[derive(Serialize)]
struct SimulateMeta<'a> {
    config_hash: &'a str,
    seed: u64,
    regime: &'a str,
    cells: usize,
    sigma_m: f64,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let regime = NoiseRegime::parse(&args.regime)
        .ok_or_else(|| Error::validation(format!("unknown regime `{}`", args.regime)))?;
    let network = io::load_network(&args.network)?;
    let design = io::load_design(&args.design, &network.panel)?;
    let config = SimConfig {
        cells_per_condition: args.cells,
        regime,
        sigma_m: args.sigma_m,
        pool_size: args.pool_size,
        tail_quantile: 0.05,
        seed: args.seed,
    };
    let (data, used_net) = stage("simulate", simulate_study(&network, &design, &config))?;
    ensure_dir(&args.out)?;
    let hash = hash_of(&config)?;
    io::save_dataset(&args.out.join("data.csv"), &data)?;
    io::save_design(&args.out.join("design.txt"), &design, &data.panel)?;
    io::save_network(&args.out.join("true_network.txt"), &used_net)?;
    let meta = SimulateMeta {
        config_hash: &hash,
        seed: args.seed,
        regime: regime.as_str(),
        cells: args.cells,
        sigma_m: args.sigma_m,
    };
    std::fs::write(
        args.out.join("simulate_meta.json"),
        serde_json::to_string_pretty(&meta).map_err(|e| Error::numerical(e.to_string()))?,
    )
    .map_err(|e| Error::io(args.out.join("simulate_meta.json"), e))?;
    Ok(())
}

/// The effective fit configuration, hashed into the summary file.
#[derive(Serialize)]
struct FitEffective<'a> {
    model: &'a str,
    hyperparameters: &'a Hyperparameters,
    sampler: &'a SamplerConfig,
}

pub fn fit_dataset(
    data: &crate::types::Dataset,
    model: ModelKind,
    hp: &Hyperparameters,
    config: &SamplerConfig,
    out: &Path,
    dump_traces: bool,
) -> Result<io::SummaryFile> {
    let traces = stage("fit", run_chains(data, hp, config, model))?;
    let summary = stage("fit", summarize(&traces))?;
    ensure_dir(out)?;
    if dump_traces {
        for (c, t) in traces.iter().enumerate() {
            write_trace_csv(&out.join(format!("trace_chain{c}.csv")), t, data.panel.names())?;
        }
    }
    let effective = FitEffective {
        model: model.as_str(),
        hyperparameters: hp,
        sampler: config,
    };
    let file = io::SummaryFile {
        format_version: io::SUMMARY_FORMAT_VERSION,
        model,
        proteins: data.panel.names().to_vec(),
        design: data.design.clone(),
        master_seed: config.seed,
        config_hash: hash_of(&effective)?,
        summary,
    };
    io::write_summary_file(&out.join("summaries.json"), &file)?;
    Ok(file)
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let model = ModelKind::parse(&args.model)
        .ok_or_else(|| Error::validation(format!("unknown model `{}`", args.model)))?;
    let data = io::load_dataset(&args.data, &args.design)?;
    let mut hp = Hyperparameters::defaults(data.n_proteins());
    hp.v = args.v;
    let config = SamplerConfig {
        iterations: args.iters,
        burn_in: args.burn,
        thin: args.thin,
        seed: args.seed,
        n_chains: args.chains,
        fix_sigma_m: args.fix_sigma_m,
        standardize: args.standardize,
        varying_intrinsic_variance: args.varying_variance,
    };
    fit_dataset(&data, model, &hp, &config, &args.out, args.dump_traces)?;
    Ok(())
}

pub fn infer_from_summaries(
    summary_file: &io::SummaryFile,
    th: &Thresholds,
    out: &Path,
    suggest_u1: bool,
) -> Result<io::NetworkFile> {
    let panel = crate::types::ProteinPanel::new(summary_file.proteins.clone())?;
    let s = &summary_file.summary;
    if suggest_u1 {
        let suggestion = detect_jump(&s.pooled.pair_mean)?;
        println!(
            "suggested u1 = {:.4} (largest gap {:.4}, gap ratio {:.2}{})",
            suggestion.u1,
            suggestion.largest_gap,
            suggestion.gap_ratio,
            if suggestion.low_confidence { ", LOW CONFIDENCE" } else { "" }
        );
    }
    let network = stage(
        "infer",
        assemble_network(&s.runs, &s.pooled, &summary_file.design, &panel, th, s.model),
    )?;
    ensure_dir(out)?;
    let file = io::NetworkFile {
        format_version: io::SUMMARY_FORMAT_VERSION,
        master_seed: summary_file.master_seed,
        config_hash: hash_of(&(&summary_file.config_hash, th))?,
        network,
    };
    io::write_network_file(&out.join("network.json"), &file)?;
    io::write_decisions_csv(&out.join("decisions.csv"), &file.network)?;
    io::write_dot(&out.join("network.dot"), &file.network)?;
    io::emit_sorted_w(&out.join("sorted_w.csv"), s, &summary_file.proteins)?;
    io::emit_cond_w(&out.join("cond_w.csv"), s, &summary_file.proteins)?;
    Ok(file)
}

pub fn cmd_infer(args: &InferArgs) -> Result<()> {
    let summary_file = io::read_summary_file(&args.summaries.join("summaries.json"))?;
    let th = Thresholds {
        u1: args.u1,
        u1_prime: args.u1_prime,
        u2: args.u2,
        u3: args.u3,
        u_f: args.uf,
    };
    let out = args.out.clone().unwrap_or_else(|| args.summaries.clone());
    infer_from_summaries(&summary_file, &th, &out, args.suggest_u1)?;
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let inferred = io::read_network_file(&args.inferred)?;
    let reference = io::load_network(&args.reference)?;
    let report = stage("eval", classify_edges(&inferred.network, &reference))?;
    print!("{}", io::render_report(&report, reference.panel.names()));
    if let Some(out) = &args.out {
        io::write_report(out, &report)?;
    }
    Ok(())
}

fn default_cells() -> usize {
    600
}
fn default_regime() -> String {
    "constant".into()
}
fn default_sigma_m() -> f64 {
    0.1
}
fn default_pool_size() -> usize {
    10_000
}
fn default_model() -> String {
    "hm".into()
}
fn default_iterations() -> usize {
    10_000
}
fn default_burn_in() -> usize {
    2_000
}
fn default_thin() -> usize {
    10
}
fn default_chains() -> usize {
    5
}
fn default_v() -> f64 {
    0.1
}
fn default_u2() -> f64 {
    0.1
}
fn default_u3() -> f64 {
    0.3
}
fn default_uf() -> f64 {
    0.8
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_regime")]
    pub regime: String,
    #[serde(default = "default_sigma_m")]
    pub sigma_m: f64,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        toml::from_str("").unwrap()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_v")]
    pub v: f64,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub varying_intrinsic_variance: bool,
    #[serde(default)]
    pub fix_sigma_m: Option<f64>,
    /// Optional hyperparameter overrides for sensitivity sweeps; scalars are
    /// broadcast over proteins.
    #[serde(default)]
    pub beta1: Option<f64>,
    #[serde(default)]
    pub beta2: Option<f64>,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
}

impl Default for FitSection {
    fn default() -> Self {
        toml::from_str("").unwrap()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    #[serde(default)]
    pub u1: Option<f64>,
    #[serde(default)]
    pub u1_prime: Option<f64>,
    #[serde(default = "default_u2")]
    pub u2: f64,
    #[serde(default = "default_u3")]
    pub u3: f64,
    #[serde(default = "default_uf")]
    pub u_f: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        toml::from_str("").unwrap()
    }
}

/// Pipeline config file schema (TOML). Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub network: PathBuf,
    pub design: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub simulate: SimSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.network, &mut cfg.design, &mut cfg.out] {
                if p.is_relative() {
                    *p = dir.join(&p);
                }
            }
        }
        Ok(cfg)
    }
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<()> {
    let hash = hash_of(cfg)?;
    let regime = NoiseRegime::parse(&cfg.simulate.regime)
        .ok_or_else(|| Error::validation(format!("unknown regime `{}`", cfg.simulate.regime)))?;
    let model = ModelKind::parse(&cfg.fit.model)
        .ok_or_else(|| Error::validation(format!("unknown model `{}`", cfg.fit.model)))?;

    let network = io::load_network(&cfg.network)?;
    let design = io::load_design(&cfg.design, &network.panel)?;
    let sim = SimConfig {
        cells_per_condition: cfg.simulate.cells,
        regime,
        sigma_m: cfg.simulate.sigma_m,
        pool_size: cfg.simulate.pool_size,
        tail_quantile: 0.05,
        seed: cfg.seed,
    };
    let (data, used_net) = stage("simulate", simulate_study(&network, &design, &sim))?;
    ensure_dir(&cfg.out)?;
    io::save_dataset(&cfg.out.join("data.csv"), &data)?;
    io::save_design(&cfg.out.join("design.txt"), &design, &data.panel)?;
    io::save_network(&cfg.out.join("true_network.txt"), &used_net)?;

    let mut hp = Hyperparameters::defaults(data.n_proteins());
    hp.v = cfg.fit.v;
    if let Some(b1) = cfg.fit.beta1 {
        hp.beta1 = b1;
    }
    if let Some(b2) = cfg.fit.beta2 {
        hp.beta2 = b2;
    }
    if let Some(a) = cfg.fit.a {
        hp.a = vec![a; data.n_proteins()];
    }
    if let Some(tau) = cfg.fit.tau {
        hp.tau = vec![tau; data.n_proteins()];
    }
    let sampler = SamplerConfig {
        iterations: cfg.fit.iterations,
        burn_in: cfg.fit.burn_in,
        thin: cfg.fit.thin,
        seed: cfg.seed,
        n_chains: cfg.fit.chains,
        fix_sigma_m: cfg.fit.fix_sigma_m,
        standardize: cfg.fit.standardize,
        varying_intrinsic_variance: cfg.fit.varying_intrinsic_variance,
    };
    let mut summary_file = fit_dataset(&data, model, &hp, &sampler, &cfg.out, false)?;
    // the pipeline artifact provenance is the whole pipeline config
    summary_file.config_hash = hash.clone();
    io::write_summary_file(&cfg.out.join("summaries.json"), &summary_file)?;

    let th = Thresholds {
        u1: cfg.thresholds.u1,
        u1_prime: cfg.thresholds.u1_prime,
        u2: cfg.thresholds.u2,
        u3: cfg.thresholds.u3,
        u_f: cfg.thresholds.u_f,
    };
    let net_file = infer_from_summaries(&summary_file, &th, &cfg.out, false)?;

    let report = stage("eval", classify_edges(&net_file.network, &used_net))?;
    io::write_report(&cfg.out.join("report.json"), &report)?;
    io::write_report_text(&cfg.out.join("report.txt"), &report, used_net.panel.names())?;
    print!("{}", io::render_report(&report, used_net.panel.names()));
    Ok(())
}

pub fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let cfg = PipelineConfig::load(&args.config)?;
    run_pipeline(&cfg)
}

pub fn execute(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    }
}

/// Parses arguments, dispatches, and maps errors to exit codes
/// (1 validation, 2 numerical, 3 I/O or parse).
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
