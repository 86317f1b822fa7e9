//! File formats: dataset CSV with a sidecar design file, network edge lists,
//! posterior-summary JSON, and the emitted decision/plot/report artifacts.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so write -> load reproduces every value bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::inference::{InferredNetwork, Verdict};
use crate::model::ModelKind;
use crate::sampler::PosteriorSummary;
use crate::simulator::{Edge, TrueNetwork};
use crate::types::{
    pairs, Condition, Dataset, InterventionDesign, InterventionMode, ProteinPanel,
};

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a network file: `node NAME` lines fix the panel order, then
/// `parent child [coefficient]` edge lines by name. `#` starts a comment.
pub fn load_network(path: &Path) -> Result<TrueNetwork> {
    let mut names: Vec<String> = Vec::new();
    let mut edge_lines = Vec::new();
    for (n, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["node", name] => names.push((*name).to_string()),
            [_, _] | [_, _, _] => edge_lines.push((n, fields.iter().map(|s| s.to_string()).collect::<Vec<_>>())),
            _ => return Err(Error::parse(path, format!("line {n}: expected `node NAME` or `parent child [coeff]`"))),
        }
    }
    let panel = ProteinPanel::new(names).map_err(|e| Error::parse(path, e.to_string()))?;
    let mut edges = Vec::new();
    for (n, fields) in edge_lines {
        let lookup = |name: &str| {
            panel
                .index_of(name)
                .ok_or_else(|| Error::parse(path, format!("line {n}: unknown protein `{name}`")))
        };
        let parent = lookup(&fields[0])?;
        let child = lookup(&fields[1])?;
        let coeff = match fields.get(2) {
            None => None,
            Some(s) => Some(s.parse::<f64>().map_err(|_| {
                Error::parse(path, format!("line {n}: bad coefficient `{s}`"))
            })?),
        };
        edges.push(Edge { parent, child, coeff });
    }
    TrueNetwork::new(panel, edges).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn save_network(path: &Path, net: &TrueNetwork) -> Result<()> {
    let mut out = String::new();
    for name in net.panel.names() {
        writeln!(out, "node {name}").unwrap();
    }
    for e in &net.edges {
        match e.coeff {
            Some(c) => writeln!(out, "{} {} {c}", net.panel.name(e.parent), net.panel.name(e.child)),
            None => writeln!(out, "{} {}", net.panel.name(e.parent), net.panel.name(e.child)),
        }
        .unwrap();
    }
    write_text(path, &out)
}

/// Loads a design file: one condition per line, `label mode [target-name]`
/// with mode in {inhibit, activate, general}.
pub fn load_design(path: &Path, panel: &ProteinPanel) -> Result<InterventionDesign> {
    let mut conditions = Vec::new();
    for (n, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let (label, mode_s, target) = match fields.as_slice() {
            [label, mode] => (*label, *mode, None),
            [label, mode, target] => (*label, *mode, Some(*target)),
            _ => {
                return Err(Error::parse(
                    path,
                    format!("line {n}: expected `label mode [target]`"),
                ))
            }
        };
        let mode = InterventionMode::parse(mode_s)
            .ok_or_else(|| Error::parse(path, format!("line {n}: unknown mode `{mode_s}`")))?;
        let cond = match (mode, target) {
            (InterventionMode::General, None) => Condition::general(label),
            (InterventionMode::General, Some(_)) => {
                return Err(Error::parse(
                    path,
                    format!("line {n}: general conditions take no target"),
                ))
            }
            (_, Some(t)) => {
                let idx = panel.index_of(t).ok_or_else(|| {
                    Error::parse(path, format!("line {n}: unknown protein `{t}`"))
                })?;
                Condition::targeted(label, idx, mode)
            }
            (_, None) => {
                return Err(Error::parse(
                    path,
                    format!("line {n}: mode `{mode_s}` needs a target"),
                ))
            }
        };
        conditions.push(cond);
    }
    InterventionDesign::new(conditions, panel.len()).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn save_design(path: &Path, design: &InterventionDesign, panel: &ProteinPanel) -> Result<()> {
    let mut out = String::new();
    for c in &design.conditions {
        match c.targets.as_slice() {
            [] => writeln!(out, "{} general", c.label).unwrap(),
            [(t, mode)] => writeln!(out, "{} {} {}", c.label, mode.as_str(), panel.name(*t)).unwrap(),
            many => {
                for (t, mode) in many {
                    writeln!(out, "{} {} {}", c.label, mode.as_str(), panel.name(*t)).unwrap();
                }
            }
        }
    }
    write_text(path, &out)
}

/// Loads a dataset CSV (`condition,<protein>,...` header, one row per cell)
/// with its sidecar design file. Blocks follow design order.
pub fn load_dataset(data_path: &Path, design_path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(data_path).map_err(|e| Error::io(data_path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(data_path, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "condition" {
        return Err(Error::parse(
            data_path,
            "header must be `condition,<protein1>,...,<proteinP>`",
        ));
    }
    let panel = ProteinPanel::new(cols[1..].iter().map(|s| s.to_string()).collect())
        .map_err(|e| Error::parse(data_path, e.to_string()))?;
    let design = load_design(design_path, &panel)?;
    let p = panel.len();

    let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); design.n_conditions()];
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 1 {
            return Err(Error::parse(
                data_path,
                format!("row {n}: expected {} fields, found {}", p + 1, fields.len()),
            ));
        }
        let label = fields[0];
        let k = design
            .conditions
            .iter()
            .position(|c| c.label == label)
            .ok_or_else(|| Error::parse(data_path, format!("row {n}: unknown condition `{label}`")))?;
        let mut row = Vec::with_capacity(p);
        for f in &fields[1..] {
            if f.is_empty() {
                return Err(Error::parse(data_path, format!("row {n}: empty cell")));
            }
            row.push(f.parse::<f64>().map_err(|_| {
                Error::parse(data_path, format!("row {n}: non-numeric cell `{f}`"))
            })?);
        }
        rows[k].push(row);
    }

    let mut blocks = Vec::with_capacity(design.n_conditions());
    for (k, block_rows) in rows.into_iter().enumerate() {
        if block_rows.is_empty() {
            return Err(Error::parse(
                data_path,
                format!("condition `{}` has no rows", design.conditions[k].label),
            ));
        }
        let n = block_rows.len();
        let flat: Vec<f64> = block_rows.into_iter().flatten().collect();
        blocks.push(
            Array2::from_shape_vec((n, p), flat)
                .map_err(|e| Error::parse(data_path, e.to_string()))?,
        );
    }
    Dataset::new(panel, design, blocks).map_err(|e| Error::parse(data_path, e.to_string()))
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "condition,{}", data.panel.names().join(",")).unwrap();
    for (k, block) in data.blocks.iter().enumerate() {
        let label = &data.design.conditions[k].label;
        for row in block.rows() {
            write!(out, "{label}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    write_text(path, &out)
}

pub const SUMMARY_FORMAT_VERSION: u32 = 1;

/// On-disk posterior summary with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub format_version: u32,
    pub model: ModelKind,
    pub proteins: Vec<String>,
    pub design: InterventionDesign,
    pub master_seed: u64,
    pub config_hash: String,
    pub summary: PosteriorSummary,
}

pub fn write_summary_file(path: &Path, file: &SummaryFile) -> Result<()> {
    let json = serde_json::to_string_pretty(file).map_err(|e| Error::numerical(e.to_string()))?;
    write_text(path, &json)
}

pub fn read_summary_file(path: &Path) -> Result<SummaryFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SummaryFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    if file.format_version != SUMMARY_FORMAT_VERSION {
        return Err(Error::parse(
            path,
            format!("unsupported summary format version {}", file.format_version),
        ));
    }
    Ok(file)
}

/// Inferred network with provenance, JSON on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub format_version: u32,
    pub master_seed: u64,
    pub config_hash: String,
    pub network: InferredNetwork,
}

pub fn write_network_file(path: &Path, file: &NetworkFile) -> Result<()> {
    let json = serde_json::to_string_pretty(file).map_err(|e| Error::numerical(e.to_string()))?;
    write_text(path, &json)
}

pub fn read_network_file(path: &Path) -> Result<NetworkFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: NetworkFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    if file.format_version != SUMMARY_FORMAT_VERSION {
        return Err(Error::parse(
            path,
            format!("unsupported network format version {}", file.format_version),
        ));
    }
    Ok(file)
}

/// Writes the sorted overall means: `rank,protein_a,protein_b,w`, ascending
/// in `w` (the data behind jump plots).
pub fn emit_sorted_w(path: &Path, summary: &PosteriorSummary, names: &[String]) -> Result<()> {
    let p = summary.p;
    let mut rows: Vec<(usize, usize, f64)> = pairs(p)
        .enumerate()
        .map(|(idx, (a, b))| (a, b, summary.pooled.pair_mean[idx]))
        .collect();
    rows.sort_by(|x, y| x.2.partial_cmp(&y.2).unwrap().then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    let mut out = String::from("rank,protein_a,protein_b,w\n");
    for (rank, (a, b, w)) in rows.iter().enumerate() {
        writeln!(out, "{},{},{},{w}", rank + 1, names[*a], names[*b]).unwrap();
    }
    write_text(path, &out)
}

/// Writes the per-(ordered pair, condition) means:
/// `condition,protein_i,protein_j,w` (the data behind per-condition boxplots).
/// No file is written for NHM summaries, which carry no condition level.
pub fn emit_cond_w(path: &Path, summary: &PosteriorSummary, names: &[String]) -> Result<bool> {
    let Some(cm) = &summary.pooled.cond_mean else {
        return Ok(false);
    };
    let p = summary.p;
    let mut out = String::from("condition,protein_i,protein_j,w\n");
    for k in 0..summary.n_conditions {
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    writeln!(out, "{k},{},{},{}", names[i], names[j], cm[[k, i, j]]).unwrap();
                }
            }
        }
    }
    write_text(path, &out)?;
    Ok(true)
}

/// Tabular decisions file, one row per retained pair.
pub fn write_decisions_csv(path: &Path, net: &InferredNetwork) -> Result<()> {
    let mut out = String::from(
        "protein_a,protein_b,case,verdict,votes_forward,votes_reverse,votes_undetermined,association_frequency\n",
    );
    for d in &net.decisions {
        let verdict = match d.verdict {
            Verdict::Forward => "forward",
            Verdict::Reverse => "reverse",
            Verdict::Undetermined => "undetermined",
        };
        writeln!(
            out,
            "{},{},{},{verdict},{},{},{},{}",
            net.names[d.a],
            net.names[d.b],
            d.case.as_str(),
            d.votes_forward,
            d.votes_reverse,
            d.votes_undetermined,
            d.association_frequency
        )
        .unwrap();
    }
    write_text(path, &out)
}

/// DOT digraph; undetermined edges render undirected via `dir=none`.
pub fn write_dot(path: &Path, net: &InferredNetwork) -> Result<()> {
    let mut out = String::from("digraph inferred {\n");
    for name in &net.names {
        writeln!(out, "    \"{name}\";").unwrap();
    }
    for d in &net.decisions {
        let (a, b) = (&net.names[d.a], &net.names[d.b]);
        match d.verdict {
            Verdict::Forward => writeln!(out, "    \"{a}\" -> \"{b}\";").unwrap(),
            Verdict::Reverse => writeln!(out, "    \"{b}\" -> \"{a}\";").unwrap(),
            Verdict::Undetermined => {
                writeln!(out, "    \"{a}\" -> \"{b}\" [dir=none];").unwrap()
            }
        }
    }
    out.push_str("}\n");
    write_text(path, &out)
}

/// Plain-text score table mirroring the standard comparison columns.
pub fn render_report(report: &EvalReport, names: &[String]) -> String {
    let mut out = String::new();
    writeln!(out, "True Undetermined Reversed Missing False Hamming").unwrap();
    writeln!(
        out,
        "{:>4} {:>12} {:>8} {:>7} {:>5} {:>7}",
        report.n_true,
        report.n_undetermined,
        report.n_reversed,
        report.n_missing,
        report.n_false,
        report.hamming
    )
    .unwrap();
    out.push('\n');
    for (a, b, outcome) in &report.ledger {
        writeln!(out, "{} -- {}: {}", names[*a], names[*b], outcome.as_str()).unwrap();
    }
    out
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::numerical(e.to_string()))?;
    write_text(path, &json)
}

pub fn write_report_text(path: &Path, report: &EvalReport, names: &[String]) -> Result<()> {
    write_text(path, &render_report(report, names))
}
