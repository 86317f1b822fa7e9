//! Core data types: the protein panel, the intervention design, and the
//! observed single-cell activity matrix grouped by experimental condition.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The set of measured proteins. Column order of every data block follows
/// the order of `names`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProteinPanel {
    names: Vec<String>,
}

impl ProteinPanel {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::validation("protein panel needs at least 2 proteins"));
        }
        for (idx, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::validation(format!("protein #{idx} has an empty name")));
            }
            if names[..idx].contains(n) {
                return Err(Error::validation(format!("duplicate protein name `{n}`")));
            }
        }
        Ok(ProteinPanel { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// How a targeted protein is clamped in an intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterventionMode {
    /// Clamp to the low tail of the protein's unperturbed distribution.
    Inhibit,
    /// Clamp to the high tail.
    Activate,
    /// General stimulation; no protein is clamped.
    General,
}

impl InterventionMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inhibit" => Some(InterventionMode::Inhibit),
            "activate" => Some(InterventionMode::Activate),
            "general" => Some(InterventionMode::General),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            InterventionMode::Inhibit => "inhibit",
            InterventionMode::Activate => "activate",
            InterventionMode::General => "general",
        }
    }
}

/// One experimental condition: a label plus the set of clamped proteins.
/// A `general` condition clamps nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    /// (protein index, mode); empty for general conditions.
    pub targets: Vec<(usize, InterventionMode)>,
}

impl Condition {
    pub fn general(label: impl Into<String>) -> Self {
        Condition {
            label: label.into(),
            targets: Vec::new(),
        }
    }

    pub fn targeted(label: impl Into<String>, protein: usize, mode: InterventionMode) -> Self {
        Condition {
            label: label.into(),
            targets: vec![(protein, mode)],
        }
    }

    /// True when `protein` is a named inhibit/activate target of this condition.
    pub fn controls(&self, protein: usize) -> bool {
        self.targets.iter().any(|&(t, _)| t == protein)
    }
}

/// The full intervention design: one entry per experimental condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionDesign {
    pub conditions: Vec<Condition>,
}

impl InterventionDesign {
    pub fn new(conditions: Vec<Condition>, n_proteins: usize) -> Result<Self> {
        if conditions.is_empty() {
            return Err(Error::validation("design needs at least one condition"));
        }
        for c in &conditions {
            for &(t, mode) in &c.targets {
                if t >= n_proteins {
                    return Err(Error::validation(format!(
                        "condition `{}` targets protein index {t} but panel has {n_proteins}",
                        c.label
                    )));
                }
                if mode == InterventionMode::General {
                    return Err(Error::validation(format!(
                        "condition `{}`: general conditions cannot name targets",
                        c.label
                    )));
                }
            }
        }
        Ok(InterventionDesign { conditions })
    }

    pub fn n_conditions(&self) -> usize {
        self.conditions.len()
    }

    /// Conditions (indices) under which `protein` is controlled.
    pub fn controlling_conditions(&self, protein: usize) -> Vec<usize> {
        self.conditions
            .iter()
            .enumerate()
            .filter(|(_, c)| c.controls(protein))
            .map(|(k, _)| k)
            .collect()
    }
}

/// Observed activity matrices, one block per condition. Block `k` has shape
/// (N_k, P): one row per cell, one column per protein.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub panel: ProteinPanel,
    pub design: InterventionDesign,
    pub blocks: Vec<Array2<f64>>,
}

impl Dataset {
    pub fn new(
        panel: ProteinPanel,
        design: InterventionDesign,
        blocks: Vec<Array2<f64>>,
    ) -> Result<Self> {
        if blocks.len() != design.n_conditions() {
            return Err(Error::validation(format!(
                "{} blocks but {} conditions",
                blocks.len(),
                design.n_conditions()
            )));
        }
        let p = panel.len();
        for (k, b) in blocks.iter().enumerate() {
            if b.ncols() != p {
                return Err(Error::validation(format!(
                    "block {k} has {} columns, expected {p}",
                    b.ncols()
                )));
            }
            if b.nrows() == 0 {
                return Err(Error::validation(format!("block {k} has no cells")));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("block {k} contains non-finite values")));
            }
        }
        Ok(Dataset {
            panel,
            design,
            blocks,
        })
    }

    pub fn n_proteins(&self) -> usize {
        self.panel.len()
    }

    pub fn n_conditions(&self) -> usize {
        self.design.n_conditions()
    }

    pub fn n_cells(&self, k: usize) -> usize {
        self.blocks[k].nrows()
    }

    pub fn total_cells(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    /// Global per-protein z-scoring across all conditions pooled. Centering is
    /// never done per condition: that would erase intervention-induced shifts.
    pub fn standardized(&self) -> Dataset {
        let p = self.n_proteins();
        let total = self.total_cells() as f64;
        let mut mean = vec![0.0; p];
        let mut sq = vec![0.0; p];
        for b in &self.blocks {
            for row in b.rows() {
                for (i, &v) in row.iter().enumerate() {
                    mean[i] += v;
                    sq[i] += v * v;
                }
            }
        }
        for i in 0..p {
            mean[i] /= total;
            sq[i] = (sq[i] / total - mean[i] * mean[i]).max(0.0).sqrt();
            if sq[i] == 0.0 {
                sq[i] = 1.0;
            }
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut out = b.clone();
                for mut row in out.rows_mut() {
                    for (i, v) in row.iter_mut().enumerate() {
                        *v = (*v - mean[i]) / sq[i];
                    }
                }
                out
            })
            .collect();
        Dataset {
            panel: self.panel.clone(),
            design: self.design.clone(),
            blocks,
        }
    }
}

/// Index of the unordered pair (i, j), i != j, in the canonical i < j listing.
pub fn pair_index(i: usize, j: usize, p: usize) -> usize {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(hi < p);
    // pairs (0,1), (0,2), ..., (0,p-1), (1,2), ...
    lo * p - lo * (lo + 1) / 2 + (hi - lo - 1)
}

/// Number of unordered pairs.
pub fn n_pairs(p: usize) -> usize {
    p * (p - 1) / 2
}

/// All unordered pairs (i, j) with i < j, in `pair_index` order.
pub fn pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |i| (i + 1..p).map(move |j| (i, j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn panel_rejects_duplicates_and_empties() {
        assert!(ProteinPanel::new(vec!["a".into(), "a".into()]).is_err());
        assert!(ProteinPanel::new(vec!["a".into(), "".into()]).is_err());
        assert!(ProteinPanel::new(vec!["a".into()]).is_err());
        assert!(ProteinPanel::new(vec!["a".into(), "b".into()]).is_ok());
    }

    #[test]
    fn design_rejects_out_of_range_targets() {
        let c = Condition::targeted("x", 5, InterventionMode::Inhibit);
        assert!(InterventionDesign::new(vec![c], 3).is_err());
    }

    #[test]
    fn dataset_rejects_bad_blocks() {
        let panel = ProteinPanel::new(vec!["a".into(), "b".into()]).unwrap();
        let design = InterventionDesign::new(vec![Condition::general("c1")], 2).unwrap();
        // wrong column count
        let bad = Dataset::new(panel.clone(), design.clone(), vec![arr2(&[[1.0], [2.0]])]);
        assert!(bad.is_err());
        // empty block
        let empty = Dataset::new(
            panel.clone(),
            design.clone(),
            vec![Array2::zeros((0, 2))],
        );
        assert!(empty.is_err());
        // non-finite
        let nf = Dataset::new(panel, design, vec![arr2(&[[1.0, f64::NAN]])]);
        assert!(nf.is_err());
    }

    #[test]
    fn pair_index_enumeration_matches() {
        let p = 7;
        for (idx, (i, j)) in pairs(p).enumerate() {
            assert_eq!(pair_index(i, j, p), idx);
            assert_eq!(pair_index(j, i, p), idx);
        }
        assert_eq!(n_pairs(p), pairs(p).count());
    }

    #[test]
    fn standardize_pools_conditions() {
        let panel = ProteinPanel::new(vec!["a".into(), "b".into()]).unwrap();
        let design = InterventionDesign::new(
            vec![Condition::general("c1"), Condition::general("c2")],
            2,
        )
        .unwrap();
        let ds = Dataset::new(
            panel,
            design,
            vec![arr2(&[[0.0, 2.0], [2.0, 4.0]]), arr2(&[[4.0, 6.0], [6.0, 8.0]])],
        )
        .unwrap();
        let z = ds.standardized();
        // pooled mean per protein is 3 and 5; check block means are shifted, not zeroed per block
        let m0: f64 = z.blocks[0].column(0).iter().sum::<f64>() / 2.0;
        let m1: f64 = z.blocks[1].column(0).iter().sum::<f64>() / 2.0;
        assert!(m0 < 0.0 && m1 > 0.0);
        let pooled: f64 = z.blocks.iter().flat_map(|b| b.column(0).to_vec()).sum();
        assert!(pooled.abs() < 1e-12);
    }
}
