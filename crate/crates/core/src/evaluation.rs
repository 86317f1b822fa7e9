//! Scoring of an inferred network against a reference: edge taxonomy
//! (true / undetermined / reversed / missing / false) and Hamming distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{InferredNetwork, Verdict};
use crate::simulator::TrueNetwork;
use crate::types::pairs;

/// How one unordered pair compares between the inferred and the reference
/// network. Pairs in neither network are absent from the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeOutcome {
    /// Reference edge recovered with the correct direction.
    True,
    /// Reference edge recovered but left undirected.
    Undetermined,
    /// Reference edge recovered with the opposite direction.
    Reversed,
    /// Reference edge not recovered at all.
    Missing,
    /// Inferred pair with no reference edge.
    False,
}

impl EdgeOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeOutcome::True => "true",
            EdgeOutcome::Undetermined => "undetermined",
            EdgeOutcome::Reversed => "reversed",
            EdgeOutcome::Missing => "missing",
            EdgeOutcome::False => "false",
        }
    }

    /// Edit cost of this outcome under the per-pair operation model: one
    /// operation fixes any mismatched pair.
    pub fn cost(&self) -> usize {
        match self {
            EdgeOutcome::True => 0,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_true: usize,
    pub n_undetermined: usize,
    pub n_reversed: usize,
    pub n_missing: usize,
    pub n_false: usize,
    pub hamming: usize,
    /// (a, b, outcome) per scored pair, a < b.
    pub ledger: Vec<(usize, usize, EdgeOutcome)>,
}

impl EvalReport {
    pub fn n_reference_edges(&self) -> usize {
        self.n_true + self.n_undetermined + self.n_reversed + self.n_missing
    }
}

/// Classifies every pair touched by either network. The reference must be
/// directed and acyclic conventions do not matter here; only edge presence
/// and orientation are compared.
pub fn classify_edges(inferred: &InferredNetwork, reference: &TrueNetwork) -> Result<EvalReport> {
    if inferred.names != reference.panel.names() {
        return Err(Error::validation(
            "inferred and reference networks are over different protein panels",
        ));
    }
    let p = reference.panel.len();
    let mut ledger = Vec::new();
    for (a, b) in pairs(p) {
        let fwd = reference.has_edge(a, b);
        let bwd = reference.has_edge(b, a);
        if fwd && bwd {
            return Err(Error::validation(format!(
                "reference has edges in both directions between {a} and {b}"
            )));
        }
        let decision = inferred.decision_for(a, b);
        let outcome = match (fwd || bwd, decision) {
            (false, None) => continue,
            (false, Some(_)) => EdgeOutcome::False,
            (true, None) => EdgeOutcome::Missing,
            (true, Some(d)) => match d.verdict {
                Verdict::Undetermined => EdgeOutcome::Undetermined,
                Verdict::Forward if fwd => EdgeOutcome::True,
                Verdict::Reverse if bwd => EdgeOutcome::True,
                _ => EdgeOutcome::Reversed,
            },
        };
        ledger.push((a, b, outcome));
    }
    let count = |o: EdgeOutcome| ledger.iter().filter(|(_, _, x)| *x == o).count();
    let report = EvalReport {
        n_true: count(EdgeOutcome::True),
        n_undetermined: count(EdgeOutcome::Undetermined),
        n_reversed: count(EdgeOutcome::Reversed),
        n_missing: count(EdgeOutcome::Missing),
        n_false: count(EdgeOutcome::False),
        hamming: ledger.iter().map(|(_, _, o)| o.cost()).sum(),
        ledger,
    };
    Ok(report)
}

/// Minimum number of single-pair edit operations (add/remove an edge,
/// redirect or undirect it) turning the inferred network into the reference.
pub fn hamming_distance(inferred: &InferredNetwork, reference: &TrueNetwork) -> Result<usize> {
    Ok(classify_edges(inferred, reference)?.hamming)
}

/// Hamming distance recomputed from reference row counts; the per-pair
/// operation model makes it the plain sum of the mismatch columns.
pub fn hamming_from_counts(
    undetermined: usize,
    reversed: usize,
    missing: usize,
    false_pos: usize,
) -> usize {
    undetermined + reversed + missing + false_pos
}
