//! Two-step network inference from posterior summaries: association selection
//! by thresholding the overall inclusion probabilities, then direction calls
//! from the drops in condition-level probabilities under interventions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hyperparameters, ModelKind};
use crate::sampler::{run_chains, summarize, RunSummary, SamplerConfig};
use crate::types::{pairs, Dataset, InterventionDesign, ProteinPanel};

/// Decision thresholds. `u1`/`u1_prime` left unset means the association
/// threshold is suggested per run by [`detect_jump`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Association threshold on the overall posterior means (HM/NHM).
    pub u1: Option<f64>,
    /// Association threshold under RHM; falls back to `u1`.
    pub u1_prime: Option<f64>,
    /// Weak-stream floor: a stream whose values all fall below is ignored.
    pub u2: f64,
    /// Drop threshold for the condition-level probabilities.
    pub u3: f64,
    /// Fraction of runs that must select a pair for it to be retained.
    pub u_f: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            u1: None,
            u1_prime: None,
            u2: 0.1,
            u3: 0.3,
            u_f: 0.8,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::validation(format!("threshold {name} = {x} outside [0, 1]")))
            }
        };
        if let Some(u1) = self.u1 {
            unit("u1", u1)?;
        }
        if let Some(u1p) = self.u1_prime {
            unit("u1_prime", u1p)?;
        }
        unit("u2", self.u2)?;
        unit("u3", self.u3)?;
        unit("u_f", self.u_f)
    }

    /// Association threshold for the given model family, if fixed by the user.
    pub fn assoc_threshold(&self, model: ModelKind) -> Option<f64> {
        match model {
            ModelKind::Rhm => self.u1_prime.or(self.u1),
            _ => self.u1,
        }
    }
}

/// Advisory association threshold read off the sorted overall means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSuggestion {
    pub u1: f64,
    pub largest_gap: f64,
    /// Largest upper-half gap over the median gap; below 2 the sequence has
    /// no clear jump and the suggestion is low-confidence.
    pub gap_ratio: f64,
    pub low_confidence: bool,
}

/// Finds the largest gap in the upper half of the sorted sequence and
/// suggests its midpoint. Gaps in the lower half are noise-floor spacing and
/// never considered.
pub fn detect_jump(w: &[f64]) -> Result<JumpSuggestion> {
    if w.len() < 2 {
        return Err(Error::validation("jump detection needs at least 2 values"));
    }
    let mut v = w.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let gaps: Vec<f64> = (0..n - 1).map(|i| v[i + 1] - v[i]).collect();
    let start = (n - 1) / 2;
    let (best, &largest_gap) = gaps[start..]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, g)| (start + i, g))
        .unwrap();
    let mut sorted_gaps = gaps.clone();
    sorted_gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_gap = if sorted_gaps.len() % 2 == 1 {
        sorted_gaps[sorted_gaps.len() / 2]
    } else {
        0.5 * (sorted_gaps[sorted_gaps.len() / 2 - 1] + sorted_gaps[sorted_gaps.len() / 2])
    };
    let gap_ratio = if median_gap > 0.0 {
        largest_gap / median_gap
    } else if largest_gap > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(JumpSuggestion {
        u1: 0.5 * (v[best] + v[best + 1]),
        largest_gap,
        gap_ratio,
        low_confidence: gap_ratio < 2.0,
    })
}

/// Association step over multiple runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociationSelection {
    pub p: usize,
    /// Threshold applied in each run (fixed or jump-suggested).
    pub u1_used: Vec<f64>,
    pub low_confidence: Vec<bool>,
    /// Per run, per canonical pair: whether the pair cleared the threshold.
    pub per_run: Vec<Vec<bool>>,
    /// Fraction of runs selecting each pair.
    pub frequency: Vec<f64>,
    /// Pairs selected in at least `u_f` of the runs.
    pub selected: Vec<bool>,
}

/// Step 1: per run keep pairs with overall mean above the threshold, then
/// keep pairs selected in at least `u_f` of the runs.
pub fn select_associations(
    runs: &[RunSummary],
    p: usize,
    th: &Thresholds,
    model: ModelKind,
) -> Result<AssociationSelection> {
    th.validate()?;
    if runs.is_empty() {
        return Err(Error::validation("no run summaries"));
    }
    let n_pairs = crate::types::n_pairs(p);
    let fixed = th.assoc_threshold(model);
    let mut u1_used = Vec::with_capacity(runs.len());
    let mut low_confidence = Vec::with_capacity(runs.len());
    let mut per_run: Vec<Vec<bool>> = Vec::with_capacity(runs.len());
    for run in runs {
        if run.pair_mean.len() != n_pairs {
            return Err(Error::validation("run summary size does not match the panel"));
        }
        let (u1, low) = match fixed {
            Some(u1) => (u1, false),
            None => {
                let s = detect_jump(&run.pair_mean)?;
                (s.u1, s.low_confidence)
            }
        };
        u1_used.push(u1);
        low_confidence.push(low);
        per_run.push(run.pair_mean.iter().map(|&m| m > u1).collect());
    }
    let frequency: Vec<f64> = (0..n_pairs)
        .map(|idx| {
            per_run.iter().filter(|r| r[idx]).count() as f64 / runs.len() as f64
        })
        .collect();
    let selected = frequency.iter().map(|&f| f >= th.u_f).collect();
    Ok(AssociationSelection {
        p,
        u1_used,
        low_confidence,
        per_run,
        frequency,
        selected,
    })
}

/// Which interventions touch a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseLabel {
    /// Exactly one condition controls one of the proteins.
    SingleCondition,
    /// Several conditions, all controlling the same protein.
    OneProtein,
    /// Both proteins are controlled somewhere.
    BothProteins,
    /// Neither protein is ever controlled; no direction can be inferred.
    Unperturbed,
}

impl CaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::SingleCondition => "single-condition",
            CaseLabel::OneProtein => "one-protein",
            CaseLabel::BothProteins => "both-proteins",
            CaseLabel::Unperturbed => "unperturbed",
        }
    }
}

/// Conditions controlling `a` and conditions controlling `b`.
pub fn condition_sets(design: &InterventionDesign, a: usize, b: usize) -> (Vec<usize>, Vec<usize>) {
    (
        design.controlling_conditions(a),
        design.controlling_conditions(b),
    )
}

/// Case membership of a pair under a design. Every pair falls in exactly one
/// case.
pub fn case_of(design: &InterventionDesign, a: usize, b: usize) -> CaseLabel {
    let (sa, sb) = condition_sets(design, a, b);
    let union: std::collections::BTreeSet<usize> = sa.iter().chain(&sb).copied().collect();
    if union.is_empty() {
        CaseLabel::Unperturbed
    } else if !sa.is_empty() && !sb.is_empty() {
        CaseLabel::BothProteins
    } else if union.len() == 1 {
        CaseLabel::SingleCondition
    } else {
        CaseLabel::OneProtein
    }
}

/// Direction read off one stream of condition-level means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    /// (parent, child) when the stream commits to a direction.
    pub verdict: Option<(usize, usize)>,
    pub max_w: f64,
    /// True when every value sits below the weak-stream floor.
    pub too_weak: bool,
}

/// Applies the case logic to one stream `ws` (one value per condition) for
/// the pair (a, b).
fn stream_verdict(
    ws: &[f64],
    sa: &[usize],
    sb: &[usize],
    a: usize,
    b: usize,
    th: &Thresholds,
) -> StreamReport {
    let max_w = ws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if ws.iter().all(|&w| w < th.u2) {
        return StreamReport {
            verdict: None,
            max_w,
            too_weak: true,
        };
    }
    let verdict = match (sa.is_empty(), sb.is_empty()) {
        (true, true) => None,
        (false, true) | (true, false) => {
            // one controlled protein: a drop under every controlling
            // condition makes it the child, no drop anywhere makes it the
            // parent, anything mixed stays silent
            let (c, other, s) = if sb.is_empty() { (a, b, sa) } else { (b, a, sb) };
            let all_drop = s.iter().all(|&k| max_w - ws[k] > th.u3);
            let none_drop = s.iter().all(|&k| max_w - ws[k] <= th.u3);
            if all_drop {
                Some((other, c))
            } else if none_drop {
                Some((c, other))
            } else {
                None
            }
        }
        (false, false) => {
            // both controlled: compare the two controlled groups pairwise
            let diffs: Vec<f64> = sa
                .iter()
                .flat_map(|&k1| sb.iter().map(move |&k2| (k1, k2)))
                .map(|(k1, k2)| ws[k1] - ws[k2])
                .collect();
            if diffs.iter().all(|&d| d > th.u3) {
                Some((a, b))
            } else if diffs.iter().all(|&d| d <= -th.u3) {
                Some((b, a))
            } else {
                None
            }
        }
    };
    StreamReport {
        verdict,
        max_w,
        too_weak: false,
    }
}

/// Final call on a pair: forward is a -> b for the canonical pair (a, b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Forward,
    Reverse,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionDecision {
    pub a: usize,
    pub b: usize,
    pub case: CaseLabel,
    pub verdict: Verdict,
    pub votes_forward: usize,
    pub votes_reverse: usize,
    pub votes_undetermined: usize,
    /// Fraction of runs selecting the pair in step 1.
    pub association_frequency: f64,
    /// Stream reports evaluated on the pooled summary (two streams for HM,
    /// one for RHM, none for NHM).
    pub streams: Vec<StreamReport>,
}

fn combine(streams: &[StreamReport], a: usize, b: usize) -> Verdict {
    let verdicts: Vec<(usize, usize)> = streams.iter().filter_map(|s| s.verdict).collect();
    match verdicts.as_slice() {
        [] => Verdict::Undetermined,
        [v] => to_verdict(*v, a, b),
        [v1, v2] => {
            if v1 == v2 {
                to_verdict(*v1, a, b)
            } else {
                Verdict::Undetermined
            }
        }
        _ => Verdict::Undetermined,
    }
}

fn to_verdict((parent, child): (usize, usize), a: usize, _b: usize) -> Verdict {
    debug_assert!(parent != child);
    if parent == a {
        Verdict::Forward
    } else {
        Verdict::Reverse
    }
}

/// Step 2 for one run: direction call for the pair (a, b) from the run's
/// condition-level posterior means.
pub fn classify_direction(
    run: &RunSummary,
    design: &InterventionDesign,
    th: &Thresholds,
    model: ModelKind,
    a: usize,
    b: usize,
) -> Result<DirectionDecision> {
    th.validate()?;
    if a == b {
        return Err(Error::validation("direction call needs two distinct proteins"));
    }
    let case = case_of(design, a, b);
    let (sa, sb) = condition_sets(design, a, b);
    let k = design.n_conditions();

    let streams: Vec<StreamReport> = match (&run.cond_mean, model) {
        (None, _) | (_, ModelKind::Nhm) => Vec::new(),
        (Some(cm), ModelKind::Rhm) => {
            let ws: Vec<f64> = (0..k).map(|kk| cm[[kk, a, b]]).collect();
            vec![stream_verdict(&ws, &sa, &sb, a, b, th)]
        }
        (Some(cm), ModelKind::Hm) => {
            let ws_ab: Vec<f64> = (0..k).map(|kk| cm[[kk, a, b]]).collect();
            let ws_ba: Vec<f64> = (0..k).map(|kk| cm[[kk, b, a]]).collect();
            vec![
                stream_verdict(&ws_ab, &sa, &sb, a, b, th),
                stream_verdict(&ws_ba, &sa, &sb, a, b, th),
            ]
        }
    };

    let verdict = if case == CaseLabel::Unperturbed || streams.is_empty() {
        Verdict::Undetermined
    } else {
        combine(&streams, a, b)
    };
    Ok(DirectionDecision {
        a,
        b,
        case,
        verdict,
        votes_forward: (verdict == Verdict::Forward) as usize,
        votes_reverse: (verdict == Verdict::Reverse) as usize,
        votes_undetermined: (verdict == Verdict::Undetermined) as usize,
        association_frequency: 1.0,
        streams,
    })
}

/// A partially directed network over the panel: one decision per retained
/// unordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredNetwork {
    pub names: Vec<String>,
    pub decisions: Vec<DirectionDecision>,
}

impl InferredNetwork {
    pub fn decision_for(&self, a: usize, b: usize) -> Option<&DirectionDecision> {
        let (lo, hi) = (a.min(b), a.max(b));
        self.decisions.iter().find(|d| d.a == lo && d.b == hi)
    }
}

/// Full two-step inference over multiple runs: associations by `u_f` voting,
/// then per-pair direction by majority vote over the runs that selected the
/// pair (ties stay undetermined).
pub fn assemble_network(
    runs: &[RunSummary],
    pooled: &RunSummary,
    design: &InterventionDesign,
    panel: &ProteinPanel,
    th: &Thresholds,
    model: ModelKind,
) -> Result<InferredNetwork> {
    let p = panel.len();
    let selection = select_associations(runs, p, th, model)?;
    let mut decisions = Vec::new();
    for (idx, (a, b)) in pairs(p).enumerate() {
        if !selection.selected[idx] {
            continue;
        }
        let mut fwd = 0;
        let mut rev = 0;
        let mut und = 0;
        let mut case = case_of(design, a, b);
        for (r, run) in runs.iter().enumerate() {
            if !selection.per_run[r][idx] {
                continue;
            }
            let d = classify_direction(run, design, th, model, a, b)?;
            case = d.case;
            match d.verdict {
                Verdict::Forward => fwd += 1,
                Verdict::Reverse => rev += 1,
                Verdict::Undetermined => und += 1,
            }
        }
        let verdict = if fwd > rev {
            Verdict::Forward
        } else if rev > fwd {
            Verdict::Reverse
        } else {
            Verdict::Undetermined
        };
        let pooled_call = classify_direction(pooled, design, th, model, a, b)?;
        decisions.push(DirectionDecision {
            a,
            b,
            case,
            verdict,
            votes_forward: fwd,
            votes_reverse: rev,
            votes_undetermined: und,
            association_frequency: selection.frequency[idx],
            streams: pooled_call.streams,
        });
    }
    Ok(InferredNetwork {
        names: panel.names().to_vec(),
        decisions,
    })
}

/// Over-liberal null baseline for the association threshold: permute each
/// protein's observations independently within every condition block,
/// refit, and report the largest overall posterior mean.
pub fn permutation_baseline(
    data: &Dataset,
    hp: &Hyperparameters,
    config: &SamplerConfig,
    model: ModelKind,
) -> Result<f64> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    // dedicated substream well away from the chain indices
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::sampler::chain_seed(
        config.seed,
        usize::MAX,
    ));
    let mut permuted = data.clone();
    for block in &mut permuted.blocks {
        let n = block.nrows();
        for j in 0..block.ncols() {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let col: Vec<f64> = block.column(j).to_vec();
            for (row, &src) in idx.iter().enumerate() {
                block[[row, j]] = col[src];
            }
        }
    }
    let traces = run_chains(&permuted, hp, config, model)?;
    let summary = summarize(&traces)?;
    Ok(summary
        .pooled
        .pair_mean
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Condition, InterventionMode};
    use approx::assert_abs_diff_eq;
    use ndarray::Array3;

    #[test]
    fn jump_midpoint_matches_hand_example() {
        let s = detect_jump(&[0.02, 0.05, 0.08, 0.55, 0.9]).unwrap();
        assert_abs_diff_eq!(s.u1, 0.315, epsilon = 1e-12);
        assert!(s.u1 > 0.08 && s.u1 < 0.55);
        assert!(!s.low_confidence);
    }

    #[test]
    fn jump_on_uniform_ramp_is_low_confidence() {
        let ramp: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let s = detect_jump(&ramp).unwrap();
        assert!(s.low_confidence);
        assert!(detect_jump(&[0.5]).is_err());
    }

    #[test]
    fn jump_ignores_noise_floor_gaps() {
        // huge gap in the lower half must not win
        let s = detect_jump(&[0.01, 0.4, 0.45, 0.5, 0.8, 0.85]).unwrap();
        assert!(s.u1 > 0.5, "suggested {}", s.u1);
    }

    fn single_run(pair_mean: Vec<f64>) -> RunSummary {
        RunSummary {
            seed: 0,
            n_draws: 1,
            pair_mean,
            cond_mean: None,
        }
    }

    #[test]
    fn association_threshold_and_voting() {
        // 4 proteins -> 6 pairs; pad the hand example with zeros
        let th = Thresholds {
            u1: Some(0.4),
            ..Default::default()
        };
        let run = single_run(vec![0.9, 0.85, 0.35, 0.05, 0.0, 0.0]);
        let sel = select_associations(std::slice::from_ref(&run), 4, &th, ModelKind::Hm).unwrap();
        assert_eq!(sel.selected.iter().filter(|&&s| s).count(), 2);

        // selected in 4 of 5 runs passes u_f = 0.8, 3 of 5 fails
        let hot = single_run(vec![0.9, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let cold = single_run(vec![0.1, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let four = vec![hot.clone(), hot.clone(), hot.clone(), hot.clone(), cold.clone()];
        let sel = select_associations(&four, 4, &th, ModelKind::Hm).unwrap();
        assert!(sel.selected[0]);
        let three = vec![hot.clone(), hot.clone(), hot, cold.clone(), cold];
        let sel = select_associations(&three, 4, &th, ModelKind::Hm).unwrap();
        assert!(!sel.selected[0]);

        // u1 = 1 selects nothing
        let th1 = Thresholds {
            u1: Some(1.0),
            ..Default::default()
        };
        let run = single_run(vec![0.9, 0.85, 0.35, 0.05, 0.0, 0.0]);
        let sel = select_associations(&[run], 4, &th1, ModelKind::Hm).unwrap();
        assert!(sel.selected.iter().all(|&s| !s));
    }

    #[test]
    fn raising_u1_never_adds_associations() {
        let run = single_run(vec![0.9, 0.85, 0.35, 0.05, 0.2, 0.6]);
        let mut prev = usize::MAX;
        for u1 in [0.0, 0.1, 0.3, 0.5, 0.7, 0.95] {
            let th = Thresholds {
                u1: Some(u1),
                ..Default::default()
            };
            let sel = select_associations(std::slice::from_ref(&run), 4, &th, ModelKind::Hm).unwrap();
            let n = sel.selected.iter().filter(|&&s| s).count();
            assert!(n <= prev);
            prev = n;
        }
    }

    /// The 11-protein panel and 9-condition design used throughout the tests,
    /// 0-based: Raf 0, Mek 1, Plcg 2, PIP2 3, PIP3 4, Erk 5, Akt 6, PKA 7,
    /// PKC 8, P38 9, Jnk 10.
    pub(crate) fn reference_design() -> InterventionDesign {
        InterventionDesign::new(
            vec![
                Condition::general("cd3cd28"),
                Condition::general("icam2"),
                Condition::targeted("aktinh", 6, InterventionMode::Inhibit),
                Condition::targeted("g0076", 8, InterventionMode::Inhibit),
                Condition::targeted("psitect", 3, InterventionMode::Inhibit),
                Condition::targeted("u0126", 1, InterventionMode::Inhibit),
                Condition::targeted("ly", 6, InterventionMode::Inhibit),
                Condition::targeted("pma", 8, InterventionMode::Activate),
                Condition::targeted("b2camp", 7, InterventionMode::Activate),
            ],
            11,
        )
        .unwrap()
    }

    #[test]
    fn case_partition_matches_known_memberships() {
        let design = reference_design();
        // reference memberships, 1-based protein ids
        let case1 = [(1, 2), (1, 8), (2, 6), (3, 4), (4, 5), (6, 8), (8, 10), (8, 11)];
        let case2 = [(1, 9), (3, 9), (5, 7), (6, 7), (9, 10), (9, 11)];
        let case3 = [(2, 9), (4, 9), (7, 8), (8, 9)];
        for &(i, j) in &case1 {
            assert_eq!(case_of(&design, i - 1, j - 1), CaseLabel::SingleCondition, "({i},{j})");
        }
        for &(i, j) in &case2 {
            assert_eq!(case_of(&design, i - 1, j - 1), CaseLabel::OneProtein, "({i},{j})");
        }
        for &(i, j) in &case3 {
            assert_eq!(case_of(&design, i - 1, j - 1), CaseLabel::BothProteins, "({i},{j})");
        }
        // a pair of never-controlled proteins: Plcg (2) and Erk (5)
        assert_eq!(case_of(&design, 2, 5), CaseLabel::Unperturbed);
        // every pair falls in exactly one case by construction; spot-check
        // the partition is total
        for (a, b) in pairs(11) {
            let _ = case_of(&design, a, b);
        }
    }

    fn run_with_cond(p: usize, k: usize, fill: impl Fn(usize, usize, usize) -> f64) -> RunSummary {
        let cm = Array3::from_shape_fn((k, p, p), |(kk, i, j)| fill(kk, i, j));
        RunSummary {
            seed: 0,
            n_draws: 1,
            pair_mean: vec![0.9; crate::types::n_pairs(p)],
            cond_mean: Some(cm),
        }
    }

    #[test]
    fn drop_under_inhibition_points_at_the_child() {
        // pair (PIP3 4, Akt 6): Akt inhibited in conditions 2 and 6 (0-based);
        // both streams drop there -> PIP3 -> Akt
        let design = reference_design();
        let th = Thresholds::default();
        let run = run_with_cond(11, 9, |k, _, _| if k == 2 || k == 6 { 0.05 } else { 0.9 });
        let d = classify_direction(&run, &design, &th, ModelKind::Hm, 4, 6).unwrap();
        assert_eq!(d.case, CaseLabel::OneProtein);
        assert_eq!(d.verdict, Verdict::Forward);

        // mirrored order gives the mirrored verdict
        let d = classify_direction(&run, &design, &th, ModelKind::Hm, 6, 4).unwrap();
        assert_eq!(d.verdict, Verdict::Reverse);
    }

    #[test]
    fn conflicting_streams_stay_undetermined() {
        // stream (a on b) drops under the interventions, stream (b on a)
        // does not: one says child, the other says parent
        let design = reference_design();
        let th = Thresholds::default();
        let run = run_with_cond(11, 9, |k, i, j| {
            if i == 4 && j == 6 && (k == 2 || k == 6) {
                0.05
            } else {
                0.9
            }
        });
        let d = classify_direction(&run, &design, &th, ModelKind::Hm, 4, 6).unwrap();
        assert_eq!(d.verdict, Verdict::Undetermined);
    }

    #[test]
    fn weak_stream_is_ignored_and_the_other_decides() {
        let design = reference_design();
        let th = Thresholds::default();
        // stream (4 on 6) entirely below u2; stream (6 on 4) drops under the
        // Akt inhibitions
        let run = run_with_cond(11, 9, |k, i, j| {
            if (i == 4 && j == 6) || k == 2 || k == 6 {
                0.05
            } else {
                0.9
            }
        });
        let d = classify_direction(&run, &design, &th, ModelKind::Hm, 4, 6).unwrap();
        assert!(d.streams[0].too_weak);
        assert_eq!(d.verdict, Verdict::Forward);
    }

    #[test]
    fn unperturbed_pairs_are_undetermined() {
        let design = reference_design();
        let th = Thresholds::default();
        let run = run_with_cond(11, 9, |_, _, _| 0.9);
        let d = classify_direction(&run, &design, &th, ModelKind::Hm, 2, 5).unwrap();
        assert_eq!(d.case, CaseLabel::Unperturbed);
        assert_eq!(d.verdict, Verdict::Undetermined);
    }

    #[test]
    fn no_drop_makes_the_controlled_protein_the_parent() {
        // single-condition pair (Raf 0, Mek 1), Mek inhibited in condition 5;
        // no drop anywhere -> Mek is the parent
        let design = reference_design();
        let th = Thresholds::default();
        let run = run_with_cond(11, 9, |_, _, _| 0.9);
        let d = classify_direction(&run, &design, &th, ModelKind::Hm, 0, 1).unwrap();
        assert_eq!(d.case, CaseLabel::SingleCondition);
        assert_eq!(d.verdict, Verdict::Reverse); // 1 -> 0
    }

    #[test]
    fn both_controlled_pairwise_differences() {
        // pair (Mek 1, PKC 8): Mek controlled in condition 5, PKC in 3 and 7.
        // high when Mek controlled, low when PKC controlled -> Mek -> PKC
        let design = reference_design();
        let th = Thresholds::default();
        let run = run_with_cond(11, 9, |k, _, _| match k {
            5 => 0.9,
            3 | 7 => 0.1,
            _ => 0.5,
        });
        let d = classify_direction(&run, &design, &th, ModelKind::Hm, 1, 8).unwrap();
        assert_eq!(d.case, CaseLabel::BothProteins);
        assert_eq!(d.verdict, Verdict::Forward);

        // shrink the separation below u3: undetermined
        let run = run_with_cond(11, 9, |k, _, _| match k {
            5 => 0.55,
            3 | 7 => 0.45,
            _ => 0.5,
        });
        let d = classify_direction(&run, &design, &th, ModelKind::Hm, 1, 8).unwrap();
        assert_eq!(d.verdict, Verdict::Undetermined);
    }

    #[test]
    fn raising_u3_never_directs_a_both_controlled_pair() {
        let design = reference_design();
        let run = run_with_cond(11, 9, |k, _, _| match k {
            5 => 0.9,
            3 | 7 => 0.3,
            _ => 0.6,
        });
        let mut was_directed = true;
        for u3 in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let th = Thresholds {
                u3,
                ..Default::default()
            };
            let d = classify_direction(&run, &design, &th, ModelKind::Hm, 1, 8).unwrap();
            let directed = d.verdict != Verdict::Undetermined;
            assert!(!directed || was_directed, "u3 = {u3} re-directed the pair");
            was_directed = directed;
        }
    }

    #[test]
    fn rhm_uses_a_single_stream() {
        let design = reference_design();
        let th = Thresholds::default();
        let run = run_with_cond(11, 9, |k, _, _| if k == 2 || k == 6 { 0.05 } else { 0.9 });
        let d = classify_direction(&run, &design, &th, ModelKind::Rhm, 4, 6).unwrap();
        assert_eq!(d.streams.len(), 1);
        assert_eq!(d.verdict, Verdict::Forward);
    }

    #[test]
    fn nhm_never_directs() {
        let design = reference_design();
        let th = Thresholds::default();
        let run = run_with_cond(11, 9, |_, _, _| 0.9);
        let d = classify_direction(&run, &design, &th, ModelKind::Nhm, 4, 6).unwrap();
        assert!(d.streams.is_empty());
        assert_eq!(d.verdict, Verdict::Undetermined);
    }

    #[test]
    fn majority_vote_and_ties() {
        let design = reference_design();
        let panel = ProteinPanel::new((0..11).map(|i| format!("p{i}")).collect()).unwrap();
        let th = Thresholds {
            u1: Some(0.5),
            ..Default::default()
        };
        // 4 runs voting PIP3 -> Akt, 1 run whose streams conflict
        let fwd = run_with_cond(11, 9, |k, _, _| if k == 2 || k == 6 { 0.05 } else { 0.9 });
        let und = run_with_cond(11, 9, |k, i, j| {
            if i == 4 && j == 6 && (k == 2 || k == 6) {
                0.05
            } else {
                0.9
            }
        });
        let runs = vec![fwd.clone(), fwd.clone(), fwd.clone(), und.clone(), fwd.clone()];
        let net = assemble_network(&runs, &fwd, &design, &panel, &th, ModelKind::Hm).unwrap();
        let d = net.decision_for(4, 6).unwrap();
        assert_eq!(d.verdict, Verdict::Forward);
        assert_eq!((d.votes_forward, d.votes_undetermined), (4, 1));

        // 1 forward vs 1 reverse is a tie
        let rev = run_with_cond(11, 9, |k, _, _| match k {
            2 | 6 => 0.9,
            _ => 0.05,
        });
        // make the reverse run still select the pair
        let runs = vec![fwd.clone(), rev];
        let net = assemble_network(&runs, &fwd, &design, &panel, &th, ModelKind::Hm).unwrap();
        let d = net.decision_for(4, 6).unwrap();
        assert_eq!(d.verdict, Verdict::Undetermined);
    }
}
