//! Flow-based fairness heuristic.
//!
//! Starting from a max-affinity matching, papers are split by score into
//! `P+` (at least `T`), `P0` (at least `T - A_max`) and `P-` (the rest). Each
//! iteration unassigns the weakest reviewer of every `P-` paper, routes
//! reviewers from `P+` papers (and, when safe, `P0` papers) to `P-` papers
//! through a refinement network, then restores exact coverage with one more
//! assignment flow. It stops when `P-` is empty or stops shrinking.

use serde::Serialize;
use tracing::debug;

use crate::error::{Error, Result};
use crate::mcf::{solve_min_cost_flow, FlowNetwork, FlowPlan};
use crate::model::{
    column_score, objective, require_feasible, validate, Instance, Matching, SCORE_TOL,
};
use crate::tpms::{augment, scaled_cost, solve_assignment, ScalingConfig};

/// How coverage is restored after each refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Phase1Mode {
    /// Flow over only the deficient papers and reviewers with spare capacity.
    #[default]
    WarmStart,
    /// Flow over the full assignment network; same optimum, kept for testing.
    FromScratch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FairFlowConfig {
    /// Cost scale for ordinary assignments.
    pub w: i64,
    /// Cost scale for assignments that lift a paper out of `P-`.
    pub z: i64,
    pub max_iterations: usize,
    pub phase1: Phase1Mode,
}

impl Default for FairFlowConfig {
    fn default() -> Self {
        Self {
            w: 100_000,
            z: 100_000_000,
            max_iterations: 50,
            phase1: Phase1Mode::WarmStart,
        }
    }
}

impl FairFlowConfig {
    fn check(&self) -> Result<()> {
        if self.w < 1 || self.z <= self.w {
            return Err(Error::Precondition(format!(
                "cost scales need 1 <= w < z, got w = {}, z = {}",
                self.w, self.z
            )));
        }
        Ok(())
    }

    pub fn scaling(&self) -> ScalingConfig {
        ScalingConfig { w: self.w }
    }
}

/// Papers grouped by score against a threshold. Each list is ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub plus: Vec<usize>,
    pub zero: Vec<usize>,
    pub minus: Vec<usize>,
}

pub fn partition_papers(instance: &Instance, matching: &Matching, t: f64) -> Result<Partition> {
    if instance.shape() != matching.shape() {
        return Err(Error::ShapeMismatch {
            expected: instance.shape(),
            found: matching.shape(),
        });
    }
    if !matching.is_integral() {
        return Err(Error::Precondition(
            "partition needs an integral matching".into(),
        ));
    }
    let a_max = instance.a_max();
    let mut out = Partition::default();
    for j in 0..instance.num_papers() {
        let s = column_score(instance, matching, j);
        if s >= t - SCORE_TOL {
            out.plus.push(j);
        } else if s >= t - a_max - SCORE_TOL {
            out.zero.push(j);
        } else {
            out.minus.push(j);
        }
    }
    Ok(out)
}

/// Unassigns, from each paper in `minus`, its assigned reviewer of lowest
/// affinity (lowest index on ties).
pub fn drop_worst_reviewer(
    instance: &Instance,
    matching: &Matching,
    minus: &[usize],
) -> Result<Matching> {
    let mut out = matching.clone();
    for &j in minus {
        let worst = matching
            .reviewers_of(j)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if instance.affinity(b, j) <= instance.affinity(i, j) => Some(b),
                _ => Some(i),
            });
        match worst {
            Some(i) => out.set(i, j, false),
            None => {
                return Err(Error::Precondition(format!(
                    "paper {j} has no assigned reviewer to drop"
                )))
            }
        }
    }
    Ok(out)
}

/// Role of an arc in the refinement network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    Source {
        paper: usize,
    },
    /// Flow removes `reviewer` from `paper`.
    Unassign {
        paper: usize,
        reviewer: usize,
    },
    DummyToPaper {
        paper: usize,
    },
    /// Flow assigns `reviewer` to `paper` through its dummy node.
    AssignDummy {
        reviewer: usize,
        paper: usize,
    },
    /// Flow assigns `reviewer` to `paper` directly.
    Assign {
        reviewer: usize,
        paper: usize,
    },
    Sink {
        paper: usize,
    },
}

#[derive(Debug, Clone)]
pub struct RefinementNetwork {
    pub network: FlowNetwork,
    /// One entry per arc, in arc order.
    pub kinds: Vec<ArcKind>,
}

/// Builds the refinement network for a matching whose `P-` papers have
/// already lost their weakest reviewer.
///
/// Nodes: source 0, paper `j` at `1 + j`, reviewer `i` at `1 + P + i`, one
/// dummy per `P0` paper in order, sink last.
pub fn build_refinement_network(
    instance: &Instance,
    matching: &Matching,
    partition: &Partition,
    t: f64,
    config: &FairFlowConfig,
) -> Result<RefinementNetwork> {
    config.check()?;
    let (nr, np) = instance.shape();
    let a_max = instance.a_max();
    let paper_node = |j: usize| 1 + j;
    let reviewer_node = |i: usize| 1 + np + i;
    let dummy_node = |k: usize| 1 + np + nr + k;
    let sink = 1 + np + nr + partition.zero.len();
    let mut net = FlowNetwork::new(sink + 1);
    let mut kinds = Vec::new();

    let supply = partition.plus.len().min(partition.minus.len()) as i64;
    net.set_supply(0, supply)?;
    net.set_supply(sink, -supply)?;

    for &p in &partition.plus {
        net.add_arc(0, paper_node(p), 1, 0)?;
        kinds.push(ArcKind::Source { paper: p });
    }
    let mut on_plus = vec![false; nr];
    for &p in &partition.plus {
        for r in matching.reviewers_of(p) {
            net.add_arc(paper_node(p), reviewer_node(r), 1, 0)?;
            kinds.push(ArcKind::Unassign {
                paper: p,
                reviewer: r,
            });
            on_plus[r] = true;
        }
    }
    for (k, &p) in partition.zero.iter().enumerate() {
        net.add_arc(dummy_node(k), paper_node(p), 1, 0)?;
        kinds.push(ArcKind::DummyToPaper { paper: p });
    }
    // Reviewers with an arc into each dummy.
    let mut feeders: Vec<Vec<usize>> = vec![Vec::new(); partition.zero.len()];
    for r in (0..nr).filter(|&r| on_plus[r]) {
        for (k, &p) in partition.zero.iter().enumerate() {
            if !matching.is_assigned(r, p) {
                net.add_arc(reviewer_node(r), dummy_node(k), 1, 0)?;
                kinds.push(ArcKind::AssignDummy {
                    reviewer: r,
                    paper: p,
                });
                feeders[k].push(r);
            }
        }
    }
    for (k, &p) in partition.zero.iter().enumerate() {
        let a_min = feeders[k]
            .iter()
            .map(|&r| instance.affinity(r, p))
            .fold(f64::INFINITY, f64::min);
        if feeders[k].is_empty() {
            continue;
        }
        let s_p = column_score(instance, matching, p);
        for r in matching.reviewers_of(p) {
            if s_p + a_min - instance.affinity(r, p) >= t - a_max - SCORE_TOL {
                net.add_arc(paper_node(p), reviewer_node(r), 1, 0)?;
                kinds.push(ArcKind::Unassign {
                    paper: p,
                    reviewer: r,
                });
            }
        }
    }
    let minus_scores: Vec<f64> = partition
        .minus
        .iter()
        .map(|&p| column_score(instance, matching, p))
        .collect();
    for r in 0..nr {
        for (&p, &s_p) in partition.minus.iter().zip(&minus_scores) {
            if matching.is_assigned(r, p) {
                continue;
            }
            let a = instance.affinity(r, p);
            let promotes = s_p + a >= t - a_max - SCORE_TOL;
            let scale = if promotes { config.z } else { config.w };
            net.add_arc(reviewer_node(r), paper_node(p), 1, scaled_cost(a, scale)?)?;
            kinds.push(ArcKind::Assign {
                reviewer: r,
                paper: p,
            });
        }
    }
    for &p in &partition.minus {
        net.add_arc(paper_node(p), sink, 1, 0)?;
        kinds.push(ArcKind::Sink { paper: p });
    }
    Ok(RefinementNetwork {
        network: net,
        kinds,
    })
}

/// Applies the assignments and unassignments carried by a refinement plan.
pub fn apply_flow_plan(
    matching: &Matching,
    plan: &FlowPlan,
    network: &RefinementNetwork,
) -> Result<Matching> {
    if plan.flow.len() != network.kinds.len() {
        return Err(Error::Invariant(format!(
            "plan has {} arc flows for a network of {} arcs",
            plan.flow.len(),
            network.kinds.len()
        )));
    }
    let mut out = matching.clone();
    for (kind, &f) in network.kinds.iter().zip(&plan.flow) {
        if f == 0 {
            continue;
        }
        match *kind {
            ArcKind::Unassign { paper, reviewer } => {
                if !out.is_assigned(reviewer, paper) {
                    return Err(Error::Invariant(format!(
                        "plan unassigns reviewer {reviewer} from paper {paper}, which it does not review"
                    )));
                }
                out.set(reviewer, paper, false);
            }
            ArcKind::AssignDummy { reviewer, paper } | ArcKind::Assign { reviewer, paper } => {
                if matching.is_assigned(reviewer, paper) || out.is_assigned(reviewer, paper) {
                    return Err(Error::Invariant(format!(
                        "plan assigns reviewer {reviewer} to paper {paper} twice"
                    )));
                }
                out.set(reviewer, paper, true);
            }
            _ => {}
        }
    }
    for i in 0..matching.shape().0 {
        if out.load(i) != matching.load(i) {
            return Err(Error::Invariant(format!(
                "refinement changed the load of reviewer {i}"
            )));
        }
    }
    Ok(out)
}

/// Fills every coverage deficit with a max-affinity flow over the papers
/// short of reviewers and the reviewers with spare capacity, never reusing a
/// pair that is already assigned. With lower bounds, reviewers below theirs
/// are served first.
pub fn repair_coverage(
    instance: &Instance,
    matching: &Matching,
    scaling: ScalingConfig,
) -> Result<Matching> {
    repair(instance, matching, scaling.w, true)
}

fn repair(instance: &Instance, matching: &Matching, w: i64, compact: bool) -> Result<Matching> {
    let (nr, np) = instance.shape();
    let mut deficit = vec![0i64; np];
    for (j, d) in deficit.iter_mut().enumerate() {
        let c = i64::from(instance.coverage()[j]);
        let have = matching.coverage(j) as i64;
        if have > c {
            return Err(Error::Precondition(format!(
                "paper {j} has {have} reviewers, above its coverage {c}"
            )));
        }
        *d = c - have;
    }
    let total: i64 = deficit.iter().sum();
    if total == 0 {
        return Ok(matching.clone());
    }
    let loads: Vec<i64> = (0..nr).map(|i| matching.load(i) as i64).collect();
    let mut current = matching.clone();
    if instance.load_lb().is_some() {
        let below: Vec<i64> = (0..nr)
            .map(|i| (i64::from(instance.lower(i)) - loads[i]).max(0))
            .collect();
        if below.iter().any(|&b| b > 0) {
            current = augment(instance, &current, &below, &deficit, w, compact)?.0;
        }
    }
    let spare: Vec<i64> = (0..nr)
        .map(|i| i64::from(instance.load_ub()[i]) - current.load(i) as i64)
        .collect();
    if let Some(i) = spare.iter().position(|&s| s < 0) {
        return Err(Error::Precondition(format!(
            "reviewer {i} is above its load bound before repair"
        )));
    }
    let left: Vec<i64> = (0..np)
        .map(|j| i64::from(instance.coverage()[j]) - current.coverage(j) as i64)
        .collect();
    let (out, routed) = augment(instance, &current, &spare, &left, w, compact)?;
    let need: i64 = left.iter().sum();
    if routed < need {
        return Err(Error::Infeasible(format!(
            "coverage repair left a deficit of {} assignments",
            need - routed
        )));
    }
    let violations = validate(instance, &out, 0, None, 0.0)?;
    if let Some(v) = violations.first() {
        return Err(Error::Infeasible(format!(
            "coverage repair produced an invalid matching: {} of {} by {}",
            v.kind, v.subject, v.amount
        )));
    }
    Ok(out)
}

/// Why the refinement loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// No paper is left below `T - A_max`.
    NoMinus,
    /// `|P-|` did not change between two successive iterations.
    Stalled,
    /// The last refinement would have grown `P-`; it was discarded.
    MinusGrew,
    /// Coverage could not be restored after the last refinement; it was discarded.
    RepairFailed,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairFlowReport {
    pub iterations: usize,
    /// `|P-|` at the start of every iteration.
    pub minus_history: Vec<usize>,
    pub final_min_score: f64,
    pub stop: StopReason,
}

/// Runs the heuristic at threshold `t` starting from a max-affinity matching.
pub fn solve_fairflow(
    instance: &Instance,
    t: f64,
    config: &FairFlowConfig,
) -> Result<(Matching, FairFlowReport)> {
    solve_fairflow_from(instance, t, config, None)
}

/// Like [`solve_fairflow`], but starts from `initial` when given. The initial
/// matching must be valid (exact coverage, loads within bounds).
pub fn solve_fairflow_from(
    instance: &Instance,
    t: f64,
    config: &FairFlowConfig,
    initial: Option<&Matching>,
) -> Result<(Matching, FairFlowReport)> {
    config.check()?;
    require_feasible(instance)?;
    if !t.is_finite() {
        return Err(Error::Precondition(format!("threshold {t} is not finite")));
    }
    let compact = config.phase1 == Phase1Mode::WarmStart;
    let mut current = match initial {
        Some(m) => {
            let violations = validate(instance, m, 0, None, 0.0)?;
            if let Some(v) = violations.first() {
                return Err(Error::InvalidMatching(format!(
                    "initial matching violates {} of {} by {}",
                    v.kind, v.subject, v.amount
                )));
            }
            m.clone()
        }
        None => solve_assignment(instance, config.scaling())?,
    };

    let mut history = Vec::new();
    let mut stop = StopReason::IterationLimit;
    for iteration in 0..config.max_iterations {
        let partition = partition_papers(instance, &current, t)?;
        let minus_count = partition.minus.len();
        trace_iteration(instance, &current, &partition, iteration);
        if history.last() == Some(&minus_count) {
            history.push(minus_count);
            stop = StopReason::Stalled;
            break;
        }
        history.push(minus_count);
        if minus_count == 0 {
            stop = StopReason::NoMinus;
            break;
        }

        // Papers that need no reviewers cannot lose or gain one.
        let mut working = partition.clone();
        working.minus.retain(|&j| instance.coverage()[j] > 0);
        let dropped = drop_worst_reviewer(instance, &current, &working.minus)?;
        let net = build_refinement_network(instance, &dropped, &working, t, config)?;
        let plan = solve_min_cost_flow(&net.network)?;
        let refined = apply_flow_plan(&dropped, &plan, &net)?;

        let after = partition_papers(instance, &refined, t)?;
        if let Some(&p) = after
            .minus
            .iter()
            .find(|p| partition.plus.contains(p) || partition.zero.contains(p))
        {
            return Err(Error::Invariant(format!(
                "refinement pushed paper {p} below the threshold band in iteration {iteration}"
            )));
        }

        let repaired = match repair(instance, &refined, config.w, compact) {
            Ok(m) => m,
            Err(Error::Infeasible(msg)) => {
                debug!(iteration, reason = %msg, "fairflow repair failed; keeping previous matching");
                stop = StopReason::RepairFailed;
                break;
            }
            Err(e) => return Err(e),
        };
        let next = partition_papers(instance, &repaired, t)?;
        if next.minus.len() > minus_count {
            stop = StopReason::MinusGrew;
            break;
        }
        current = repaired;
    }

    let final_min_score = (0..instance.num_papers())
        .map(|j| column_score(instance, &current, j))
        .fold(f64::INFINITY, f64::min);
    let final_min_score = if final_min_score.is_finite() {
        final_min_score
    } else {
        0.0
    };
    let report = FairFlowReport {
        iterations: history.len(),
        minus_history: history,
        final_min_score,
        stop,
    };
    Ok((current, report))
}

fn trace_iteration(
    instance: &Instance,
    matching: &Matching,
    partition: &Partition,
    iteration: usize,
) {
    if !tracing::enabled!(tracing::Level::DEBUG) {
        return;
    }
    let min_score = (0..instance.num_papers())
        .map(|j| column_score(instance, matching, j))
        .fold(f64::INFINITY, f64::min);
    debug!(
        iteration,
        plus = partition.plus.len(),
        zero = partition.zero.len(),
        minus = partition.minus.len(),
        min_score,
        objective = objective(instance, matching).unwrap_or(f64::NAN),
        "fairflow iteration"
    );
}
