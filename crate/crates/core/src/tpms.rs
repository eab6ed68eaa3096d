//! Exact total-affinity matching through min-cost flow.
//!
//! The network has a source, one node per reviewer, one per paper and a sink:
//! `s -> r_i` with capacity `U_i`, `r_i -> p_j` with capacity 1 and cost
//! `-round(A_ij * W)`, `p_j -> t` with capacity `C_j`. Lower bounds are handled
//! in two passes: first route exactly `sum L_i` with reviewer capacities `L_i`,
//! then route the rest with capacities `U_i - L_i` on the leftover paper
//! capacities, never reusing a pair from the first pass.

use crate::error::{Error, Result};
use crate::mcf::{solve_min_cost_flow, FlowNetwork};
use crate::model::{require_feasible, Instance, Matching};

/// Integer scale applied to affinities before they become arc costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalingConfig {
    pub w: i64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { w: 100_000 }
    }
}

impl ScalingConfig {
    pub fn new(w: i64) -> Result<Self> {
        if w < 1 {
            return Err(Error::Precondition(format!(
                "cost scale must be >= 1, got {w}"
            )));
        }
        Ok(Self { w })
    }

    /// Integer arc cost of assigning with affinity `a`.
    pub fn cost(&self, a: f64) -> Result<i64> {
        scaled_cost(a, self.w)
    }
}

pub(crate) fn scaled_cost(a: f64, scale: i64) -> Result<i64> {
    let v = (a * scale as f64).round();
    // Keep well inside 2^53 so the rounding is exact and path sums have headroom.
    if v.abs() >= (1u64 << 50) as f64 {
        return Err(Error::Overflow(format!(
            "affinity {a} scaled by {scale} is too large for integer costs"
        )));
    }
    Ok(-(v as i64))
}

/// Node numbering of the assignment network.
#[derive(Debug, Clone, Copy)]
pub struct AssignmentLayout {
    pub num_reviewers: usize,
    pub num_papers: usize,
}

impl AssignmentLayout {
    pub const SOURCE: usize = 0;

    pub fn reviewer(&self, i: usize) -> usize {
        1 + i
    }

    pub fn paper(&self, j: usize) -> usize {
        1 + self.num_reviewers + j
    }

    pub fn sink(&self) -> usize {
        1 + self.num_reviewers + self.num_papers
    }

    /// Index of the `r_i -> p_j` arc.
    pub fn pair_arc(&self, i: usize, j: usize) -> usize {
        self.num_reviewers + i * self.num_papers + j
    }
}

/// The network for the unconstrained-fairness problem, with capacities `U_i`
/// and `C_j`. Arcs are ordered source arcs, pair arcs (reviewer-major), sink arcs.
pub fn build_assignment_network(
    instance: &Instance,
    scaling: ScalingConfig,
) -> Result<FlowNetwork> {
    require_feasible(instance)?;
    let reviewer_caps: Vec<i64> = instance.load_ub().iter().map(|&u| i64::from(u)).collect();
    let paper_caps: Vec<i64> = instance.coverage().iter().map(|&c| i64::from(c)).collect();
    let empty = Matching::empty(instance.num_reviewers(), instance.num_papers());
    Ok(network_on_top(instance, &empty, &reviewer_caps, &paper_caps, scaling.w)?.0)
}

/// Network adding assignments on top of `base`: pairs already in `base` get
/// capacity 0. Returns the network and the reviewer/paper index maps.
fn network_on_top(
    instance: &Instance,
    base: &Matching,
    reviewer_caps: &[i64],
    paper_caps: &[i64],
    w: i64,
) -> Result<(FlowNetwork, AssignmentLayout)> {
    let (nr, np) = instance.shape();
    let layout = AssignmentLayout {
        num_reviewers: nr,
        num_papers: np,
    };
    let mut net = FlowNetwork::new(nr + np + 2);
    for (i, &cap) in reviewer_caps.iter().enumerate() {
        net.add_arc(AssignmentLayout::SOURCE, layout.reviewer(i), cap.max(0), 0)?;
    }
    for i in 0..nr {
        for j in 0..np {
            let cap = if base.is_assigned(i, j) { 0 } else { 1 };
            let cost = scaled_cost(instance.affinity(i, j), w)?;
            net.add_arc(layout.reviewer(i), layout.paper(j), cap, cost)?;
        }
    }
    for (j, &cap) in paper_caps.iter().enumerate() {
        net.add_arc(layout.paper(j), layout.sink(), cap.max(0), 0)?;
    }
    let supply: i64 = paper_caps.iter().map(|&c| c.max(0)).sum();
    net.set_supply(AssignmentLayout::SOURCE, supply)?;
    net.set_supply(layout.sink(), -supply)?;
    Ok((net, layout))
}

/// Network over only the reviewers and papers with positive capacity.
/// Returns the network with the original indices of its reviewers and papers.
fn compact_network_on_top(
    instance: &Instance,
    base: &Matching,
    reviewer_caps: &[i64],
    paper_caps: &[i64],
    w: i64,
) -> Result<(FlowNetwork, Vec<usize>, Vec<usize>)> {
    let reviewers: Vec<usize> = (0..instance.num_reviewers())
        .filter(|&i| reviewer_caps[i] > 0)
        .collect();
    let papers: Vec<usize> = (0..instance.num_papers())
        .filter(|&j| paper_caps[j] > 0)
        .collect();
    let (nr, np) = (reviewers.len(), papers.len());
    let layout = AssignmentLayout {
        num_reviewers: nr,
        num_papers: np,
    };
    let mut net = FlowNetwork::new(nr + np + 2);
    for (k, &i) in reviewers.iter().enumerate() {
        net.add_arc(
            AssignmentLayout::SOURCE,
            layout.reviewer(k),
            reviewer_caps[i],
            0,
        )?;
    }
    for (k, &i) in reviewers.iter().enumerate() {
        for (l, &j) in papers.iter().enumerate() {
            let cap = if base.is_assigned(i, j) { 0 } else { 1 };
            let cost = scaled_cost(instance.affinity(i, j), w)?;
            net.add_arc(layout.reviewer(k), layout.paper(l), cap, cost)?;
        }
    }
    for (l, &j) in papers.iter().enumerate() {
        net.add_arc(layout.paper(l), layout.sink(), paper_caps[j], 0)?;
    }
    let supply: i64 = papers.iter().map(|&j| paper_caps[j]).sum();
    net.set_supply(AssignmentLayout::SOURCE, supply)?;
    net.set_supply(layout.sink(), -supply)?;
    Ok((net, reviewers, papers))
}

/// Adds a max-affinity set of new pairs to `base` subject to per-reviewer and
/// per-paper capacities. Returns the union and the number of pairs added.
/// `compact` builds the flow network over positive-capacity nodes only; the
/// result is the same optimum either way.
pub(crate) fn augment(
    instance: &Instance,
    base: &Matching,
    reviewer_caps: &[i64],
    paper_caps: &[i64],
    w: i64,
    compact: bool,
) -> Result<(Matching, i64)> {
    let mut out = base.clone();
    if compact {
        let (net, reviewers, papers) =
            compact_network_on_top(instance, base, reviewer_caps, paper_caps, w)?;
        let plan = solve_min_cost_flow(&net)?;
        let np = papers.len();
        for (k, &i) in reviewers.iter().enumerate() {
            for (l, &j) in papers.iter().enumerate() {
                if plan.flow[reviewers.len() + k * np + l] > 0 {
                    out.set(i, j, true);
                }
            }
        }
        Ok((out, plan.total_flow))
    } else {
        let (net, layout) = network_on_top(instance, base, reviewer_caps, paper_caps, w)?;
        let plan = solve_min_cost_flow(&net)?;
        for i in 0..instance.num_reviewers() {
            for j in 0..instance.num_papers() {
                if plan.flow[layout.pair_arc(i, j)] > 0 {
                    out.set(i, j, true);
                }
            }
        }
        Ok((out, plan.total_flow))
    }
}

/// Max-affinity matching with exact coverage and loads at most `U_i`.
/// Lower bounds, if the instance has any, are ignored here.
pub fn solve_tpms(instance: &Instance, scaling: ScalingConfig) -> Result<Matching> {
    require_feasible(&instance.without_lower_bounds())?;
    let reviewer_caps: Vec<i64> = instance.load_ub().iter().map(|&u| i64::from(u)).collect();
    let paper_caps: Vec<i64> = instance.coverage().iter().map(|&c| i64::from(c)).collect();
    let empty = Matching::empty(instance.num_reviewers(), instance.num_papers());
    let (m, routed) = augment(
        instance,
        &empty,
        &reviewer_caps,
        &paper_caps,
        scaling.w,
        false,
    )?;
    let demand = instance.total_coverage() as i64;
    if routed < demand {
        return Err(Error::Infeasible(format!(
            "only {routed} of {demand} required assignments can be made"
        )));
    }
    Ok(m)
}

/// Two-pass matching honoring load lower bounds exactly.
pub fn solve_tpms_with_lb(instance: &Instance, scaling: ScalingConfig) -> Result<Matching> {
    require_feasible(instance)?;
    let (nr, np) = instance.shape();
    let lower: Vec<i64> = (0..nr).map(|i| i64::from(instance.lower(i))).collect();
    let cover: Vec<i64> = instance.coverage().iter().map(|&c| i64::from(c)).collect();
    let empty = Matching::empty(nr, np);

    let (first, routed) = augment(instance, &empty, &lower, &cover, scaling.w, false)?;
    let need: i64 = lower.iter().sum();
    if routed < need {
        return Err(Error::Infeasible(format!(
            "load lower bounds need {need} assignments but only {routed} can be routed"
        )));
    }
    let rest_reviewers: Vec<i64> = (0..nr)
        .map(|i| i64::from(instance.load_ub()[i]) - lower[i])
        .collect();
    let rest_papers: Vec<i64> = (0..np)
        .map(|j| cover[j] - first.coverage(j) as i64)
        .collect();
    let (full, routed2) = augment(
        instance,
        &first,
        &rest_reviewers,
        &rest_papers,
        scaling.w,
        false,
    )?;
    let need2: i64 = rest_papers.iter().sum();
    if routed2 < need2 {
        return Err(Error::Infeasible(format!(
            "after placing lower bounds, only {routed2} of {need2} remaining assignments can be made"
        )));
    }
    Ok(full)
}

/// Lower-bound variant when the instance has lower bounds, plain otherwise.
pub fn solve_assignment(instance: &Instance, scaling: ScalingConfig) -> Result<Matching> {
    if instance.load_lb().is_some() {
        solve_tpms_with_lb(instance, scaling)
    } else {
        solve_tpms(instance, scaling)
    }
}
