//! Iterative rounding for the locally fair assignment problem.
//!
//! Each round solves the LP relaxation to a vertex, fixes every variable that
//! came out integral, then drops the fairness row of every paper with at most
//! three fractional variables. If no fairness row went, both load rows of every
//! reviewer with at most two fractional variables are dropped instead. The
//! result keeps coverage exact, loads within one of their bounds, and paper
//! scores within one affinity of the threshold.

use serde::Serialize;
use tracing::debug;

use crate::error::{Error, Result};
use crate::lp::{
    is_integral_value, solve_lp, solve_lp_from, vertex_check, LinearProgram, LpSolution, LpStatus,
    Relation,
};
use crate::model::{column_score, require_feasible, Instance, Matching};
use crate::tpms::{solve_assignment, ScalingConfig};

/// Slack allowed on the round-to-round objective comparison.
const MONOTONE_TOL: f64 = 1e-7;
/// Slack on the final fairness guarantee.
const FAIRNESS_TOL: f64 = 1e-7;

/// What a row of the relaxation constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowTag {
    LoadUb(usize),
    LoadLb(usize),
    Coverage(usize),
    Fairness(usize),
}

/// The relaxation with each row labelled.
#[derive(Debug, Clone)]
pub struct LocalFairnessLp {
    pub program: LinearProgram,
    pub tags: Vec<RowTag>,
}

/// Variable index of the pair `(reviewer, paper)`.
pub fn var_index(instance: &Instance, reviewer: usize, paper: usize) -> usize {
    reviewer * instance.num_papers() + paper
}

/// The LP relaxation with fairness rows `score_j >= t`. A threshold of
/// negative infinity leaves the fairness rows out.
pub fn build_local_fairness_lp(instance: &Instance, t: f64) -> Result<LocalFairnessLp> {
    if t.is_nan() || t == f64::INFINITY {
        return Err(Error::Precondition(format!("threshold {t} is not usable")));
    }
    let (nr, np) = instance.shape();
    let mut program = LinearProgram::new(nr * np);
    for (k, &a) in instance.affinities().iter().enumerate() {
        program.set_objective(k, a)?;
    }
    let mut tags = Vec::new();
    for i in 0..nr {
        let coeffs: Vec<(usize, f64)> = (0..np).map(|j| (i * np + j, 1.0)).collect();
        program.add_row(
            coeffs.clone(),
            Relation::Le,
            f64::from(instance.load_ub()[i]),
        )?;
        tags.push(RowTag::LoadUb(i));
        if instance.load_lb().is_some() {
            program.add_row(coeffs, Relation::Ge, f64::from(instance.lower(i)))?;
            tags.push(RowTag::LoadLb(i));
        }
    }
    for j in 0..np {
        let coeffs = (0..nr).map(|i| (i * np + j, 1.0)).collect();
        program.add_row(coeffs, Relation::Eq, f64::from(instance.coverage()[j]))?;
        tags.push(RowTag::Coverage(j));
    }
    if t > f64::NEG_INFINITY {
        for j in 0..np {
            let coeffs = (0..nr)
                .map(|i| (i * np + j, instance.affinity(i, j)))
                .collect();
            program.add_row(coeffs, Relation::Ge, t)?;
            tags.push(RowTag::Fairness(j));
        }
    }
    Ok(LocalFairnessLp { program, tags })
}

/// Whether the relaxation at threshold `t` has a feasible point, which is
/// exactly when [`solve_fairir`] runs to completion at `t`.
pub fn check_threshold_feasible(instance: &Instance, t: f64) -> Result<bool> {
    if require_feasible(instance).is_err() {
        return Ok(false);
    }
    check_from(instance, t, start_point(instance).as_deref())
}

/// A max-affinity matching, used to start the simplex near the optimum.
pub(crate) fn start_point(instance: &Instance) -> Option<Vec<f64>> {
    solve_assignment(instance, ScalingConfig::default())
        .ok()
        .map(|m| m.values().to_vec())
}

pub(crate) fn check_from(instance: &Instance, t: f64, start: Option<&[f64]>) -> Result<bool> {
    let lp = build_local_fairness_lp(instance, t)?;
    Ok(solve(&lp.program, start)?.status == LpStatus::Optimal)
}

fn solve(program: &LinearProgram, start: Option<&[f64]>) -> Result<LpSolution> {
    match start {
        Some(s) => solve_lp_from(program, s),
        None => solve_lp(program),
    }
}

/// One round of the rounding loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairIrRound {
    pub round: usize,
    pub objective: f64,
    pub newly_fixed: usize,
    pub fixed_total: usize,
    pub fractional: usize,
    pub tight_rank: usize,
    pub dropped_fairness: usize,
    pub dropped_loads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairIrReport {
    pub rounds: usize,
    pub dropped_fairness_count: usize,
    pub dropped_load_count: usize,
    /// Largest amount by which a paper score falls below the threshold.
    pub max_fairness_violation: f64,
    /// Largest amount by which a load leaves its bounds.
    pub max_load_violation: u32,
    /// Objective of the last relaxation solved.
    pub lp_objective: f64,
    pub trace: Vec<FairIrRound>,
}

/// Rounds the relaxation at threshold `t` to an integral matching.
///
/// Fails with [`Error::Precondition`] when the relaxation is infeasible at `t`.
pub fn solve_fairir(instance: &Instance, t: f64) -> Result<(Matching, FairIrReport)> {
    require_feasible(instance)?;
    let (nr, np) = instance.shape();
    let n = nr * np;
    let LocalFairnessLp {
        mut program,
        mut tags,
    } = build_local_fairness_lp(instance, t)?;

    let mut trace = Vec::new();
    let mut dropped_fairness_count = 0;
    let mut dropped_load_count = 0;
    let mut previous: Option<f64> = None;
    let mut values = start_point(instance).unwrap_or_default();
    let mut lp_objective;

    loop {
        let round = trace.len() + 1;
        let sol = solve(&program, (!values.is_empty()).then_some(&values[..]))?;
        match sol.status {
            LpStatus::Optimal => {}
            _ if round == 1 => {
                return Err(Error::Precondition(format!(
                    "threshold {t} is infeasible for the relaxation"
                )))
            }
            status => {
                return Err(Error::Numerical(format!(
                    "relaxation became {status:?} in round {round} after fixing and dropping"
                )))
            }
        }
        values = sol.values;
        lp_objective = sol.objective;
        if let Some(prev) = previous {
            if lp_objective < prev - MONOTONE_TOL * prev.abs().max(1.0) {
                return Err(Error::Invariant(format!(
                    "relaxation objective fell from {prev} to {lp_objective} in round {round}"
                )));
            }
        }
        previous = Some(lp_objective);

        let vertex = vertex_check(&program, &values);
        if !vertex.holds() {
            return Err(Error::Invariant(format!(
                "round {round}: {} fractional variables but tight rows have rank {}",
                vertex.fractional, vertex.tight_rank
            )));
        }

        let mut newly_fixed = 0;
        let mut fractional = vec![false; n];
        for (k, v) in values.iter().enumerate() {
            if program.is_fixed(k) {
                continue;
            }
            if is_integral_value(*v) {
                program.fix_variable(k, if *v > 0.5 { 1 } else { 0 })?;
                newly_fixed += 1;
            } else {
                fractional[k] = true;
            }
        }
        let fixed_total = (0..n).filter(|&k| program.is_fixed(k)).count();
        let num_fractional = fractional.iter().filter(|&&f| f).count();

        let mut record = FairIrRound {
            round,
            objective: lp_objective,
            newly_fixed,
            fixed_total,
            fractional: num_fractional,
            tight_rank: vertex.tight_rank,
            dropped_fairness: 0,
            dropped_loads: 0,
        };
        if fixed_total == n {
            debug!(
                round,
                fixed = fixed_total,
                dropped = 0,
                objective = lp_objective,
                "fairir round"
            );
            trace.push(record);
            break;
        }

        let paper_fractional: Vec<usize> = (0..np)
            .map(|j| (0..nr).filter(|&i| fractional[i * np + j]).count())
            .collect();
        let mut drop: Vec<usize> = tags
            .iter()
            .enumerate()
            .filter_map(|(r, tag)| match *tag {
                RowTag::Fairness(j) if (1..=3).contains(&paper_fractional[j]) => Some(r),
                _ => None,
            })
            .collect();
        record.dropped_fairness = drop.len();
        if drop.is_empty() {
            let reviewer_fractional: Vec<usize> = (0..nr)
                .map(|i| (0..np).filter(|&j| fractional[i * np + j]).count())
                .collect();
            let mut reviewers = std::collections::BTreeSet::new();
            for (r, tag) in tags.iter().enumerate() {
                if let RowTag::LoadUb(i) | RowTag::LoadLb(i) = *tag {
                    if (1..=2).contains(&reviewer_fractional[i]) {
                        drop.push(r);
                        reviewers.insert(i);
                    }
                }
            }
            record.dropped_loads = reviewers.len();
        }
        dropped_fairness_count += record.dropped_fairness;
        dropped_load_count += record.dropped_loads;
        debug!(
            round,
            fixed = fixed_total,
            dropped = drop.len(),
            objective = lp_objective,
            "fairir round"
        );
        trace.push(record);

        if newly_fixed == 0 && drop.is_empty() {
            return Err(Error::Invariant(format!(
                "round {round} neither fixed a variable nor dropped a row ({num_fractional} fractional)"
            )));
        }
        program.drop_rows(&drop)?;
        let mut idx = 0;
        tags.retain(|_| {
            let keep = drop.binary_search(&idx).is_err();
            idx += 1;
            keep
        });
    }

    let mut matching = Matching::empty(nr, np);
    for i in 0..nr {
        for j in 0..np {
            if values[i * np + j] > 0.5 {
                matching.set(i, j, true);
            }
        }
    }
    let report = finish_report(
        instance,
        &matching,
        t,
        trace,
        dropped_fairness_count,
        dropped_load_count,
        lp_objective,
    )?;
    Ok((matching, report))
}

/// Largest shortfall the rounding may leave below the threshold: `A_max` for
/// nonnegative affinities, the full affinity range when some are negative.
pub fn fairness_slack(instance: &Instance) -> f64 {
    let a_max = instance.a_max();
    let a_min = instance.a_min();
    if a_min < 0.0 {
        a_max - a_min
    } else {
        a_max
    }
}

fn finish_report(
    instance: &Instance,
    matching: &Matching,
    t: f64,
    trace: Vec<FairIrRound>,
    dropped_fairness_count: usize,
    dropped_load_count: usize,
    lp_objective: f64,
) -> Result<FairIrReport> {
    let (nr, np) = instance.shape();
    for j in 0..np {
        let c = matching.coverage(j);
        if c != f64::from(instance.coverage()[j]) {
            return Err(Error::Invariant(format!(
                "paper {j} has coverage {c}, needs {}",
                instance.coverage()[j]
            )));
        }
    }
    let mut max_load_violation = 0u32;
    for i in 0..nr {
        let load = matching.load(i) as i64;
        let over = load - i64::from(instance.load_ub()[i]);
        let under = i64::from(instance.lower(i)) - load;
        let v = over.max(under).max(0) as u32;
        if v > 1 {
            return Err(Error::Invariant(format!(
                "reviewer {i} load {load} is {v} outside its bounds"
            )));
        }
        max_load_violation = max_load_violation.max(v);
    }
    let mut max_fairness_violation: f64 = 0.0;
    if t > f64::NEG_INFINITY {
        let slack = fairness_slack(instance);
        for j in 0..np {
            let score = column_score(instance, matching, j);
            let shortfall = t - score;
            if shortfall > slack + FAIRNESS_TOL {
                return Err(Error::Invariant(format!(
                    "paper {j} scores {score}, more than {slack} below threshold {t}"
                )));
            }
            max_fairness_violation = max_fairness_violation.max(shortfall);
        }
    }
    Ok(FairIrReport {
        rounds: trace.len(),
        dropped_fairness_count,
        dropped_load_count,
        max_fairness_violation,
        max_load_violation,
        lp_objective,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::two_tier;
    use crate::model::{objective, paper_scores};
    use crate::tpms::{solve_tpms, ScalingConfig};

    #[test]
    fn two_tier_lp_shape() {
        let lp = build_local_fairness_lp(&two_tier(), 1.0).unwrap();
        assert_eq!(lp.program.num_vars(), 16);
        assert_eq!(lp.program.num_rows(), 16);
        let fairness = lp
            .tags
            .iter()
            .filter(|t| matches!(t, RowTag::Fairness(_)))
            .count();
        assert_eq!(fairness, 4);
    }

    #[test]
    fn omitted_fairness_matches_tpms() {
        let inst = two_tier().without_lower_bounds();
        let lp = build_local_fairness_lp(&inst, f64::NEG_INFINITY).unwrap();
        assert_eq!(lp.program.num_rows(), 8);
        let sol = solve_lp(&lp.program).unwrap();
        let m = solve_tpms(&inst, ScalingConfig::default()).unwrap();
        assert!((sol.objective - objective(&inst, &m).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn two_tier_thresholds() {
        let inst = two_tier();
        assert!(check_threshold_feasible(&inst, 1.0).unwrap());
        assert!(!check_threshold_feasible(&inst, 1.01).unwrap());
        assert!(!check_threshold_feasible(&inst, 1.5).unwrap());
        assert!(check_threshold_feasible(&inst, -1e9).unwrap());
    }

    #[test]
    fn two_tier_solve() {
        let inst = two_tier();
        let (m, report) = solve_fairir(&inst, 1.0).unwrap();
        let scores = paper_scores(&inst, &m).unwrap();
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - 1.0).abs() < 1e-9);
        assert!((objective(&inst, &m).unwrap() - 4.0).abs() < 1e-9);
        assert_eq!(report.max_load_violation, 0);
        assert!(report.rounds >= 1);
    }

    #[test]
    fn infeasible_threshold_is_precondition_error() {
        assert!(matches!(
            solve_fairir(&two_tier(), 1.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn loose_threshold_matches_tpms() {
        let rows = vec![
            vec![0.3, 0.9, 0.2, 0.5],
            vec![0.8, 0.1, 0.4, 0.6],
            vec![0.5, 0.6, 0.7, 0.2],
        ];
        let inst = Instance::from_rows(&rows, vec![3, 3, 3], None, vec![2, 2, 1, 2]).unwrap();
        let (m, _) = solve_fairir(&inst, -100.0).unwrap();
        let exact = solve_tpms(&inst, ScalingConfig::default()).unwrap();
        let a = objective(&inst, &m).unwrap();
        let b = objective(&inst, &exact).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn slack_with_negative_affinities() {
        let inst = Instance::from_rows(&[vec![-0.5, 1.0]], vec![2], None, vec![1, 1]).unwrap();
        assert_eq!(fairness_slack(&inst), 1.5);
        assert_eq!(fairness_slack(&two_tier()), 0.9);
    }
}
