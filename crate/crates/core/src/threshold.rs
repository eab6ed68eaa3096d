//! Choosing the fairness threshold.
//!
//! Both searches bisect `[t_lo, t_hi]`, where `t_lo` is the smallest sum of
//! the `C_j` lowest affinities of any paper and `t_hi` the largest sum of the
//! `C_j` highest. `t_lo` is evaluated first as a baseline; the iteration
//! budget counts only the bisection probes after it.

use std::time::{Duration, Instant};

use serde::Serialize;
use tracing::info;

use crate::error::{Error, Result};
use crate::fairflow::{solve_fairflow_from, FairFlowConfig};
use crate::fairir::{check_from, start_point};
use crate::model::{require_feasible, Instance, Matching, SCORE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeOutcome {
    /// Whether the relaxation is feasible at the probed threshold.
    Feasible { feasible: bool },
    /// Minimum paper score of the heuristic's output at the probed threshold.
    MinScore { min_score: f64, reached: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub t: f64,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSearchResult {
    pub t_star: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Evaluation at `t_lo`, made before any bisection probe.
    pub baseline: Probe,
    pub probes: Vec<Probe>,
    /// Best minimum paper score found (heuristic search only).
    pub best_min_score: Option<f64>,
    #[serde(skip)]
    pub best_matching: Option<Matching>,
}

/// `(t_lo, t_hi)` for the instance.
pub fn search_range(instance: &Instance) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..instance.num_papers() {
        let mut col: Vec<f64> = instance.column(j).collect();
        col.sort_by(f64::total_cmp);
        let c = (instance.coverage()[j] as usize).min(col.len());
        lo = lo.min(col[..c].iter().sum());
        hi = hi.max(col[col.len() - c..].iter().sum());
    }
    if lo > hi {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

fn out_of_time(start: Instant, budget: Option<Duration>) -> bool {
    budget.is_some_and(|b| start.elapsed() >= b)
}

/// Highest threshold at which the relaxation stays feasible, by bisection.
pub fn search_t_fairir(instance: &Instance, iterations: usize) -> Result<ThresholdSearchResult> {
    search_t_fairir_within(instance, iterations, None)
}

/// [`search_t_fairir`] that stops probing once `budget` has elapsed.
pub fn search_t_fairir_within(
    instance: &Instance,
    iterations: usize,
    budget: Option<Duration>,
) -> Result<ThresholdSearchResult> {
    require_feasible(instance)?;
    let start = Instant::now();
    let (t_lo, t_hi) = search_range(instance);
    let warm = start_point(instance);
    let base_ok = check_from(instance, t_lo, warm.as_deref())?;
    info!(t = t_lo, feasible = base_ok, "fairir baseline");
    if !base_ok {
        return Err(Error::Infeasible(format!(
            "no fairness threshold in [{t_lo}, {t_hi}] is feasible"
        )));
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    let mut probes = Vec::new();
    for _ in 0..iterations {
        if out_of_time(start, budget) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let feasible = check_from(instance, mid, warm.as_deref())?;
        info!(t = mid, feasible, "fairir probe");
        probes.push(Probe {
            t: mid,
            outcome: ProbeOutcome::Feasible { feasible },
        });
        if feasible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdSearchResult {
        t_star: lo,
        t_lo,
        t_hi,
        baseline: Probe {
            t: t_lo,
            outcome: ProbeOutcome::Feasible { feasible: true },
        },
        probes,
        best_min_score: None,
        best_matching: None,
    })
}

/// Bisection over heuristic runs, each started from the previous output.
/// A probe counts as reached when every paper ends at least `t - A_max`; the
/// search moves up after a reached probe and down otherwise. The threshold
/// whose output has the largest minimum paper score wins, earliest on ties.
pub fn search_t_fairflow(
    instance: &Instance,
    iterations: usize,
    config: &FairFlowConfig,
) -> Result<ThresholdSearchResult> {
    search_t_fairflow_within(instance, iterations, config, None)
}

/// [`search_t_fairflow`] that stops probing once `budget` has elapsed.
pub fn search_t_fairflow_within(
    instance: &Instance,
    iterations: usize,
    config: &FairFlowConfig,
    budget: Option<Duration>,
) -> Result<ThresholdSearchResult> {
    require_feasible(instance)?;
    let start = Instant::now();
    let a_max = instance.a_max();
    let (t_lo, t_hi) = search_range(instance);

    let run = |t: f64, from: Option<&Matching>| -> Result<(Matching, f64, bool)> {
        let (m, report) = solve_fairflow_from(instance, t, config, from)?;
        let reached = report.final_min_score >= t - a_max - SCORE_TOL;
        Ok((m, report.final_min_score, reached))
    };

    let (mut last, base_score, base_reached) = run(t_lo, None)?;
    info!(
        t = t_lo,
        min_score = base_score,
        reached = base_reached,
        "fairflow baseline"
    );
    let baseline = Probe {
        t: t_lo,
        outcome: ProbeOutcome::MinScore {
            min_score: base_score,
            reached: base_reached,
        },
    };
    let mut best = (base_score, t_lo, last.clone());
    let (mut lo, mut hi) = (t_lo, t_hi);
    let mut probes = Vec::new();
    for _ in 0..iterations {
        if out_of_time(start, budget) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (m, score, reached) = run(mid, Some(&last))?;
        info!(t = mid, min_score = score, reached, "fairflow probe");
        probes.push(Probe {
            t: mid,
            outcome: ProbeOutcome::MinScore {
                min_score: score,
                reached,
            },
        });
        if score > best.0 {
            best = (score, mid, m.clone());
        }
        if reached {
            lo = mid;
        } else {
            hi = mid;
        }
        last = m;
    }
    Ok(ThresholdSearchResult {
        t_star: best.1,
        t_lo,
        t_hi,
        baseline,
        probes,
        best_min_score: Some(best.0),
        best_matching: Some(best.2),
    })
}

/// Minimum paper score of the heuristic at `t = 0`, plus half of `A_max`.
pub fn heuristic_t(instance: &Instance, config: &FairFlowConfig) -> Result<f64> {
    let (_, report) = solve_fairflow_from(instance, 0.0, config, None)?;
    Ok(report.final_min_score + 0.5 * instance.a_max())
}
