//! Fair reviewer-to-paper assignment.
//!
//! The crate solves the reviewer assignment problem (maximize total affinity
//! subject to per-paper coverage and per-reviewer load bounds) and its locally
//! fair variant, where every paper's score must reach a threshold:
//!
//! - [`tpms`]: exact max-affinity matching through min-cost flow.
//! - [`fairir`]: iterative LP rounding with bounded load and fairness slack.
//! - [`fairflow`]: a faster flow-based refinement heuristic.
//! - [`threshold`]: choosing the fairness threshold.
//! - [`metrics`], [`oracle`], [`generator`], [`io`]: statistics, brute-force
//!   checks for tiny instances, synthetic data, and file formats.

pub mod error;
pub mod fairflow;
pub mod fairir;
pub mod generator;
pub mod io;
pub mod lp;
pub mod mcf;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod threshold;
pub mod tpms;

pub use error::{Error, Result};
pub use fairflow::{solve_fairflow, FairFlowConfig, FairFlowReport};
pub use fairir::{check_threshold_feasible, solve_fairir, FairIrReport};
pub use metrics::{compute_profile, compute_stats, MatchingStats, Profile};
pub use model::{
    feasibility_precheck, objective, paper_score, paper_scores, validate, Infeasibility, Instance,
    Matching, Violation, ViolationKind,
};
pub use threshold::{heuristic_t, search_t_fairflow, search_t_fairir, ThresholdSearchResult};
pub use tpms::{solve_assignment, solve_tpms, solve_tpms_with_lb, ScalingConfig};
