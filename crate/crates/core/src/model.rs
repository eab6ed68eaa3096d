//! Reviewer assignment instances, matchings and the checks shared by every solver.
//!
//! Affinities are stored densely in reviewer-major order: entry `(i, j)` lives
//! at `i * num_papers + j`. Matchings use the same layout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for every comparison of paper scores.
pub const SCORE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    num_reviewers: usize,
    num_papers: usize,
    affinity: Vec<f64>,
    load_ub: Vec<u32>,
    load_lb: Option<Vec<u32>>,
    coverage: Vec<u32>,
}

impl Instance {
    pub fn new(
        num_reviewers: usize,
        num_papers: usize,
        affinity: Vec<f64>,
        load_ub: Vec<u32>,
        load_lb: Option<Vec<u32>>,
        coverage: Vec<u32>,
    ) -> Result<Self> {
        if affinity.len() != num_reviewers * num_papers {
            return Err(Error::InvalidInstance(format!(
                "affinity matrix has {} entries, expected {num_reviewers} x {num_papers}",
                affinity.len()
            )));
        }
        if let Some(pos) = affinity.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "affinity of reviewer {} for paper {} is not finite",
                pos / num_papers.max(1),
                pos % num_papers.max(1)
            )));
        }
        if load_ub.len() != num_reviewers {
            return Err(Error::InvalidInstance(format!(
                "load_ub has {} entries, expected {num_reviewers}",
                load_ub.len()
            )));
        }
        if let Some(lb) = &load_lb {
            if lb.len() != num_reviewers {
                return Err(Error::InvalidInstance(format!(
                    "load_lb has {} entries, expected {num_reviewers}",
                    lb.len()
                )));
            }
        }
        if coverage.len() != num_papers {
            return Err(Error::InvalidInstance(format!(
                "coverage has {} entries, expected {num_papers}",
                coverage.len()
            )));
        }
        Ok(Self {
            num_reviewers,
            num_papers,
            affinity,
            load_ub,
            load_lb,
            coverage,
        })
    }

    /// Builds an instance from one affinity row per reviewer.
    pub fn from_rows(
        rows: &[Vec<f64>],
        load_ub: Vec<u32>,
        load_lb: Option<Vec<u32>>,
        coverage: Vec<u32>,
    ) -> Result<Self> {
        let num_papers = coverage.len();
        if let Some(i) = rows.iter().position(|r| r.len() != num_papers) {
            return Err(Error::InvalidInstance(format!(
                "affinity row {i} has {} entries, expected {num_papers}",
                rows[i].len()
            )));
        }
        let affinity = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), num_papers, affinity, load_ub, load_lb, coverage)
    }

    pub fn num_reviewers(&self) -> usize {
        self.num_reviewers
    }

    pub fn num_papers(&self) -> usize {
        self.num_papers
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_reviewers, self.num_papers)
    }

    #[inline]
    pub fn affinity(&self, reviewer: usize, paper: usize) -> f64 {
        self.affinity[reviewer * self.num_papers + paper]
    }

    pub fn affinities(&self) -> &[f64] {
        &self.affinity
    }

    pub fn affinity_row(&self, reviewer: usize) -> &[f64] {
        &self.affinity[reviewer * self.num_papers..(reviewer + 1) * self.num_papers]
    }

    pub fn load_ub(&self) -> &[u32] {
        &self.load_ub
    }

    pub fn load_lb(&self) -> Option<&[u32]> {
        self.load_lb.as_deref()
    }

    /// Lower bound of one reviewer; zero when the instance carries no lower bounds.
    pub fn lower(&self, reviewer: usize) -> u32 {
        self.load_lb.as_ref().map_or(0, |lb| lb[reviewer])
    }

    pub fn coverage(&self) -> &[u32] {
        &self.coverage
    }

    /// Largest affinity in the matrix, 0 for an empty matrix.
    pub fn a_max(&self) -> f64 {
        self.affinity
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, a| {
                Some(acc.map_or(a, |m| m.max(a)))
            })
            .unwrap_or(0.0)
    }

    pub fn a_min(&self) -> f64 {
        self.affinity
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, a| {
                Some(acc.map_or(a, |m| m.min(a)))
            })
            .unwrap_or(0.0)
    }

    pub fn total_coverage(&self) -> u64 {
        self.coverage.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn total_capacity(&self) -> u64 {
        self.load_ub.iter().map(|&u| u64::from(u)).sum()
    }

    pub fn total_lower(&self) -> u64 {
        self.load_lb
            .as_ref()
            .map_or(0, |lb| lb.iter().map(|&l| u64::from(l)).sum())
    }

    /// Copy of the instance with load lower bounds removed.
    pub fn without_lower_bounds(&self) -> Self {
        Self {
            load_lb: None,
            ..self.clone()
        }
    }

    /// Copy of the instance with the given lower bounds.
    pub fn with_lower_bounds(&self, load_lb: Vec<u32>) -> Result<Self> {
        Self::new(
            self.num_reviewers,
            self.num_papers,
            self.affinity.clone(),
            self.load_ub.clone(),
            Some(load_lb),
            self.coverage.clone(),
        )
    }

    /// Affinities of one paper's column, one entry per reviewer.
    pub fn column(&self, paper: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_reviewers).map(move |i| self.affinity(i, paper))
    }
}

/// Fractional or integral assignment values `x_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    num_reviewers: usize,
    num_papers: usize,
    values: Vec<f64>,
    integral: bool,
}

impl Matching {
    /// Matching with no assignments.
    pub fn empty(num_reviewers: usize, num_papers: usize) -> Self {
        Self {
            num_reviewers,
            num_papers,
            values: vec![0.0; num_reviewers * num_papers],
            integral: true,
        }
    }

    /// Fractional matching; every value must lie in `[0, 1]`.
    pub fn fractional(num_reviewers: usize, num_papers: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_reviewers * num_papers {
            return Err(Error::InvalidMatching(format!(
                "{} values for a {num_reviewers} x {num_papers} matching",
                values.len()
            )));
        }
        if let Some(pos) = values
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::InvalidMatching(format!(
                "value {} at reviewer {}, paper {} is outside [0, 1]",
                values[pos],
                pos / num_papers.max(1),
                pos % num_papers.max(1)
            )));
        }
        let integral = values.iter().all(|&v| v == 0.0 || v == 1.0);
        Ok(Self {
            num_reviewers,
            num_papers,
            values,
            integral,
        })
    }

    /// Integral matching from a list of `(reviewer, paper)` pairs.
    pub fn from_assignments(
        num_reviewers: usize,
        num_papers: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let mut m = Self::empty(num_reviewers, num_papers);
        for &(i, j) in pairs {
            if i >= num_reviewers {
                return Err(Error::IndexOutOfRange {
                    what: "reviewer",
                    index: i,
                    len: num_reviewers,
                });
            }
            if j >= num_papers {
                return Err(Error::IndexOutOfRange {
                    what: "paper",
                    index: j,
                    len: num_papers,
                });
            }
            if m.is_assigned(i, j) {
                return Err(Error::InvalidMatching(format!(
                    "reviewer {i} assigned to paper {j} twice"
                )));
            }
            m.set(i, j, true);
        }
        Ok(m)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_reviewers, self.num_papers)
    }

    pub fn is_integral(&self) -> bool {
        self.integral
    }

    #[inline]
    pub fn get(&self, reviewer: usize, paper: usize) -> f64 {
        self.values[reviewer * self.num_papers + paper]
    }

    #[inline]
    pub fn is_assigned(&self, reviewer: usize, paper: usize) -> bool {
        self.get(reviewer, paper) == 1.0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn set(&mut self, reviewer: usize, paper: usize, assigned: bool) {
        debug_assert!(self.integral);
        self.values[reviewer * self.num_papers + paper] = if assigned { 1.0 } else { 0.0 };
    }

    /// Reviewers assigned to `paper`, in increasing index order.
    pub fn reviewers_of(&self, paper: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_reviewers).filter(move |&i| self.is_assigned(i, paper))
    }

    pub fn papers_of(&self, reviewer: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_papers).filter(move |&j| self.is_assigned(reviewer, j))
    }

    /// Row sum of `x` for one reviewer.
    pub fn load(&self, reviewer: usize) -> f64 {
        self.values[reviewer * self.num_papers..(reviewer + 1) * self.num_papers]
            .iter()
            .sum()
    }

    /// Column sum of `x` for one paper.
    pub fn coverage(&self, paper: usize) -> f64 {
        (0..self.num_reviewers).map(|i| self.get(i, paper)).sum()
    }

    pub fn loads(&self) -> Vec<f64> {
        (0..self.num_reviewers).map(|i| self.load(i)).collect()
    }

    /// All assigned `(reviewer, paper)` pairs sorted by paper, then reviewer.
    pub fn assignments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.num_papers {
            for i in 0..self.num_reviewers {
                if self.is_assigned(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Coverage,
    LoadUb,
    LoadLb,
    Fairness,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Coverage => "coverage",
            ViolationKind::LoadUb => "load_ub",
            ViolationKind::LoadLb => "load_lb",
            ViolationKind::Fairness => "fairness",
        })
    }
}

/// One constraint a matching fails to satisfy. `subject` is a paper index for
/// coverage and fairness, a reviewer index for load bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: usize,
    pub amount: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let who = match self.kind {
            ViolationKind::Coverage | ViolationKind::Fairness => "paper",
            ViolationKind::LoadUb | ViolationKind::LoadLb => "reviewer",
        };
        write!(
            f,
            "{} violated at {who} {} by {}",
            self.kind, self.subject, self.amount
        )
    }
}

fn check_shape(instance: &Instance, matching: &Matching) -> Result<()> {
    if instance.shape() != matching.shape() {
        return Err(Error::ShapeMismatch {
            expected: instance.shape(),
            found: matching.shape(),
        });
    }
    Ok(())
}

/// Sum of affinities of the reviewers assigned to `paper`, weighted by `x`.
pub fn paper_score(instance: &Instance, matching: &Matching, paper: usize) -> Result<f64> {
    check_shape(instance, matching)?;
    if paper >= instance.num_papers() {
        return Err(Error::IndexOutOfRange {
            what: "paper",
            index: paper,
            len: instance.num_papers(),
        });
    }
    Ok(column_score(instance, matching, paper))
}

pub(crate) fn column_score(instance: &Instance, matching: &Matching, paper: usize) -> f64 {
    (0..instance.num_reviewers())
        .map(|i| matching.get(i, paper) * instance.affinity(i, paper))
        .sum()
}

/// Paper scores of every paper.
pub fn paper_scores(instance: &Instance, matching: &Matching) -> Result<Vec<f64>> {
    check_shape(instance, matching)?;
    Ok((0..instance.num_papers())
        .map(|j| column_score(instance, matching, j))
        .collect())
}

/// Total affinity of the matching.
pub fn objective(instance: &Instance, matching: &Matching) -> Result<f64> {
    check_shape(instance, matching)?;
    Ok(instance
        .affinities()
        .iter()
        .zip(matching.values())
        .map(|(a, x)| a * x)
        .sum())
}

/// Lists every constraint the integral matching breaks once loads may deviate
/// by `load_slack` and paper scores may fall `fairness_slack` below the threshold.
pub fn validate(
    instance: &Instance,
    matching: &Matching,
    load_slack: u32,
    fairness_threshold: Option<f64>,
    fairness_slack: f64,
) -> Result<Vec<Violation>> {
    check_shape(instance, matching)?;
    if !matching.is_integral() {
        return Err(Error::Precondition(
            "validate requires an integral matching".into(),
        ));
    }
    let mut out = Vec::new();
    for (j, &c) in instance.coverage().iter().enumerate() {
        let cov = matching.coverage(j);
        if cov != f64::from(c) {
            out.push(Violation {
                kind: ViolationKind::Coverage,
                subject: j,
                amount: (cov - f64::from(c)).abs(),
            });
        }
    }
    let slack = i64::from(load_slack);
    for i in 0..instance.num_reviewers() {
        let load = matching.load(i) as i64;
        let ub = i64::from(instance.load_ub()[i]) + slack;
        let lb = i64::from(instance.lower(i)) - slack;
        if load > ub {
            out.push(Violation {
                kind: ViolationKind::LoadUb,
                subject: i,
                amount: (load - ub) as f64,
            });
        }
        if load < lb {
            out.push(Violation {
                kind: ViolationKind::LoadLb,
                subject: i,
                amount: (lb - load) as f64,
            });
        }
    }
    if let Some(t) = fairness_threshold {
        let floor = t - fairness_slack;
        for j in 0..instance.num_papers() {
            let score = column_score(instance, matching, j);
            if score < floor - SCORE_TOL {
                out.push(Violation {
                    kind: ViolationKind::Fairness,
                    subject: j,
                    amount: floor - score,
                });
            }
        }
    }
    Ok(out)
}

/// Why an instance cannot have any valid matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Infeasibility {
    CapacityDeficit {
        capacity: u64,
        demand: u64,
    },
    InvertedBounds {
        reviewer: usize,
        lower: u32,
        upper: u32,
    },
    CoverageExceedsReviewers {
        paper: usize,
        coverage: u32,
    },
    LowerBoundsExceedDemand {
        lower: u64,
        demand: u64,
    },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::CapacityDeficit { capacity, demand } => write!(
                f,
                "total reviewer capacity {capacity} is below total coverage {demand} (deficit {})",
                demand - capacity
            ),
            Infeasibility::InvertedBounds {
                reviewer,
                lower,
                upper,
            } => write!(
                f,
                "reviewer {reviewer} has load lower bound {lower} above upper bound {upper}"
            ),
            Infeasibility::CoverageExceedsReviewers { paper, coverage } => write!(
                f,
                "paper {paper} needs {coverage} reviewers, more than exist"
            ),
            Infeasibility::LowerBoundsExceedDemand { lower, demand } => write!(
                f,
                "load lower bounds sum to {lower}, above total coverage {demand}"
            ),
        }
    }
}

/// Cheap necessary conditions for a valid matching to exist. Passing does not
/// imply any fairness threshold is attainable.
pub fn feasibility_precheck(instance: &Instance) -> std::result::Result<(), Infeasibility> {
    if let Some(lb) = instance.load_lb() {
        for (i, (&l, &u)) in lb.iter().zip(instance.load_ub()).enumerate() {
            if l > u {
                return Err(Infeasibility::InvertedBounds {
                    reviewer: i,
                    lower: l,
                    upper: u,
                });
            }
        }
    }
    let demand = instance.total_coverage();
    let capacity = instance.total_capacity();
    if capacity < demand {
        return Err(Infeasibility::CapacityDeficit { capacity, demand });
    }
    for (j, &c) in instance.coverage().iter().enumerate() {
        if c as usize > instance.num_reviewers() {
            return Err(Infeasibility::CoverageExceedsReviewers {
                paper: j,
                coverage: c,
            });
        }
    }
    let lower = instance.total_lower();
    if lower > demand {
        return Err(Infeasibility::LowerBoundsExceedDemand { lower, demand });
    }
    Ok(())
}

pub(crate) fn require_feasible(instance: &Instance) -> Result<()> {
    feasibility_precheck(instance).map_err(|e| Error::Infeasible(e.to_string()))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Four reviewers, four papers, `U = L = C = 2`; reviewers 0 and 1 have
    /// affinity 0.9 with every paper, reviewers 2 and 3 have 0.1.
    pub fn two_tier() -> Instance {
        let rows = vec![vec![0.9; 4], vec![0.9; 4], vec![0.1; 4], vec![0.1; 4]];
        Instance::from_rows(&rows, vec![2; 4], Some(vec![2; 4]), vec![2; 4]).unwrap()
    }

    /// Strong reviewers on papers 0 and 1, weak reviewers on papers 2 and 3.
    pub fn two_tier_unfair() -> Matching {
        Matching::from_assignments(
            4,
            4,
            &[
                (0, 0),
                (0, 1),
                (1, 0),
                (1, 1),
                (2, 2),
                (2, 3),
                (3, 2),
                (3, 3),
            ],
        )
        .unwrap()
    }

    /// One strong and one weak reviewer per paper.
    pub fn two_tier_fair() -> Matching {
        Matching::from_assignments(
            4,
            4,
            &[
                (0, 0),
                (0, 1),
                (1, 2),
                (1, 3),
                (2, 0),
                (2, 1),
                (3, 2),
                (3, 3),
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn two_tier_scores() {
        let inst = two_tier();
        let fair = two_tier_fair();
        for j in 0..4 {
            assert!((paper_score(&inst, &fair, j).unwrap() - 1.0).abs() < 1e-12);
        }
        let unfair = two_tier_unfair();
        let scores = paper_scores(&inst, &unfair).unwrap();
        assert!((scores[0] - 1.8).abs() < 1e-12);
        assert!((scores[3] - 0.2).abs() < 1e-12);
        assert!((objective(&inst, &fair).unwrap() - 4.0).abs() < 1e-12);
        assert!((objective(&inst, &unfair).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matching_scores_zero() {
        let inst = two_tier();
        let m = Matching::empty(4, 4);
        assert_eq!(paper_score(&inst, &m, 2).unwrap(), 0.0);
        assert_eq!(objective(&inst, &m).unwrap(), 0.0);
    }

    #[test]
    fn fractional_dot_product() {
        let inst = Instance::from_rows(
            &[
                vec![0.5, -0.25, 1.0],
                vec![0.75, 0.125, -1.0],
                vec![0.0, 2.0, 0.5],
            ],
            vec![3; 3],
            None,
            vec![1; 3],
        )
        .unwrap();
        let x = Matching::fractional(3, 3, vec![0.5, 0.25, 1.0, 0.5, 0.0, 0.5, 0.0, 0.75, 0.25])
            .unwrap();
        // column 1: 0.25 * -0.25 + 0 * 0.125 + 0.75 * 2.0
        assert!((paper_score(&inst, &x, 1).unwrap() - 1.4375).abs() < 1e-12);
        assert!(!x.is_integral());
    }

    #[test]
    fn out_of_range_paper() {
        let inst = two_tier();
        assert!(matches!(
            paper_score(&inst, &two_tier_fair(), 4),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn shape_mismatch() {
        let inst = two_tier();
        assert!(matches!(
            objective(&inst, &Matching::empty(3, 4)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn rejects_values_outside_unit_interval() {
        assert!(Matching::fractional(1, 2, vec![0.5, 1.5]).is_err());
        assert!(Matching::fractional(1, 2, vec![-0.1, 0.0]).is_err());
    }

    #[test]
    fn rejects_non_finite_affinity() {
        assert!(Instance::from_rows(&[vec![f64::NAN]], vec![1], None, vec![1]).is_err());
    }

    #[test]
    fn validate_fair_matching_is_clean() {
        let v = validate(&two_tier(), &two_tier_fair(), 0, Some(1.0), 0.0).unwrap();
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn validate_unfair_matching_reports_two_papers() {
        let v = validate(&two_tier(), &two_tier_unfair(), 0, Some(1.0), 0.0).unwrap();
        assert_eq!(v.len(), 2);
        for (viol, paper) in v.iter().zip([2, 3]) {
            assert_eq!(viol.kind, ViolationKind::Fairness);
            assert_eq!(viol.subject, paper);
            assert!((viol.amount - 0.8).abs() < 1e-9);
        }
    }

    #[test]
    fn large_load_slack_hides_load_violations() {
        let inst = two_tier();
        let m = Matching::from_assignments(4, 4, &[(0, 0), (0, 1), (0, 2), (0, 3)]).unwrap();
        let v = validate(&inst, &m, 4, None, 0.0).unwrap();
        assert!(v.iter().all(|x| x.kind == ViolationKind::Coverage));
        let strict = validate(&inst, &m, 0, None, 0.0).unwrap();
        assert!(strict.iter().any(|x| x.kind == ViolationKind::LoadUb));
        assert!(strict.iter().any(|x| x.kind == ViolationKind::LoadLb));
    }

    #[test]
    fn precheck() {
        assert_eq!(feasibility_precheck(&two_tier()), Ok(()));
        let short = Instance::from_rows(&[vec![1.0, 1.0]], vec![1], None, vec![1, 1]).unwrap();
        assert_eq!(
            feasibility_precheck(&short),
            Err(Infeasibility::CapacityDeficit {
                capacity: 1,
                demand: 2
            })
        );
        let inverted = Instance::from_rows(&[vec![1.0]], vec![1], Some(vec![2]), vec![1]).unwrap();
        assert!(matches!(
            feasibility_precheck(&inverted),
            Err(Infeasibility::InvertedBounds { .. })
        ));
        let wide = Instance::from_rows(&[vec![1.0]], vec![5], None, vec![2]).unwrap();
        assert!(matches!(
            feasibility_precheck(&wide),
            Err(Infeasibility::CoverageExceedsReviewers { .. })
        ));
    }

    #[test]
    fn a_max_bounds_every_entry() {
        let inst = two_tier();
        assert_eq!(inst.a_max(), 0.9);
        assert!(inst.affinities().iter().all(|&a| a <= inst.a_max()));
    }
}
