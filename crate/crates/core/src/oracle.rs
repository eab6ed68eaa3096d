//! Exhaustive solvers for tiny instances.
//!
//! Matchings are enumerated paper by paper, choosing a `C_j`-subset of
//! reviewers in lexicographic order and backtracking on load bounds. Every
//! matching with exact coverage and loads in `[L_i, U_i]` is visited once.

use crate::error::{Error, Result};
use crate::model::{column_score, Instance, Matching, SCORE_TOL};

/// Largest search space (product of per-paper subset counts) accepted.
pub const MAX_SEARCH_SPACE: f64 = 1e7;

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Product over papers of `binom(R, C_j)`.
pub fn search_space(instance: &Instance) -> f64 {
    instance
        .coverage()
        .iter()
        .map(|&c| binomial(instance.num_reviewers(), c as usize))
        .product()
}

struct Walk<'a, F> {
    instance: &'a Instance,
    current: Matching,
    loads: Vec<u32>,
    deficit: u64,
    remaining: u64,
    visit: F,
}

impl<F: FnMut(&Matching)> Walk<'_, F> {
    fn paper(&mut self, j: usize) {
        if j == self.instance.num_papers() {
            if self.deficit == 0 {
                (self.visit)(&self.current);
            }
            return;
        }
        let c = self.instance.coverage()[j] as usize;
        self.remaining -= c as u64;
        self.subset(j, 0, c);
        self.remaining += c as u64;
    }

    fn subset(&mut self, j: usize, from: usize, left: usize) {
        if left == 0 {
            // Reviewers still below their lower bound need enough later slots.
            if self.deficit <= self.remaining {
                self.paper(j + 1);
            }
            return;
        }
        let nr = self.instance.num_reviewers();
        for i in from..=nr - left {
            if self.loads[i] >= self.instance.load_ub()[i] {
                continue;
            }
            let below = self.loads[i] < self.instance.lower(i);
            self.loads[i] += 1;
            if below {
                self.deficit -= 1;
            }
            self.current.set(i, j, true);
            self.subset(j, i + 1, left - 1);
            self.current.set(i, j, false);
            if below {
                self.deficit += 1;
            }
            self.loads[i] -= 1;
        }
    }
}

/// Calls `visit` on every valid integral matching, in lexicographic order of
/// per-paper reviewer subsets.
pub fn for_each_matching<F: FnMut(&Matching)>(instance: &Instance, visit: F) -> Result<()> {
    let space = search_space(instance);
    if space > MAX_SEARCH_SPACE {
        return Err(Error::SearchSpaceTooLarge(space));
    }
    let (nr, np) = instance.shape();
    let mut walk = Walk {
        instance,
        current: Matching::empty(nr, np),
        loads: vec![0; nr],
        deficit: instance.total_lower(),
        remaining: instance.total_coverage(),
        visit,
    };
    if instance.coverage().iter().any(|&c| c as usize > nr) {
        return Ok(());
    }
    walk.paper(0);
    Ok(())
}

/// Every valid integral matching.
pub fn enumerate_matchings(instance: &Instance) -> Result<Vec<Matching>> {
    let mut out = Vec::new();
    for_each_matching(instance, |m| out.push(m.clone()))?;
    Ok(out)
}

fn best_by<K>(instance: &Instance, mut key: K) -> Result<Option<(f64, Matching)>>
where
    K: FnMut(&Matching) -> Option<f64>,
{
    let mut best: Option<(f64, Matching)> = None;
    for_each_matching(instance, |m| {
        if let Some(v) = key(m) {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, m.clone()));
            }
        }
    })?;
    Ok(best)
}

fn total(instance: &Instance, m: &Matching) -> f64 {
    (0..instance.num_papers())
        .map(|j| column_score(instance, m, j))
        .sum()
}

fn min_score(instance: &Instance, m: &Matching) -> f64 {
    (0..instance.num_papers())
        .map(|j| column_score(instance, m, j))
        .fold(f64::INFINITY, f64::min)
}

fn no_matching() -> Error {
    Error::Infeasible("no valid matching exists".into())
}

/// Maximum total affinity and the first matching attaining it.
pub fn brute_force_optimal(instance: &Instance) -> Result<(f64, Matching)> {
    best_by(instance, |m| Some(total(instance, m)))?.ok_or_else(no_matching)
}

/// Maximum over matchings of the minimum paper score, and the first
/// matching attaining it.
pub fn brute_force_maximin(instance: &Instance) -> Result<(f64, Matching)> {
    best_by(instance, |m| Some(min_score(instance, m)))?.ok_or_else(no_matching)
}

/// Maximum total affinity among matchings whose every paper scores at least
/// `t`, or `None` when no matching reaches `t`.
pub fn brute_force_optimal_above(instance: &Instance, t: f64) -> Result<Option<(f64, Matching)>> {
    best_by(instance, |m| {
        (min_score(instance, m) >= t - SCORE_TOL).then(|| total(instance, m))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{two_tier, two_tier_fair, two_tier_unfair};
    use std::collections::HashSet;

    #[test]
    fn two_tier_contains_both_matchings() {
        let all = enumerate_matchings(&two_tier()).unwrap();
        assert!(all.contains(&two_tier_fair()));
        assert!(all.contains(&two_tier_unfair()));
        let unique: HashSet<Vec<(usize, usize)>> = all.iter().map(|m| m.assignments()).collect();
        assert_eq!(unique.len(), all.len());
    }

    #[test]
    fn two_tier_optima() {
        let inst = two_tier();
        assert!((brute_force_optimal(&inst).unwrap().0 - 4.0).abs() < 1e-12);
        assert!((brute_force_maximin(&inst).unwrap().0 - 1.0).abs() < 1e-12);
        assert!(brute_force_optimal_above(&inst, 1.01).unwrap().is_none());
    }

    #[test]
    fn single_pair() {
        let inst = Instance::from_rows(&[vec![0.4]], vec![1], None, vec![1]).unwrap();
        let all = enumerate_matchings(&inst).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(brute_force_optimal(&inst).unwrap().1, all[0]);
    }

    #[test]
    fn counts_with_unit_loads() {
        // Paper 0 picks 2 of 4 reviewers, paper 1 takes the other 2.
        let inst =
            Instance::from_rows(&vec![vec![0.0, 0.0]; 4], vec![1; 4], None, vec![2, 2]).unwrap();
        assert_eq!(enumerate_matchings(&inst).unwrap().len(), 6);
    }

    #[test]
    fn lower_bounds_prune() {
        // Two papers of coverage 1; reviewer 0 must review one of them.
        let inst = Instance::from_rows(
            &[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![2, 2, 2],
            Some(vec![1, 0, 0]),
            vec![1, 1],
        )
        .unwrap();
        // 9 total, 4 avoid reviewer 0.
        assert_eq!(enumerate_matchings(&inst).unwrap().len(), 5);
    }

    #[test]
    fn one_paper_maximin_is_top_subset() {
        let inst = Instance::from_rows(
            &[vec![0.2], vec![0.9], vec![0.5], vec![0.7]],
            vec![1; 4],
            None,
            vec![2],
        )
        .unwrap();
        assert!((brute_force_maximin(&inst).unwrap().0 - 1.6).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_spaces() {
        let inst =
            Instance::from_rows(&vec![vec![0.0; 10]; 30], vec![10; 30], None, vec![3; 10]).unwrap();
        assert!(matches!(
            enumerate_matchings(&inst),
            Err(Error::SearchSpaceTooLarge(_))
        ));
    }
}
