//! Summary statistics and quintile profiles of matchings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{objective, paper_scores, Instance, Matching};

/// Paper-score (`ps`) and reviewer-assignment (`ra`) statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingStats {
    pub objective: f64,
    pub min_ps: f64,
    pub max_ps: f64,
    pub mean_ps: f64,
    pub std_ps: f64,
    pub min_ra: u64,
    pub max_ra: u64,
    pub std_ra: f64,
    pub wall_time: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Statistics of an integral matching; standard deviations are population ones.
pub fn compute_stats(
    instance: &Instance,
    matching: &Matching,
    wall_time: f64,
) -> Result<MatchingStats> {
    if !matching.is_integral() {
        return Err(Error::Precondition(
            "statistics need an integral matching".into(),
        ));
    }
    let scores = paper_scores(instance, matching)?;
    let loads = matching.loads();
    let (mean_ps, std_ps) = mean_std(&scores);
    let (_, std_ra) = mean_std(&loads);
    let fold = |xs: &[f64], init: f64, f: fn(f64, f64) -> f64| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().cloned().fold(init, f)
        }
    };
    Ok(MatchingStats {
        objective: objective(instance, matching)?,
        min_ps: fold(&scores, f64::INFINITY, f64::min),
        max_ps: fold(&scores, f64::NEG_INFINITY, f64::max),
        mean_ps,
        std_ps,
        min_ra: fold(&loads, f64::INFINITY, f64::min) as u64,
        max_ra: fold(&loads, f64::NEG_INFINITY, f64::max) as u64,
        std_ra,
        wall_time,
    })
}

/// Boxplot summary of one quintile of sorted paper scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuintileSummary {
    pub size: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub median: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub quintiles: Vec<QuintileSummary>,
}

/// Sizes of the five quintiles of `n` scores; the last takes the remainder.
pub fn quintile_sizes(n: usize) -> [usize; 5] {
    let base = n / 5;
    [base, base, base, base, base + n % 5]
}

/// Sizes of the groups a, b, c, d within a quintile of `n` scores; extras go
/// to d first, then c, then b.
pub fn group_sizes(n: usize) -> [usize; 4] {
    let g = n / 4;
    let extra = n % 4;
    [
        g,
        g + usize::from(extra >= 3),
        g + usize::from(extra >= 2),
        g + usize::from(extra >= 1),
    ]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn first_nonempty(order: [&[f64]; 4]) -> &[f64] {
    order.into_iter().find(|g| !g.is_empty()).unwrap_or(&[])
}

fn summarize(q: &[f64]) -> QuintileSummary {
    let sizes = group_sizes(q.len());
    let mut groups: [&[f64]; 4] = [&[]; 4];
    let mut at = 0;
    for (g, &s) in groups.iter_mut().zip(&sizes) {
        *g = &q[at..at + s];
        at += s;
    }
    let [a, b, c, d] = groups;
    let b_min = first_nonempty([b, c, d, a])[0];
    let c_group = first_nonempty([c, b, a, d]);
    let c_max = c_group[c_group.len() - 1];
    let half = (c_max - b_min) / 2.0;
    let (lo_fence, hi_fence) = (b_min - half, c_max + half);
    let whisker_lo = q.iter().cloned().find(|&x| x >= lo_fence).unwrap_or(b_min);
    let whisker_hi = q
        .iter()
        .rev()
        .cloned()
        .find(|&x| x <= hi_fence)
        .unwrap_or(c_max);
    let outliers = q
        .iter()
        .cloned()
        .filter(|&x| x < whisker_lo || x > whisker_hi)
        .collect();
    QuintileSummary {
        size: q.len(),
        box_lo: b_min,
        box_hi: c_max,
        whisker_lo,
        whisker_hi,
        median: median(q),
        outliers,
    }
}

/// Quintile profile of the paper scores. Needs at least five finite scores.
pub fn compute_profile(scores: &[f64]) -> Result<Profile> {
    if scores.len() < 5 {
        return Err(Error::Precondition(format!(
            "a profile needs at least 5 scores, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Precondition("profile scores must be finite".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut quintiles = Vec::with_capacity(5);
    let mut at = 0;
    for size in quintile_sizes(sorted.len()) {
        quintiles.push(summarize(&sorted[at..at + size]));
        at += size;
    }
    Ok(Profile { quintiles })
}
