//! Seeded synthetic instances.
//!
//! All randomness comes from a ChaCha8 stream seeded with `GeneratorSpec::seed`,
//! so an instance is reproducible across platforms. Affinities are drawn
//! row-major first, then any random load bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp};

use crate::error::{Error, Result};
use crate::model::{require_feasible, Instance};

/// Upper bound on cvpr18-like affinities.
pub const CVPR18_CAP: f64 = 11.1;
/// Target mean of cvpr18-like affinities.
pub const CVPR18_MEAN: f64 = 0.36;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AffinityModel {
    /// Independent uniform draws from `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// Reviewers and papers are split round-robin into `blocks` topics. The
    /// first `experts` reviewers of a topic score 0.7..1.0 on its papers;
    /// everyone else scores 0.0..0.2.
    BlockExpert { blocks: usize, experts: usize },
    /// Skewed scores in `[-1, 1]`.
    MidlLike,
    /// Skewed scores in `[0, 1]`.
    CvprLike,
    /// Exponential scores with mean about 0.36, capped at 11.1.
    Cvpr18Like,
}

/// Per-reviewer load upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadBound {
    Fixed(u32),
    /// Uniform over `lo..=hi` per reviewer.
    UniformRange {
        lo: u32,
        hi: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub num_reviewers: usize,
    pub num_papers: usize,
    pub coverage: u32,
    pub load_ub: LoadBound,
    pub load_lb: Option<u32>,
    pub model: AffinityModel,
    pub seed: u64,
}

impl GeneratorSpec {
    /// 177 reviewers, 118 papers, `C = 3`, `U = 4`, `L = 2`, scores in `[-1, 1]`.
    pub fn midl_like(seed: u64) -> Self {
        Self {
            num_reviewers: 177,
            num_papers: 118,
            coverage: 3,
            load_ub: LoadBound::Fixed(4),
            load_lb: Some(2),
            model: AffinityModel::MidlLike,
            seed,
        }
    }

    /// 1373 reviewers, 2623 papers, `C = 3`, `U = 6`, scores in `[0, 1]`.
    pub fn cvpr_like(seed: u64) -> Self {
        Self {
            num_reviewers: 1373,
            num_papers: 2623,
            coverage: 3,
            load_ub: LoadBound::Fixed(6),
            load_lb: None,
            model: AffinityModel::CvprLike,
            seed,
        }
    }

    /// 2840 reviewers, 5062 papers, `C = 3`, `U` uniform over 2..=9.
    pub fn cvpr18_like(seed: u64) -> Self {
        Self {
            num_reviewers: 2840,
            num_papers: 5062,
            coverage: 3,
            load_ub: LoadBound::UniformRange { lo: 2, hi: 9 },
            load_lb: None,
            model: AffinityModel::Cvpr18Like,
            seed,
        }
    }
}

fn draw_affinities(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let (nr, np) = (spec.num_reviewers, spec.num_papers);
    let bad = |what: &str| Error::InvalidInstance(format!("affinity model: {what}"));
    let mut out = Vec::with_capacity(nr * np);
    match spec.model {
        AffinityModel::Uniform { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(bad("uniform range must satisfy lo < hi"));
            }
            for _ in 0..nr * np {
                out.push(rng.random_range(lo..hi));
            }
        }
        AffinityModel::BlockExpert { blocks, experts } => {
            if blocks == 0 {
                return Err(bad("block-expert needs at least one block"));
            }
            for i in 0..nr {
                let topic = i % blocks;
                let expert = i / blocks < experts;
                for j in 0..np {
                    let a = if expert && j % blocks == topic {
                        rng.random_range(0.7..1.0)
                    } else {
                        rng.random_range(0.0..0.2)
                    };
                    out.push(a);
                }
            }
        }
        AffinityModel::MidlLike => {
            let beta = Beta::new(2.0, 3.0).map_err(|e| bad(&e.to_string()))?;
            for _ in 0..nr * np {
                out.push(2.0 * beta.sample(rng) - 1.0);
            }
        }
        AffinityModel::CvprLike => {
            let beta = Beta::new(1.2, 3.0).map_err(|e| bad(&e.to_string()))?;
            for _ in 0..nr * np {
                out.push(beta.sample(rng));
            }
        }
        AffinityModel::Cvpr18Like => {
            let exp = Exp::new(1.0 / CVPR18_MEAN).map_err(|e| bad(&e.to_string()))?;
            for _ in 0..nr * np {
                let a: f64 = exp.sample(rng);
                out.push(a.min(CVPR18_CAP));
            }
        }
    }
    Ok(out)
}

/// Builds the instance described by `spec`. Random load bounds are raised
/// round-robin (up to their maximum) when they fall short of total coverage.
pub fn generate(spec: &GeneratorSpec) -> Result<Instance> {
    if spec.num_reviewers == 0 || spec.num_papers == 0 {
        return Err(Error::InvalidInstance(
            "generator needs at least one reviewer and one paper".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let affinities = draw_affinities(spec, &mut rng)?;
    let nr = spec.num_reviewers;
    let load_ub: Vec<u32> = match spec.load_ub {
        LoadBound::Fixed(u) => vec![u; nr],
        LoadBound::UniformRange { lo, hi } => {
            if lo > hi {
                return Err(Error::InvalidInstance(format!(
                    "load range {lo}..={hi} is empty"
                )));
            }
            let mut ub: Vec<u32> = (0..nr).map(|_| rng.random_range(lo..=hi)).collect();
            let demand = u64::from(spec.coverage) * spec.num_papers as u64;
            let mut total: u64 = ub.iter().map(|&u| u64::from(u)).sum();
            let mut i = 0;
            let mut stuck = 0;
            while total < demand && stuck < nr {
                if ub[i] < hi {
                    ub[i] += 1;
                    total += 1;
                    stuck = 0;
                } else {
                    stuck += 1;
                }
                i = (i + 1) % nr;
            }
            ub
        }
    };
    let load_lb = spec.load_lb.map(|l| vec![l; nr]);
    let instance = Instance::new(
        nr,
        spec.num_papers,
        affinities,
        load_ub,
        load_lb,
        vec![spec.coverage; spec.num_papers],
    )?;
    require_feasible(&instance)?;
    Ok(instance)
}
