#![allow(dead_code)]

use fairmatch::mcf::FlowNetwork;
use fairmatch::{Instance, Matching};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Four reviewers, four papers, `U = L = C = 2`. Reviewers 0 and 1 score 0.9
/// on every paper, reviewers 2 and 3 score 0.1.
pub fn two_tier() -> Instance {
    let rows = vec![vec![0.9; 4], vec![0.9; 4], vec![0.1; 4], vec![0.1; 4]];
    Instance::from_rows(&rows, vec![2; 4], Some(vec![2; 4]), vec![2; 4]).unwrap()
}

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

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub reviewers: (usize, usize),
    pub papers: (usize, usize),
    pub max_coverage: u32,
    pub lower_bounds: bool,
    /// Affinities are drawn from `[affinity_lo, 1)`.
    pub affinity_lo: f64,
}

impl Shape {
    /// At most 5 reviewers, 4 papers and coverage 2.
    pub fn tiny() -> Self {
        Self {
            reviewers: (2, 5),
            papers: (1, 4),
            max_coverage: 2,
            lower_bounds: false,
            affinity_lo: 0.0,
        }
    }

    /// Up to 20 reviewers and 30 papers.
    pub fn suite(lower_bounds: bool) -> Self {
        Self {
            reviewers: (4, 20),
            papers: (4, 30),
            max_coverage: 3,
            lower_bounds,
            affinity_lo: 0.0,
        }
    }
}

/// A seeded instance that passes the feasibility precheck. Coverage varies
/// per paper; loads are just large enough with a little spare capacity.
pub fn random_instance(seed: u64, shape: Shape) -> Instance {
    let mut rng = rng(seed);
    let nr = rng.random_range(shape.reviewers.0..=shape.reviewers.1);
    let np = rng.random_range(shape.papers.0..=shape.papers.1);
    let cmax = shape.max_coverage.min(nr as u32);
    let coverage: Vec<u32> = (0..np).map(|_| rng.random_range(1..=cmax)).collect();
    let demand: u32 = coverage.iter().sum();
    let base = demand.div_ceil(nr as u32);
    let load_ub: Vec<u32> = (0..nr).map(|_| base + rng.random_range(0..=1)).collect();
    let load_lb = shape.lower_bounds.then(|| {
        let floor = demand / nr as u32;
        (0..nr)
            .map(|_| rng.random_range(0..=floor))
            .collect::<Vec<u32>>()
    });
    let affinities: Vec<f64> = (0..nr * np)
        .map(|_| rng.random_range(shape.affinity_lo..1.0))
        .collect();
    Instance::new(nr, np, affinities, load_ub, load_lb, coverage).unwrap()
}

/// At most 12 nodes and 25 arcs with capacities up to 3, one or two sources
/// and one or two sinks. Costs may be negative.
pub fn random_network(seed: u64) -> FlowNetwork {
    let mut rng = rng(seed);
    let n = rng.random_range(2..=12);
    let mut net = FlowNetwork::new(n);
    let m = rng.random_range(1..=25);
    for _ in 0..m {
        let from = rng.random_range(0..n);
        let mut to = rng.random_range(0..n - 1);
        if to >= from {
            to += 1;
        }
        net.add_arc(from, to, rng.random_range(0..=3), rng.random_range(-5..=10))
            .unwrap();
    }
    let mut nodes: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let swap = rng.random_range(k..n);
        nodes.swap(k, swap);
    }
    let sources = if n >= 4 { rng.random_range(1..=2) } else { 1 };
    let sinks = if n >= 4 { rng.random_range(1..=2) } else { 1 };
    for &v in &nodes[..sources] {
        net.set_supply(v, rng.random_range(1..=4)).unwrap();
    }
    for &v in &nodes[sources..sources + sinks] {
        net.set_supply(v, -rng.random_range(1..=4)).unwrap();
    }
    net
}

/// Maximum routable flow and the least cost of moving it, found by trying
/// every integral flow on every arc. Arcs are visited in order of their later
/// endpoint so that nodes close early and unbalanced branches are cut.
pub fn enumerate_min_cost_flow(net: &FlowNetwork) -> (i64, i64) {
    let mut order: Vec<usize> = (0..net.arcs().len()).collect();
    order.sort_by_key(|&k| {
        let a = net.arcs()[k];
        (a.from.max(a.to), a.from.min(a.to))
    });
    let n = net.num_nodes();
    let mut out_rem = vec![0i64; n];
    let mut in_rem = vec![0i64; n];
    for a in net.arcs() {
        out_rem[a.from] += a.capacity;
        in_rem[a.to] += a.capacity;
    }
    let mut state = Enum {
        net,
        order,
        balance: vec![0; n],
        out_rem,
        in_rem,
        cost: 0,
        best: None,
    };
    state.walk(0);
    state.best.unwrap_or((0, 0))
}

struct Enum<'a> {
    net: &'a FlowNetwork,
    order: Vec<usize>,
    balance: Vec<i64>,
    out_rem: Vec<i64>,
    in_rem: Vec<i64>,
    cost: i64,
    best: Option<(i64, i64)>,
}

impl Enum<'_> {
    fn range(&self, v: usize) -> (i64, i64) {
        let s = self.net.supply()[v];
        if s >= 0 {
            (0, s)
        } else {
            (s, 0)
        }
    }

    fn reachable(&self, v: usize) -> bool {
        let (lo, hi) = self.range(v);
        self.balance[v] + self.out_rem[v] >= lo && self.balance[v] - self.in_rem[v] <= hi
    }

    fn walk(&mut self, k: usize) {
        if k == self.order.len() {
            let total: i64 = (0..self.net.num_nodes())
                .filter(|&v| self.net.supply()[v] > 0)
                .map(|v| self.balance[v])
                .sum();
            let better = match self.best {
                None => true,
                Some((f, c)) => total > f || (total == f && self.cost < c),
            };
            if better {
                self.best = Some((total, self.cost));
            }
            return;
        }
        let a = self.net.arcs()[self.order[k]];
        self.out_rem[a.from] -= a.capacity;
        self.in_rem[a.to] -= a.capacity;
        for f in 0..=a.capacity {
            self.balance[a.from] += f;
            self.balance[a.to] -= f;
            self.cost += f * a.cost;
            if self.reachable(a.from) && self.reachable(a.to) {
                self.walk(k + 1);
            }
            self.balance[a.from] -= f;
            self.balance[a.to] += f;
            self.cost -= f * a.cost;
        }
        self.out_rem[a.from] += a.capacity;
        self.in_rem[a.to] += a.capacity;
    }
}

/// Smallest paper score of an integral matching.
pub fn min_paper_score(instance: &Instance, matching: &Matching) -> f64 {
    fairmatch::paper_scores(instance, matching)
        .unwrap()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
