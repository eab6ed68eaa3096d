//! Integer min-cost max-flow by successive shortest paths with node potentials.
//!
//! Sources are nodes with positive supply, sinks nodes with negative supply.
//! The solver routes as much flow as possible from sources to sinks (no source
//! exceeds its supply, no sink its demand) and, among all plans moving that
//! amount, returns one of minimum cost. Negative arc costs are allowed;
//! negative cycles present before any flow is sent are cancelled first, after
//! which one Bellman-Ford pass gives feasible potentials and every later
//! search runs Dijkstra on reduced costs.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
    pub cost: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    supply: Vec<i64>,
}

impl FlowNetwork {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            arcs: Vec::new(),
            supply: vec![0; num_nodes],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.supply.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.supply.push(0);
        self.supply.len() - 1
    }

    /// Adds an arc and returns its index.
    pub fn add_arc(&mut self, from: usize, to: usize, capacity: i64, cost: i64) -> Result<usize> {
        let n = self.num_nodes();
        if from >= n || to >= n {
            return Err(Error::MalformedNetwork(format!(
                "arc {from} -> {to} references a node outside 0..{n}"
            )));
        }
        if from == to {
            return Err(Error::MalformedNetwork(format!("self-loop at node {from}")));
        }
        if capacity < 0 {
            return Err(Error::MalformedNetwork(format!(
                "arc {from} -> {to} has negative capacity {capacity}"
            )));
        }
        self.arcs.push(Arc {
            from,
            to,
            capacity,
            cost,
        });
        Ok(self.arcs.len() - 1)
    }

    pub fn set_supply(&mut self, node: usize, supply: i64) -> Result<()> {
        let n = self.num_nodes();
        *self.supply.get_mut(node).ok_or_else(|| {
            Error::MalformedNetwork(format!("supply set on node {node} outside 0..{n}"))
        })? = supply;
        Ok(())
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn supply(&self) -> &[i64] {
        &self.supply
    }

    pub fn total_supply(&self) -> i64 {
        self.supply.iter().filter(|&&s| s > 0).sum()
    }

    /// DIMACS min-cost-flow text (1-based node ids).
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p min {} {}", self.num_nodes(), self.arcs.len());
        for (v, &s) in self.supply.iter().enumerate() {
            if s != 0 {
                let _ = writeln!(out, "n {} {s}", v + 1);
            }
        }
        for a in &self.arcs {
            let _ = writeln!(
                out,
                "a {} {} 0 {} {}",
                a.from + 1,
                a.to + 1,
                a.capacity,
                a.cost
            );
        }
        out
    }

    fn check_overflow(&self) -> Result<()> {
        let max_cost = self
            .arcs
            .iter()
            .map(|a| i128::from(a.cost).abs())
            .max()
            .unwrap_or(0);
        let supply: i128 = self.supply.iter().map(|&s| i128::from(s).abs()).sum();
        let cap: i128 = self.arcs.iter().map(|a| i128::from(a.capacity)).sum();
        let flow = supply.min(cap).max(1);
        let bound = max_cost * (self.num_nodes() as i128 + 2) * flow;
        if bound >= 1i128 << 62 {
            return Err(Error::Overflow(format!(
                "cost magnitude {max_cost} over {} nodes and flow {flow} may exceed 64-bit range",
                self.num_nodes()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowPlan {
    pub flow: Vec<i64>,
    pub total_flow: i64,
    pub total_cost: i64,
}

/// Residual graph over the network plus a super source and super sink.
struct Residual {
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
    head: Vec<usize>,
    adj: Vec<usize>,
    source: usize,
    sink: usize,
}

impl Residual {
    fn build(net: &FlowNetwork) -> Self {
        let n = net.num_nodes();
        let source = n;
        let sink = n + 1;
        let mut to = Vec::new();
        let mut cap = Vec::new();
        let mut cost = Vec::new();
        let mut from = Vec::new();
        let mut push = |u: usize, v: usize, c: i64, w: i64| {
            from.extend([u, v]);
            to.extend([v, u]);
            cap.extend([c, 0]);
            cost.extend([w, -w]);
        };
        for a in &net.arcs {
            push(a.from, a.to, a.capacity, a.cost);
        }
        for (v, &s) in net.supply.iter().enumerate() {
            if s > 0 {
                push(source, v, s, 0);
            } else if s < 0 {
                push(v, sink, -s, 0);
            }
        }
        let nodes = n + 2;
        let mut head = vec![0; nodes + 1];
        for &u in &from {
            head[u + 1] += 1;
        }
        for v in 0..nodes {
            head[v + 1] += head[v];
        }
        let mut fill = head.clone();
        let mut adj = vec![0; from.len()];
        for (e, &u) in from.iter().enumerate() {
            adj[fill[u]] = e;
            fill[u] += 1;
        }
        Self {
            to,
            cap,
            cost,
            head,
            adj,
            source,
            sink,
        }
    }

    fn nodes(&self) -> usize {
        self.head.len() - 1
    }

    fn edges_from(&self, u: usize) -> &[usize] {
        &self.adj[self.head[u]..self.head[u + 1]]
    }

    /// Bellman-Ford from a virtual root joined to every node. Returns the
    /// distances, or an edge cycle of negative cost.
    fn bellman_ford(&self) -> std::result::Result<Vec<i64>, Vec<usize>> {
        let nodes = self.nodes();
        let mut dist = vec![0i64; nodes];
        let mut parent = vec![usize::MAX; nodes];
        let mut relaxed_last = 0;
        for _ in 0..nodes {
            let mut last = None;
            for u in 0..nodes {
                for &e in self.edges_from(u) {
                    if self.cap[e] <= 0 {
                        continue;
                    }
                    let v = self.to[e];
                    let nd = dist[u] + self.cost[e];
                    if nd < dist[v] {
                        dist[v] = nd;
                        parent[v] = e;
                        last = Some(v);
                    }
                }
            }
            match last {
                None => return Ok(dist),
                Some(v) => relaxed_last = v,
            }
        }
        // Still relaxing after `nodes` passes: the parent chain loops.
        Err(self.extract_cycle(relaxed_last, &parent))
    }

    fn extract_cycle(&self, start: usize, parent: &[usize]) -> Vec<usize> {
        // Walk back far enough to be inside the cycle.
        let mut v = start;
        for _ in 0..self.nodes() {
            v = self.to[parent[v] ^ 1];
        }
        let mut cycle = Vec::new();
        let first = v;
        loop {
            let e = parent[v];
            cycle.push(e);
            v = self.to[e ^ 1];
            if v == first {
                break;
            }
        }
        cycle.reverse();
        cycle
    }

    fn push(&mut self, e: usize, amount: i64) {
        self.cap[e] -= amount;
        self.cap[e ^ 1] += amount;
    }
}

/// Min-cost max-flow. When the total supply cannot be routed, the maximum
/// routable amount is sent and `total_flow` reports it.
pub fn solve_min_cost_flow(network: &FlowNetwork) -> Result<FlowPlan> {
    network.check_overflow()?;
    let mut res = Residual::build(network);
    let nodes = res.nodes();

    let mut potential = loop {
        match res.bellman_ford() {
            Ok(dist) => break dist,
            Err(cycle) => {
                let amount = cycle.iter().map(|&e| res.cap[e]).min().unwrap_or(0);
                debug_assert!(amount > 0);
                for &e in &cycle {
                    res.push(e, amount);
                }
            }
        }
    };

    let mut dist = vec![i64::MAX; nodes];
    let mut parent = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];
    let mut heap = BinaryHeap::new();
    loop {
        dist.iter_mut().for_each(|d| *d = i64::MAX);
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        dist[res.source] = 0;
        heap.push(Reverse((0i64, res.source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for &e in res.edges_from(u) {
                if res.cap[e] <= 0 {
                    continue;
                }
                let v = res.to[e];
                if done[v] {
                    continue;
                }
                let reduced = res.cost[e] + potential[u] - potential[v];
                debug_assert!(reduced >= 0, "negative reduced cost {reduced}");
                let nd = d + reduced;
                if nd < dist[v] {
                    dist[v] = nd;
                    parent[v] = e;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        if !done[res.sink] {
            break;
        }
        for v in 0..nodes {
            if done[v] {
                potential[v] += dist[v];
            }
        }
        let mut bottleneck = i64::MAX;
        let mut v = res.sink;
        while v != res.source {
            let e = parent[v];
            bottleneck = bottleneck.min(res.cap[e]);
            v = res.to[e ^ 1];
        }
        let mut v = res.sink;
        while v != res.source {
            let e = parent[v];
            res.push(e, bottleneck);
            v = res.to[e ^ 1];
        }
    }

    let flow: Vec<i64> = network
        .arcs
        .iter()
        .enumerate()
        .map(|(k, a)| a.capacity - res.cap[2 * k])
        .collect();
    let total_cost = flow
        .iter()
        .zip(&network.arcs)
        .map(|(&f, a)| f * a.cost)
        .sum();
    let total_flow = net_outflow(network, &flow)
        .iter()
        .zip(&network.supply)
        .filter(|(_, &s)| s > 0)
        .map(|(&o, _)| o)
        .sum();
    Ok(FlowPlan {
        flow,
        total_flow,
        total_cost,
    })
}

/// Out-flow minus in-flow at every node.
pub fn net_outflow(network: &FlowNetwork, flow: &[i64]) -> Vec<i64> {
    let mut out = vec![0; network.num_nodes()];
    for (a, &f) in network.arcs.iter().zip(flow) {
        out[a.from] += f;
        out[a.to] -= f;
    }
    out
}

/// Capacity bounds and conservation: transit nodes balance, sources send at
/// most their supply, sinks absorb at most their demand.
pub fn check_plan(network: &FlowNetwork, plan: &FlowPlan) -> Result<()> {
    if plan.flow.len() != network.arcs.len() {
        return Err(Error::Invariant(format!(
            "plan has {} arc flows for {} arcs",
            plan.flow.len(),
            network.arcs.len()
        )));
    }
    for (k, (a, &f)) in network.arcs.iter().zip(&plan.flow).enumerate() {
        if f < 0 || f > a.capacity {
            return Err(Error::Invariant(format!(
                "arc {k} carries {f} outside [0, {}]",
                a.capacity
            )));
        }
    }
    for (v, (&o, &s)) in net_outflow(network, &plan.flow)
        .iter()
        .zip(&network.supply)
        .enumerate()
    {
        let ok = if s > 0 {
            (0..=s).contains(&o)
        } else if s < 0 {
            (s..=0).contains(&o)
        } else {
            o == 0
        };
        if !ok {
            return Err(Error::Invariant(format!(
                "node {v} with supply {s} has net outflow {o}"
            )));
        }
    }
    Ok(())
}

/// Optimality certificate: whether the residual graph of `plan` (including
/// the unused supply and demand of sources and sinks) has a negative cycle.
pub fn has_negative_residual_cycle(network: &FlowNetwork, plan: &FlowPlan) -> bool {
    let n = network.num_nodes();
    let (src_hub, sink_hub) = (n, n + 1);
    let mut edges: Vec<(usize, usize, i64)> = Vec::new();
    for (a, &f) in network.arcs.iter().zip(&plan.flow) {
        if f < a.capacity {
            edges.push((a.from, a.to, a.cost));
        }
        if f > 0 {
            edges.push((a.to, a.from, -a.cost));
        }
    }
    // Separate hubs for sources and sinks, so a cycle may reroute supply or
    // demand but never changes the total amount routed.
    for (v, (&o, &s)) in net_outflow(network, &plan.flow)
        .iter()
        .zip(&network.supply)
        .enumerate()
    {
        if s > 0 {
            if o < s {
                edges.push((src_hub, v, 0));
            }
            if o > 0 {
                edges.push((v, src_hub, 0));
            }
        } else if s < 0 {
            if -o < -s {
                edges.push((v, sink_hub, 0));
            }
            if -o > 0 {
                edges.push((sink_hub, v, 0));
            }
        }
    }
    let nodes = n + 2;
    let mut dist = vec![0i128; nodes];
    for pass in 0..nodes {
        let mut changed = false;
        for &(u, v, c) in &edges {
            let nd = dist[u] + i128::from(c);
            if nd < dist[v] {
                dist[v] = nd;
                changed = true;
            }
        }
        if !changed {
            return false;
        }
        if pass == nodes - 1 {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arc() {
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, 3, -5).unwrap();
        net.set_supply(0, 3).unwrap();
        net.set_supply(1, -3).unwrap();
        let plan = solve_min_cost_flow(&net).unwrap();
        assert_eq!(plan.flow, vec![3]);
        assert_eq!(plan.total_flow, 3);
        assert_eq!(plan.total_cost, -15);
        assert!(!has_negative_residual_cycle(&net, &plan));
    }

    #[test]
    fn partial_routing_reports_max_flow() {
        let mut net = FlowNetwork::new(3);
        net.add_arc(0, 1, 2, 1).unwrap();
        net.add_arc(1, 2, 1, 1).unwrap();
        net.set_supply(0, 5).unwrap();
        net.set_supply(2, -5).unwrap();
        let plan = solve_min_cost_flow(&net).unwrap();
        assert_eq!(plan.total_flow, 1);
        assert_eq!(plan.total_cost, 2);
        check_plan(&net, &plan).unwrap();
    }

    #[test]
    fn prefers_cheaper_path() {
        let mut net = FlowNetwork::new(4);
        net.add_arc(0, 1, 1, 5).unwrap();
        net.add_arc(1, 3, 1, 0).unwrap();
        net.add_arc(0, 2, 1, 1).unwrap();
        net.add_arc(2, 3, 1, 0).unwrap();
        net.set_supply(0, 1).unwrap();
        net.set_supply(3, -1).unwrap();
        let plan = solve_min_cost_flow(&net).unwrap();
        assert_eq!(plan.flow, vec![0, 0, 1, 1]);
    }

    #[test]
    fn cancels_initial_negative_cycle() {
        // 1 -> 2 -> 1 is a negative cycle unrelated to the s-t path.
        let mut net = FlowNetwork::new(4);
        net.add_arc(0, 3, 1, 0).unwrap();
        net.add_arc(1, 2, 2, -3).unwrap();
        net.add_arc(2, 1, 2, 1).unwrap();
        net.set_supply(0, 1).unwrap();
        net.set_supply(3, -1).unwrap();
        let plan = solve_min_cost_flow(&net).unwrap();
        assert_eq!(plan.total_flow, 1);
        assert_eq!(plan.total_cost, -4);
        assert!(!has_negative_residual_cycle(&net, &plan));
    }

    #[test]
    fn disconnected_node_changes_nothing() {
        let mut net = FlowNetwork::new(3);
        net.add_arc(0, 1, 2, -1).unwrap();
        net.add_arc(1, 2, 2, 2).unwrap();
        net.set_supply(0, 2).unwrap();
        net.set_supply(2, -2).unwrap();
        let before = solve_min_cost_flow(&net).unwrap();
        net.add_node();
        assert_eq!(solve_min_cost_flow(&net).unwrap(), before);
    }

    #[test]
    fn malformed_arcs() {
        let mut net = FlowNetwork::new(2);
        assert!(net.add_arc(0, 2, 1, 0).is_err());
        assert!(net.add_arc(1, 1, 1, 0).is_err());
        assert!(net.add_arc(0, 1, -1, 0).is_err());
        assert!(net.set_supply(5, 1).is_err());
    }

    #[test]
    fn overflow_is_rejected() {
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, i64::MAX / 4, i64::MAX / 4).unwrap();
        net.set_supply(0, i64::MAX / 4).unwrap();
        net.set_supply(1, -(i64::MAX / 4)).unwrap();
        assert!(matches!(solve_min_cost_flow(&net), Err(Error::Overflow(_))));
    }

    #[test]
    fn dimacs_export() {
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, 3, -5).unwrap();
        net.set_supply(0, 3).unwrap();
        net.set_supply(1, -3).unwrap();
        assert_eq!(net.to_dimacs(), "p min 2 1\nn 1 3\nn 2 -3\na 1 2 0 3 -5\n");
    }

    #[test]
    fn certificate_detects_suboptimal_plan() {
        let mut net = FlowNetwork::new(4);
        net.add_arc(0, 1, 1, 5).unwrap();
        net.add_arc(1, 3, 1, 0).unwrap();
        net.add_arc(0, 2, 1, 1).unwrap();
        net.add_arc(2, 3, 1, 0).unwrap();
        net.set_supply(0, 1).unwrap();
        net.set_supply(3, -1).unwrap();
        let bad = FlowPlan {
            flow: vec![1, 1, 0, 0],
            total_flow: 1,
            total_cost: 5,
        };
        assert!(has_negative_residual_cycle(&net, &bad));
    }
}
