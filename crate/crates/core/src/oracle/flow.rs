//! Unit-VM flow network and successive-shortest-path solvers.
//!
//! One flow unit is one VM. A super-source feeds every server with capacity
//! `floor(cap / compute)` at per-unit cost `compute · x(v)`; each substrate
//! edge becomes two opposing arcs of capacity `floor(cap / bandwidth)` at
//! per-unit cost `bandwidth · x(e)`. The candidate logical-switch node is the
//! sink.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::oracle::{CapacityView, CostVector, EdgeFlow, Embedding};
use crate::substrate::{EdgeId, NodeId, SubstrateGraph};
use crate::workload::VcRequest;

/// How each augmenting path is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathSolver {
    /// Dijkstra on reduced costs, stopping once the sink is settled; only
    /// settled nodes take their own distance into the potential.
    #[default]
    DijkstraEarlyStop,
    /// Dijkstra on reduced costs run to exhaustion.
    DijkstraFull,
    /// Bellman-Ford on raw residual costs, no potentials.
    BellmanFord,
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    rev: usize,
    cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapKey(f64);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Read-only network for one (request, costs, view) triple. Per-target
/// solves copy the capacity vector and never mutate the network itself.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    n_vms: u32,
    bandwidth: u32,
    compute: u32,
    source: usize,
    arcs: Vec<Arc>,
    caps: Vec<u32>,
    adjacency: Vec<Vec<usize>>,
    /// Source arc per server that can host at least one VM.
    source_arcs: Vec<(NodeId, usize)>,
    /// `(edge, arc u->v, arc v->u)` for every edge that admits a unit.
    edge_arcs: Vec<(EdgeId, usize, usize)>,
}

/// Result of solving one sink.
#[derive(Debug, Clone)]
pub enum TargetOutcome {
    Solved(TargetFlow),
    Infeasible,
    /// Abandoned because its cost provably exceeds the supplied bound.
    Pruned,
}

#[derive(Debug, Clone)]
pub struct TargetFlow {
    pub target: NodeId,
    pub cost: f64,
    residual: Vec<u32>,
}

impl FlowNetwork {
    pub fn build(
        graph: &SubstrateGraph,
        request: &VcRequest,
        costs: &CostVector,
        view: &CapacityView<'_>,
    ) -> Self {
        let n = graph.node_count();
        let source = n;
        let demand = request.n_vms;
        let mut net = FlowNetwork {
            n_vms: demand,
            bandwidth: request.bandwidth,
            compute: request.compute,
            source,
            arcs: Vec::new(),
            caps: Vec::new(),
            adjacency: vec![Vec::new(); n + 1],
            source_arcs: Vec::new(),
            edge_arcs: Vec::new(),
        };
        for node in graph.servers() {
            let units = (view.node_cap(graph, node.id) / request.compute as u64).min(demand as u64) as u32;
            if units > 0 {
                let cost = request.compute as f64 * costs.node[node.id.index()];
                let a = net.add_arc(source, node.id.index(), units, cost);
                net.source_arcs.push((node.id, a));
            }
        }
        for edge in graph.edges() {
            let units = (view.edge_cap(graph, edge.id) / request.bandwidth as u64).min(demand as u64) as u32;
            if units > 0 {
                let cost = request.bandwidth as f64 * costs.edge[edge.id.index()];
                let (u, v) = (edge.endpoints.0.index(), edge.endpoints.1.index());
                let fwd = net.add_arc(u, v, units, cost);
                let bwd = net.add_arc(v, u, units, cost);
                net.edge_arcs.push((edge.id, fwd, bwd));
            }
        }
        net
    }

    fn add_arc(&mut self, from: usize, to: usize, cap: u32, cost: f64) -> usize {
        let a = self.arcs.len();
        self.arcs.push(Arc { to, rev: a + 1, cost });
        self.arcs.push(Arc {
            to: from,
            rev: a,
            cost: -cost,
        });
        self.caps.extend([cap, 0]);
        self.adjacency[from].push(a);
        self.adjacency[to].push(a + 1);
        a
    }

    fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Total VM units the source can emit; below `n_vms` no sink is feasible.
    pub fn source_supply(&self) -> u64 {
        self.source_arcs.iter().map(|&(_, a)| self.caps[a] as u64).sum()
    }

    /// Full Dijkstra from the super-source on the empty network. `dist[t]`
    /// lower-bounds the cost of every augmenting path towards `t`.
    pub fn source_distances(&self) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.node_count()];
        let mut heap = BinaryHeap::new();
        dist[self.source] = 0.0;
        heap.push(Reverse((HeapKey(0.0), self.source)));
        while let Some(Reverse((HeapKey(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &a in &self.adjacency[u] {
                if self.caps[a] == 0 {
                    continue;
                }
                let arc = self.arcs[a];
                let nd = d + arc.cost;
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    heap.push(Reverse((HeapKey(nd), arc.to)));
                }
            }
        }
        dist.truncate(self.source);
        dist
    }

    /// Lower bound on the flow cost into each node from the last hop alone.
    /// Every unit enters the sink through its own server arc or through one
    /// incident edge, paying at least that arc plus the source distance
    /// `dist` of its tail; channels are filled cheapest first.
    pub fn last_hop_bounds(&self, dist: &[f64]) -> Vec<f64> {
        let mut server_arc = vec![None; self.source];
        for &(v, a) in &self.source_arcs {
            server_arc[v.index()] = Some(a);
        }
        let mut channels: Vec<(f64, u32)> = Vec::new();
        (0..self.source)
            .map(|t| {
                channels.clear();
                if let Some(a) = server_arc[t] {
                    channels.push((self.arcs[a].cost, self.caps[a]));
                }
                // Outgoing edge arcs mirror the incoming ones.
                for &a in &self.adjacency[t] {
                    let arc = self.arcs[a];
                    if self.caps[a] > 0 && arc.to != self.source && dist[arc.to].is_finite() {
                        channels.push((arc.cost + dist[arc.to], self.caps[a]));
                    }
                }
                channels.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut left = self.n_vms;
                let mut total = 0.0;
                for &(c, cap) in &channels {
                    let take = cap.min(left);
                    total += take as f64 * c;
                    left -= take;
                    if left == 0 {
                        return total;
                    }
                }
                f64::INFINITY
            })
            .collect()
    }

    /// Lower bound on the flow cost into `target` with edge capacities
    /// dropped: servers are filled cheapest first, each unit priced at its
    /// server arc plus the shortest path to `target`. Infinite when the
    /// reachable servers cannot host every VM.
    pub fn capacity_lower_bound(&self, target: NodeId) -> f64 {
        let mut dist = vec![f64::INFINITY; self.source];
        let mut heap = BinaryHeap::new();
        dist[target.index()] = 0.0;
        heap.push(Reverse((HeapKey(0.0), target.index())));
        while let Some(Reverse((HeapKey(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            // Edge arcs come in equal-cost pairs, so distances from the
            // target equal distances towards it.
            for &a in &self.adjacency[u] {
                let arc = self.arcs[a];
                if self.caps[a] == 0 || arc.to == self.source {
                    continue;
                }
                let nd = d + arc.cost;
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    heap.push(Reverse((HeapKey(nd), arc.to)));
                }
            }
        }
        let mut units: Vec<(f64, u32)> = self
            .source_arcs
            .iter()
            .filter(|(v, _)| dist[v.index()].is_finite())
            .map(|&(v, a)| (self.arcs[a].cost + dist[v.index()], self.caps[a]))
            .collect();
        units.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = self.n_vms;
        let mut total = 0.0;
        for (c, cap) in units {
            let take = cap.min(left);
            total += take as f64 * c;
            left -= take;
            if left == 0 {
                return total;
            }
        }
        f64::INFINITY
    }

    /// Successive shortest paths from the super-source to `target` for
    /// `n_vms` units. With `bound`, gives up as soon as the remaining demand
    /// priced at the current path length would exceed it.
    pub fn solve_for_target(&self, target: NodeId, solver: PathSolver, bound: Option<f64>) -> TargetOutcome {
        let mut state = SspState::new(self);
        let sink = target.index();
        let mut remaining = self.n_vms;
        let mut total = 0.0;
        while remaining > 0 {
            let found = match solver {
                PathSolver::DijkstraEarlyStop => state.shortest_path_reduced(self, sink, true),
                PathSolver::DijkstraFull => state.shortest_path_reduced(self, sink, false),
                PathSolver::BellmanFord => state.shortest_path_bellman_ford(self, sink),
            };
            if !found {
                return TargetOutcome::Infeasible;
            }
            let mut amount = remaining;
            let mut length = 0.0;
            let mut v = sink;
            while v != self.source {
                let a = state.prev_arc[v];
                amount = amount.min(state.residual[a]);
                length += self.arcs[a].cost;
                v = self.arcs[self.arcs[a].rev].to;
            }
            if let Some(b) = bound {
                if total + remaining as f64 * length > b {
                    return TargetOutcome::Pruned;
                }
            }
            let mut v = sink;
            while v != self.source {
                let a = state.prev_arc[v];
                state.residual[a] -= amount;
                state.residual[self.arcs[a].rev] += amount;
                v = self.arcs[self.arcs[a].rev].to;
            }
            total += amount as f64 * length;
            remaining -= amount;
        }
        TargetOutcome::Solved(TargetFlow {
            target,
            cost: total,
            residual: state.residual,
        })
    }

    /// Reads VM placement and per-edge net flow back out of a solved flow.
    pub fn to_embedding(&self, graph: &SubstrateGraph, flow: &TargetFlow, costs: &CostVector) -> Embedding {
        let used = |a: usize| self.caps[a] - flow.residual[a];
        let vm_count = self
            .source_arcs
            .iter()
            .filter_map(|&(node, a)| (used(a) > 0).then_some((node, used(a))))
            .collect();
        let edge_flow: Vec<EdgeFlow> = self
            .edge_arcs
            .iter()
            .filter_map(|&(edge, fwd, bwd)| {
                let (f, b) = (used(fwd) as i64, used(bwd) as i64);
                let from_fwd = self.arcs[bwd].to;
                let to_fwd = self.arcs[fwd].to;
                match f.cmp(&b) {
                    Ordering::Equal => None,
                    Ordering::Greater => Some(EdgeFlow {
                        edge,
                        from: NodeId(from_fwd as u32),
                        to: NodeId(to_fwd as u32),
                        units: (f - b) as u32,
                    }),
                    Ordering::Less => Some(EdgeFlow {
                        edge,
                        from: NodeId(to_fwd as u32),
                        to: NodeId(from_fwd as u32),
                        units: (b - f) as u32,
                    }),
                }
            })
            .collect();
        Embedding::from_flow(graph, flow.target, vm_count, &edge_flow, self.bandwidth, self.compute, costs)
    }
}

struct SspState {
    residual: Vec<u32>,
    potential: Vec<f64>,
    dist: Vec<f64>,
    settled: Vec<bool>,
    prev_arc: Vec<usize>,
}

impl SspState {
    fn new(net: &FlowNetwork) -> Self {
        let n = net.node_count();
        SspState {
            residual: net.caps.clone(),
            potential: vec![0.0; n],
            dist: vec![f64::INFINITY; n],
            settled: vec![false; n],
            prev_arc: vec![usize::MAX; n],
        }
    }

    /// Dijkstra over reduced costs `c(u,v) + π(u) - π(v)`. With `early_stop`
    /// the search ends when `sink` is settled; settled nodes then add their
    /// own distance to π and every other node adds `dist(sink)`, which keeps
    /// all residual reduced costs nonnegative.
    fn shortest_path_reduced(&mut self, net: &FlowNetwork, sink: usize, early_stop: bool) -> bool {
        self.dist.fill(f64::INFINITY);
        self.settled.fill(false);
        let mut heap = BinaryHeap::new();
        self.dist[net.source] = 0.0;
        heap.push(Reverse((HeapKey(0.0), net.source)));
        while let Some(Reverse((HeapKey(d), u))) = heap.pop() {
            if self.settled[u] || d > self.dist[u] {
                continue;
            }
            self.settled[u] = true;
            if early_stop && u == sink {
                break;
            }
            for &a in &net.adjacency[u] {
                if self.residual[a] == 0 {
                    continue;
                }
                let arc = net.arcs[a];
                if self.settled[arc.to] {
                    continue;
                }
                let reduced = (arc.cost + self.potential[u] - self.potential[arc.to]).max(0.0);
                let nd = d + reduced;
                if nd < self.dist[arc.to] {
                    self.dist[arc.to] = nd;
                    self.prev_arc[arc.to] = a;
                    heap.push(Reverse((HeapKey(nd), arc.to)));
                }
            }
        }
        if !self.settled[sink] {
            return false;
        }
        let cutoff = self.dist[sink];
        for v in 0..self.potential.len() {
            self.potential[v] += if self.settled[v] { self.dist[v] } else { cutoff };
        }
        true
    }

    fn shortest_path_bellman_ford(&mut self, net: &FlowNetwork, sink: usize) -> bool {
        let n = net.node_count();
        self.dist.fill(f64::INFINITY);
        self.dist[net.source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if self.dist[u] == f64::INFINITY {
                    continue;
                }
                for &a in &net.adjacency[u] {
                    if self.residual[a] == 0 {
                        continue;
                    }
                    let arc = net.arcs[a];
                    let nd = self.dist[u] + arc.cost;
                    // Relative slack stops float noise from cycling on zero-cost cycles.
                    if nd < self.dist[arc.to] - 1e-12 * (1.0 + nd.abs()) {
                        self.dist[arc.to] = nd;
                        self.prev_arc[arc.to] = a;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        self.dist[sink].is_finite()
    }
}
