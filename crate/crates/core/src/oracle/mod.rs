//! Minimum-cost virtual cluster embedding.
//!
//! For every candidate logical-switch node the oracle solves a unit-VM
//! min-cost flow (see [`flow`]) and keeps the cheapest result. Ties go to
//! the lower cost, then the lower node id.

pub mod flow;

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Result, VceError};
use crate::substrate::{EdgeId, NodeId, NodeKind, SubstrateGraph};
use crate::workload::VcRequest;

pub use flow::{FlowNetwork, PathSolver, TargetOutcome};

/// Per-resource prices `x(v)` and `x(e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector {
    pub node: Vec<f64>,
    pub edge: Vec<f64>,
}

impl CostVector {
    pub fn zeros(graph: &SubstrateGraph) -> Self {
        Self::uniform(graph, 0.0)
    }

    pub fn uniform(graph: &SubstrateGraph, value: f64) -> Self {
        CostVector {
            node: vec![value; graph.node_count()],
            edge: vec![value; graph.edge_count()],
        }
    }

    pub fn validate(&self, graph: &SubstrateGraph) -> Result<()> {
        if self.node.len() != graph.node_count() || self.edge.len() != graph.edge_count() {
            return Err(VceError::InvalidCosts("length does not match graph".into()));
        }
        if let Some(x) = self.node.iter().chain(&self.edge).find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(VceError::InvalidCosts(format!("entry {x} is negative or not finite")));
        }
        Ok(())
    }
}

/// Which capacities an embedding may use.
#[derive(Debug, Clone, Copy)]
pub enum CapacityView<'a> {
    /// Original capacities, ignoring earlier allocations.
    Initial,
    /// Capacity minus current load, floored at zero.
    Residual {
        node_loads: &'a [u64],
        edge_loads: &'a [u64],
    },
}

impl CapacityView<'_> {
    pub fn node_cap(&self, graph: &SubstrateGraph, id: NodeId) -> u64 {
        let cap = graph.node(id).cap as u64;
        match self {
            CapacityView::Initial => cap,
            CapacityView::Residual { node_loads, .. } => cap.saturating_sub(node_loads[id.index()]),
        }
    }

    pub fn edge_cap(&self, graph: &SubstrateGraph, id: EdgeId) -> u64 {
        let cap = graph.edge(id).cap as u64;
        match self {
            CapacityView::Initial => cap,
            CapacityView::Residual { edge_loads, .. } => cap.saturating_sub(edge_loads[id.index()]),
        }
    }
}

/// Directed VM traffic over one substrate edge, oriented towards the
/// logical switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeFlow {
    pub edge: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    /// Number of VM links crossing the edge.
    pub units: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub ls_node: NodeId,
    /// VMs per hosting server, ascending by node id.
    pub vm_count: Vec<(NodeId, u32)>,
    /// Ascending by edge id; zero-flow edges are omitted.
    pub edge_flow: Vec<EdgeFlow>,
    pub bandwidth: u32,
    pub compute: u32,
    pub cost: f64,
}

impl Embedding {
    pub fn new(
        ls_node: NodeId,
        mut vm_count: Vec<(NodeId, u32)>,
        mut edge_flow: Vec<EdgeFlow>,
        bandwidth: u32,
        compute: u32,
        costs: &CostVector,
    ) -> Self {
        vm_count.sort_unstable_by_key(|&(v, _)| v);
        edge_flow.sort_unstable_by_key(|f| f.edge);
        let mut m = Embedding {
            ls_node,
            vm_count,
            edge_flow,
            bandwidth,
            compute,
            cost: 0.0,
        };
        m.cost = m.cost_under(costs);
        m
    }

    /// Builds an embedding from a raw flow by walking each VM towards the
    /// logical switch and erasing loops, so the stored flow is acyclic.
    pub(crate) fn from_flow(
        graph: &SubstrateGraph,
        ls_node: NodeId,
        vm_count: Vec<(NodeId, u32)>,
        raw: &[EdgeFlow],
        bandwidth: u32,
        compute: u32,
        costs: &CostVector,
    ) -> Self {
        let mut remaining: Vec<u32> = vec![0; graph.edge_count()];
        let mut from: Vec<NodeId> = vec![NodeId(u32::MAX); graph.edge_count()];
        for f in raw {
            remaining[f.edge.index()] = f.units;
            from[f.edge.index()] = f.from;
        }
        let mut used: Vec<u32> = vec![0; graph.edge_count()];
        for &(host, count) in &vm_count {
            for _ in 0..count {
                let mut path: Vec<(NodeId, Option<EdgeId>)> = vec![(host, None)];
                let mut at = host;
                while at != ls_node {
                    let Some(&(e, next)) = graph
                        .incident(at)
                        .iter()
                        .find(|&&(e, _)| remaining[e.index()] > 0 && from[e.index()] == at)
                    else {
                        break;
                    };
                    remaining[e.index()] -= 1;
                    if let Some(pos) = path.iter().position(|&(v, _)| v == next) {
                        path.truncate(pos + 1);
                    } else {
                        path.push((next, Some(e)));
                    }
                    at = next;
                }
                for &(_, e) in &path {
                    if let Some(e) = e {
                        used[e.index()] += 1;
                    }
                }
            }
        }
        let edge_flow = raw
            .iter()
            .filter(|f| used[f.edge.index()] > 0)
            .map(|f| EdgeFlow {
                units: used[f.edge.index()],
                ..*f
            })
            .collect();
        Embedding::new(ls_node, vm_count, edge_flow, bandwidth, compute, costs)
    }

    /// `(edge, bandwidth units)` pairs.
    pub fn edge_loads(&self) -> impl Iterator<Item = (EdgeId, u64)> + '_ {
        self.edge_flow
            .iter()
            .map(|f| (f.edge, f.units as u64 * self.bandwidth as u64))
    }

    /// `(node, compute units)` pairs.
    pub fn node_loads(&self) -> impl Iterator<Item = (NodeId, u64)> + '_ {
        self.vm_count
            .iter()
            .map(|&(v, c)| (v, c as u64 * self.compute as u64))
    }

    pub fn total_edge_load(&self) -> u64 {
        self.edge_loads().map(|(_, l)| l).sum()
    }

    pub fn total_node_load(&self) -> u64 {
        self.node_loads().map(|(_, l)| l).sum()
    }

    /// Sum of all edge and node loads of this embedding.
    pub fn weight(&self) -> u64 {
        self.total_edge_load() + self.total_node_load()
    }

    pub fn vm_total(&self) -> u32 {
        self.vm_count.iter().map(|&(_, c)| c).sum()
    }

    /// `Σ_e load(e)·x(e) + Σ_v load(v)·x(v)`, edges first, in id order.
    pub fn cost_under(&self, costs: &CostVector) -> f64 {
        let edges: f64 = self.edge_loads().map(|(e, l)| l as f64 * costs.edge[e.index()]).sum();
        let nodes: f64 = self.node_loads().map(|(v, l)| l as f64 * costs.node[v.index()]).sum();
        edges + nodes
    }

    /// Checks VM count, placement, capacities and path structure.
    pub fn validate(&self, graph: &SubstrateGraph, request: &VcRequest, view: &CapacityView<'_>) -> Result<(), String> {
        if self.bandwidth != request.bandwidth || self.compute != request.compute {
            return Err("embedding demands differ from request".into());
        }
        if self.vm_total() != request.n_vms {
            return Err(format!("{} VMs placed, {} requested", self.vm_total(), request.n_vms));
        }
        for (v, load) in self.node_loads() {
            if graph.node(v).kind != NodeKind::Server {
                return Err(format!("VM placed on switch {v}"));
            }
            if load > view.node_cap(graph, v) {
                return Err(format!("node {v} load {load} exceeds capacity"));
            }
        }
        for (e, load) in self.edge_loads() {
            if load > view.edge_cap(graph, e) {
                return Err(format!("edge {e} load {load} exceeds capacity"));
            }
        }
        for f in &self.edge_flow {
            let (a, b) = graph.edge(f.edge).endpoints;
            if !((f.from == a && f.to == b) || (f.from == b && f.to == a)) {
                return Err(format!("edge {} orientation does not match endpoints", f.edge));
            }
        }
        match self.decompose_paths(graph) {
            Some(paths) if paths.len() == request.n_vms as usize => Ok(()),
            _ => Err("edge flow does not decompose into VM-to-switch paths".into()),
        }
    }

    /// Splits the flow into one node path per VM, each ending at the logical
    /// switch. VMs hosted on the switch's own server get a single-node path.
    /// Returns `None` if the flow is not such a decomposition.
    pub fn decompose_paths(&self, graph: &SubstrateGraph) -> Option<Vec<Vec<NodeId>>> {
        let mut remaining: Vec<u32> = vec![0; graph.edge_count()];
        for f in &self.edge_flow {
            remaining[f.edge.index()] = f.units;
        }
        let orient: std::collections::HashMap<EdgeId, (NodeId, NodeId)> =
            self.edge_flow.iter().map(|f| (f.edge, (f.from, f.to))).collect();
        let mut paths = Vec::new();
        for &(host, count) in &self.vm_count {
            for _ in 0..count {
                let mut path = vec![host];
                let mut at = host;
                while at != self.ls_node {
                    let next = graph.incident(at).iter().find(|&&(e, _)| {
                        remaining[e.index()] > 0 && orient.get(&e).is_some_and(|&(from, _)| from == at)
                    })?;
                    remaining[next.0.index()] -= 1;
                    at = next.1;
                    path.push(at);
                    if path.len() > graph.node_count() + graph.edge_count() {
                        return None;
                    }
                }
                paths.push(path);
            }
        }
        remaining.iter().all(|&r| r == 0).then_some(paths)
    }

    /// Rows `kind,id,amount`: one `ls` row, then `vm` rows (VM count) and
    /// `edge` rows (bandwidth load).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,id,amount\n");
        let _ = writeln!(out, "ls,{},1", self.ls_node);
        for &(v, c) in &self.vm_count {
            let _ = writeln!(out, "vm,{v},{c}");
        }
        for (e, l) in self.edge_loads() {
            let _ = writeln!(out, "edge,{e},{l}");
        }
        out
    }
}

/// How logical-switch candidates are visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// Sequential in order of a cheap per-target lower bound, skipping
    /// candidates whose capacity-relaxed bound cannot beat the incumbent.
    #[default]
    Pruned,
    /// Every candidate solved independently in parallel, then reduced.
    Exhaustive,
}

/// Stateless VC-ACE style embedding oracle.
#[derive(Debug, Clone, Copy, Default)]
pub struct VcAceOracle {
    pub search: SearchStrategy,
    pub solver: PathSolver,
}

fn better(cost: f64, target: NodeId, best: &Option<Embedding>) -> bool {
    match best {
        None => true,
        Some(b) => cost < b.cost || (cost == b.cost && target < b.ls_node),
    }
}

fn slack(cost: f64) -> f64 {
    cost + 1e-9 * cost.abs().max(1.0)
}

impl VcAceOracle {
    pub fn new(search: SearchStrategy, solver: PathSolver) -> Self {
        VcAceOracle { search, solver }
    }

    /// Cheapest valid embedding over all logical-switch placements, or
    /// `None` when the view admits no valid embedding.
    pub fn find_min_cost_embedding(
        &self,
        graph: &SubstrateGraph,
        request: &VcRequest,
        costs: &CostVector,
        view: &CapacityView<'_>,
    ) -> Result<Option<Embedding>> {
        request.validate()?;
        costs.validate(graph)?;
        let net = FlowNetwork::build(graph, request, costs, view);
        if net.source_supply() < request.n_vms as u64 {
            return Ok(None);
        }
        Ok(match self.search {
            SearchStrategy::Pruned => self.search_pruned(graph, &net, request, costs),
            SearchStrategy::Exhaustive => self.search_exhaustive(graph, &net, costs),
        })
    }

    fn search_pruned(&self, graph: &SubstrateGraph, net: &FlowNetwork, request: &VcRequest, costs: &CostVector) -> Option<Embedding> {
        let dist = net.source_distances();
        let mut order: Vec<(f64, NodeId)> = net
            .last_hop_bounds(&dist)
            .iter()
            .zip(&dist)
            .enumerate()
            .filter(|(_, (l, _))| l.is_finite())
            .map(|(t, (&l, &d))| (l.max(d * request.n_vms as f64), NodeId(t as u32)))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut best: Option<Embedding> = None;
        for (lower, target) in order {
            let bound = best.as_ref().map(|b| slack(b.cost));
            if bound.is_some_and(|b| lower > b) {
                break;
            }
            let relaxed = net.capacity_lower_bound(target);
            if relaxed.is_infinite() || bound.is_some_and(|b| relaxed > b) {
                continue;
            }
            if let TargetOutcome::Solved(flow) = net.solve_for_target(target, self.solver, bound) {
                let m = net.to_embedding(graph, &flow, costs);
                if better(m.cost, target, &best) {
                    best = Some(m);
                }
            }
        }
        best
    }

    fn search_exhaustive(&self, graph: &SubstrateGraph, net: &FlowNetwork, costs: &CostVector) -> Option<Embedding> {
        let solved: Vec<Option<Embedding>> = (0..graph.node_count() as u32)
            .into_par_iter()
            .map(|t| match net.solve_for_target(NodeId(t), self.solver, None) {
                TargetOutcome::Solved(flow) => Some(net.to_embedding(graph, &flow, costs)),
                _ => None,
            })
            .collect();
        let mut best = None;
        for m in solved.into_iter().flatten() {
            if better(m.cost, m.ls_node, &best) {
                best = Some(m);
            }
        }
        best
    }
}

/// [`VcAceOracle::find_min_cost_embedding`] with the default configuration.
pub fn find_min_cost_embedding(
    graph: &SubstrateGraph,
    request: &VcRequest,
    costs: &CostVector,
    view: &CapacityView<'_>,
) -> Result<Option<Embedding>> {
    VcAceOracle::default().find_min_cost_embedding(graph, request, costs, view)
}

/// Min-cost flow for a single logical-switch placement, returned as an
/// embedding together with the flow cost.
pub fn solve_flow_for_target(
    graph: &SubstrateGraph,
    request: &VcRequest,
    costs: &CostVector,
    view: &CapacityView<'_>,
    target: NodeId,
    solver: PathSolver,
) -> Result<Option<(Embedding, f64)>> {
    request.validate()?;
    costs.validate(graph)?;
    let net = FlowNetwork::build(graph, request, costs, view);
    Ok(match net.solve_for_target(target, solver, None) {
        TargetOutcome::Solved(flow) => Some((net.to_embedding(graph, &flow, costs), flow.cost)),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::{build_fat_tree, NodeKind};

    fn star() -> SubstrateGraph {
        SubstrateGraph::from_parts(&[(NodeKind::Server, 20), (NodeKind::Switch, 0)], &[(0, 1, 20)]).unwrap()
    }

    #[test]
    fn single_server_collocates_everything() {
        let g = star();
        let req = VcRequest::new(1, 3, 4, 5, 100);
        let costs = CostVector {
            node: vec![0.3, 0.0],
            edge: vec![1.0],
        };
        let m = find_min_cost_embedding(&g, &req, &costs, &CapacityView::Initial).unwrap().unwrap();
        assert_eq!(m.ls_node, NodeId(0));
        assert_eq!(m.vm_count, vec![(NodeId(0), 3)]);
        assert!(m.edge_flow.is_empty());
        assert!((m.cost - 15.0 * 0.3).abs() < 1e-12);
        assert_eq!(m.to_csv(), "kind,id,amount\nls,0,1\nvm,0,3\n");
    }

    #[test]
    fn large_compute_spreads_vms() {
        let g = build_fat_tree(4, 20, 20).unwrap();
        let req = VcRequest::new(1, 5, 4, 12, 100);
        let m = find_min_cost_embedding(&g, &req, &CostVector::uniform(&g, 1.0), &CapacityView::Initial)
            .unwrap()
            .unwrap();
        assert!(m.vm_count.iter().all(|&(_, c)| c == 1));
        m.validate(&g, &req, &CapacityView::Initial).unwrap();
    }

    #[test]
    fn compute_exhaustion_is_infeasible() {
        let g = star();
        let req = VcRequest::new(1, 5, 4, 5, 100);
        assert!(find_min_cost_embedding(&g, &req, &CostVector::zeros(&g), &CapacityView::Initial)
            .unwrap()
            .is_none());
        let loads = [10, 0];
        let view = CapacityView::Residual {
            node_loads: &loads,
            edge_loads: &[0],
        };
        let req = VcRequest::new(1, 3, 4, 5, 100);
        assert!(find_min_cost_embedding(&g, &req, &CostVector::zeros(&g), &view).unwrap().is_none());
    }

    #[test]
    fn malformed_inputs_rejected() {
        let g = star();
        let req = VcRequest::new(1, 0, 4, 5, 100);
        assert!(find_min_cost_embedding(&g, &req, &CostVector::zeros(&g), &CapacityView::Initial).is_err());
        let req = VcRequest::new(1, 1, 4, 5, 100);
        let bad = CostVector {
            node: vec![f64::NAN, 0.0],
            edge: vec![0.0],
        };
        assert!(find_min_cost_embedding(&g, &req, &bad, &CapacityView::Initial).is_err());
        let neg = CostVector {
            node: vec![0.0],
            edge: vec![0.0],
        };
        assert!(find_min_cost_embedding(&g, &req, &neg, &CapacityView::Initial).is_err());
    }

    #[test]
    fn zero_costs_pick_lowest_target() {
        let g = build_fat_tree(4, 20, 20).unwrap();
        let req = VcRequest::new(1, 3, 4, 4, 1);
        let m = find_min_cost_embedding(&g, &req, &CostVector::zeros(&g), &CapacityView::Initial)
            .unwrap()
            .unwrap();
        assert_eq!(m.ls_node, NodeId(0));
        assert_eq!(m.cost, 0.0);
    }

    #[test]
    fn pruned_and_exhaustive_agree_on_fat_tree() {
        use rand::{Rng, SeedableRng};
        let g = build_fat_tree(4, 20, 20).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let exhaustive = VcAceOracle::new(SearchStrategy::Exhaustive, PathSolver::DijkstraEarlyStop);
        for i in 0..40 {
            let costs = CostVector {
                node: (0..g.node_count()).map(|_| rng.gen_range(0.0..1.0)).collect(),
                edge: (0..g.edge_count()).map(|_| rng.gen_range(0.0..1.0)).collect(),
            };
            let req = VcRequest::new(i, rng.gen_range(3..=14), rng.gen_range(4..=12), rng.gen_range(4..=20), 1);
            let a = find_min_cost_embedding(&g, &req, &costs, &CapacityView::Initial).unwrap();
            let b = exhaustive.find_min_cost_embedding(&g, &req, &costs, &CapacityView::Initial).unwrap();
            assert_eq!(a, b);
            if let Some(m) = a {
                m.validate(&g, &req, &CapacityView::Initial).unwrap();
            }
        }
    }
}
