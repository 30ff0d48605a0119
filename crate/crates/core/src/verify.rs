//! Random tiny instances and the invariant suite run against them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{AlgorithmKind, OnlineRun};
use crate::error::Result;
use crate::offline::{enumerate_min_cost_embedding, optimal_offline_profit, TinyInstance};
use crate::oracle::{CapacityView, CostVector, Embedding, PathSolver, SearchStrategy, VcAceOracle};
use crate::substrate::{NodeKind, SubstrateGraph};
use crate::workload::VcRequest;

/// Shape of generated tiny instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyShape {
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Edges added on top of a random spanning tree, at most.
    pub extra_edges: usize,
    pub requests: usize,
    pub max_vms: u32,
    pub max_cap: u32,
}

impl Default for TinyShape {
    fn default() -> Self {
        TinyShape {
            min_nodes: 3,
            max_nodes: 8,
            extra_edges: 3,
            requests: 6,
            max_vms: 3,
            max_cap: 12,
        }
    }
}

/// Connected random graph with at least two servers, plus a request list.
pub fn random_tiny_instance(rng: &mut impl Rng, shape: &TinyShape) -> TinyInstance {
    let n = rng.gen_range(shape.min_nodes.max(2)..=shape.max_nodes.max(2));
    let servers = rng.gen_range(2..=n);
    let mut kinds: Vec<bool> = (0..n).map(|i| i < servers).collect();
    kinds.shuffle(rng);
    let nodes: Vec<(NodeKind, u32)> = kinds
        .iter()
        .map(|&s| {
            if s {
                (NodeKind::Server, rng.gen_range(2..=shape.max_cap))
            } else {
                (NodeKind::Switch, 0)
            }
        })
        .collect();

    let mut edges: Vec<(u32, u32, u32)> = Vec::new();
    let has = |edges: &[(u32, u32, u32)], a: u32, b: u32| {
        edges.iter().any(|&(u, v, _)| (u, v) == (a, b) || (u, v) == (b, a))
    };
    for v in 1..n as u32 {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(2..=shape.max_cap)));
    }
    for _ in 0..rng.gen_range(0..=shape.extra_edges) {
        let a = rng.gen_range(0..n as u32);
        let b = rng.gen_range(0..n as u32);
        if a != b && !has(&edges, a, b) {
            edges.push((a, b, rng.gen_range(2..=shape.max_cap)));
        }
    }
    let graph = SubstrateGraph::from_parts(&nodes, &edges).expect("generated graph is valid");

    let requests = (1..=shape.requests as u32)
        .map(|i| {
            VcRequest::new(
                i,
                rng.gen_range(1..=shape.max_vms),
                rng.gen_range(1..=4),
                rng.gen_range(1..=4),
                rng.gen_range(1..=50),
            )
        })
        .collect();
    TinyInstance { graph, requests }
}

/// Independent positive prices, so that ties between embeddings have
/// probability zero.
pub fn random_costs(rng: &mut impl Rng, graph: &SubstrateGraph) -> CostVector {
    CostVector {
        node: graph
            .nodes()
            .iter()
            .map(|n| if n.kind == NodeKind::Server { rng.gen_range(0.01..1.0) } else { 0.0 })
            .collect(),
        edge: (0..graph.edge_count()).map(|_| rng.gen_range(0.01..1.0)).collect(),
    }
}

fn loads(graph: &SubstrateGraph, m: &Embedding) -> (Vec<u64>, Vec<u64>) {
    let mut nodes = vec![0; graph.node_count()];
    let mut edges = vec![0; graph.edge_count()];
    for (v, l) in m.node_loads() {
        nodes[v.index()] += l;
    }
    for (e, l) in m.edge_loads() {
        edges[e.index()] += l;
    }
    (nodes, edges)
}

fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Oracle against brute force on one request. Returns a description of the
/// mismatch, if any.
pub fn check_oracle_exact(
    graph: &SubstrateGraph,
    request: &VcRequest,
    costs: &CostVector,
    view: &CapacityView<'_>,
) -> Result<Option<String>> {
    let fast = VcAceOracle::default().find_min_cost_embedding(graph, request, costs, view)?;
    let slow = enumerate_min_cost_embedding(graph, request, costs, view)?;
    Ok(match (fast, slow) {
        (None, None) => None,
        (Some(f), Some(s)) => {
            if !rel_eq(f.cost, s.cost, 1e-9) {
                Some(format!("cost {} vs brute force {}", f.cost, s.cost))
            } else if loads(graph, &f) != loads(graph, &s) {
                Some("equal cost but different loads".into())
            } else if let Err(e) = f.validate(graph, request, view) {
                Some(format!("oracle embedding invalid: {e}"))
            } else {
                None
            }
        }
        (f, s) => Some(format!(
            "feasibility differs: oracle {}, brute force {}",
            f.is_some(),
            s.is_some()
        )),
    })
}

/// Dijkstra-with-potentials against Bellman-Ford on one request.
pub fn check_solver_equivalence(
    graph: &SubstrateGraph,
    request: &VcRequest,
    costs: &CostVector,
    view: &CapacityView<'_>,
) -> Result<Option<String>> {
    let run = |solver| VcAceOracle::new(SearchStrategy::Exhaustive, solver).find_min_cost_embedding(graph, request, costs, view);
    let dj = run(PathSolver::DijkstraEarlyStop)?;
    let bf = run(PathSolver::BellmanFord)?;
    Ok(match (dj, bf) {
        (None, None) => None,
        (Some(a), Some(b)) if rel_eq(a.cost, b.cost, 1e-9) => None,
        (a, b) => Some(format!(
            "dijkstra {:?} vs bellman-ford {:?}",
            a.map(|m| m.cost),
            b.map(|m| m.cost)
        )),
    })
}

/// Offline optimum against the online runs of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub optimum: u64,
    pub greedy_profit: u64,
    pub covceload_profit: u64,
    pub covce_profit: u64,
    pub covce_primal: f64,
    pub covce_ratio_bound: f64,
}

impl SandwichReport {
    /// Capacity-respecting online profits are at most the optimum, which is
    /// at most COVCE's final primal value; the optimum over COVCE's profit
    /// stays within the competitive ratio.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.greedy_profit > self.optimum {
            out.push(format!("greedy {} > optimum {}", self.greedy_profit, self.optimum));
        }
        if self.covceload_profit > self.optimum {
            out.push(format!("covceload {} > optimum {}", self.covceload_profit, self.optimum));
        }
        if self.optimum as f64 > self.covce_primal * (1.0 + 1e-9) {
            out.push(format!("optimum {} > covce primal {}", self.optimum, self.covce_primal));
        }
        if self.covce_profit > 0 && self.optimum as f64 / self.covce_profit as f64 > self.covce_ratio_bound {
            out.push(format!(
                "optimum/covce = {} > {}",
                self.optimum as f64 / self.covce_profit as f64,
                self.covce_ratio_bound
            ));
        }
        out
    }
}

pub fn sandwich(instance: &TinyInstance) -> Result<SandwichReport> {
    let g = &instance.graph;
    let profit = |kind| -> Result<(u64, f64, f64)> {
        let mut run = OnlineRun::new(kind, g);
        for r in &instance.requests {
            run.process(r)?;
        }
        let s = run.state();
        Ok((s.cum_profit, s.primal_cost, s.constants.covce_ratio(s.alpha)))
    };
    let (greedy_profit, _, _) = profit(AlgorithmKind::Greedy)?;
    let (covceload_profit, _, _) = profit(AlgorithmKind::CovceLoad)?;
    let (covce_profit, covce_primal, covce_ratio_bound) = profit(AlgorithmKind::Covce)?;
    Ok(SandwichReport {
        optimum: optimal_offline_profit(g, &instance.requests)?,
        greedy_profit,
        covceload_profit,
        covce_profit,
        covce_primal,
        covce_ratio_bound,
    })
}

/// Outcome of [`run_invariant_suite`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub instances: usize,
    pub oracle_checks: usize,
    pub failures: Vec<String>,
}

/// Runs oracle exactness, solver equivalence and the offline sandwich on
/// `instances` random tiny instances.
pub fn run_invariant_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = TinyShape::default();
    let mut report = SuiteReport {
        instances,
        ..SuiteReport::default()
    };
    for i in 0..instances {
        let inst = random_tiny_instance(&mut rng, &shape);
        let costs = random_costs(&mut rng, &inst.graph);
        for r in &inst.requests {
            report.oracle_checks += 1;
            let view = CapacityView::Initial;
            if let Some(m) = check_oracle_exact(&inst.graph, r, &costs, &view)? {
                report.failures.push(format!("instance {i} request {}: oracle: {m}", r.index));
            }
            if let Some(m) = check_solver_equivalence(&inst.graph, r, &costs, &view)? {
                report.failures.push(format!("instance {i} request {}: solvers: {m}", r.index));
            }
        }
        for v in sandwich(&inst)?.violations() {
            report.failures.push(format!("instance {i}: {v}"));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_are_valid_and_deterministic() {
        let shape = TinyShape::default();
        let a = random_tiny_instance(&mut ChaCha8Rng::seed_from_u64(4), &shape);
        let b = random_tiny_instance(&mut ChaCha8Rng::seed_from_u64(4), &shape);
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.requests, b.requests);
        assert!(a.graph.node_count() <= 8 && a.graph.server_count() >= 2);
        assert!(a.requests.iter().all(|r| r.n_vms <= 3));
    }

    #[test]
    fn small_suite_passes() {
        let report = run_invariant_suite(5, 11).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        assert_eq!(report.oracle_checks, 30);
    }
}
