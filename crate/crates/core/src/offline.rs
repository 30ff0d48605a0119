//! Exponential-time ground truth for tiny instances.
//!
//! [`enumerate_min_cost_embedding`] tries every logical-switch node, every
//! VM placement and every simple path per VM. [`optimal_offline_profit`]
//! searches request subsets over those embeddings with joint capacities.

use std::collections::HashSet;

use crate::error::{Result, VceError};
use crate::oracle::{CapacityView, CostVector, EdgeFlow, Embedding};
use crate::substrate::{EdgeId, NodeId, SubstrateGraph};
use crate::workload::VcRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationLimits {
    pub max_nodes: usize,
    pub max_requests: usize,
    /// Upper bound on visited (VM, path) assignments per request.
    pub max_steps: u64,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            max_nodes: 10,
            max_requests: 8,
            max_steps: 20_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub graph: SubstrateGraph,
    pub requests: Vec<VcRequest>,
}

impl TinyInstance {
    pub fn check(&self, limits: &EnumerationLimits) -> Result<()> {
        check_graph(&self.graph, limits)?;
        if self.requests.len() > limits.max_requests {
            return Err(VceError::LimitExceeded(format!(
                "{} requests, limit {}",
                self.requests.len(),
                limits.max_requests
            )));
        }
        Ok(())
    }
}

fn check_graph(graph: &SubstrateGraph, limits: &EnumerationLimits) -> Result<()> {
    if graph.node_count() > limits.max_nodes {
        return Err(VceError::LimitExceeded(format!(
            "{} nodes, limit {}",
            graph.node_count(),
            limits.max_nodes
        )));
    }
    Ok(())
}

/// All simple paths from `from` to `to` as `(edge, head node)` steps.
fn simple_paths(graph: &SubstrateGraph, from: NodeId, to: NodeId) -> Vec<Vec<(EdgeId, NodeId)>> {
    fn walk(
        graph: &SubstrateGraph,
        at: NodeId,
        to: NodeId,
        on_path: &mut Vec<bool>,
        path: &mut Vec<(EdgeId, NodeId)>,
        out: &mut Vec<Vec<(EdgeId, NodeId)>>,
    ) {
        if at == to {
            out.push(path.clone());
            return;
        }
        for &(e, next) in graph.incident(at) {
            if !on_path[next.index()] {
                on_path[next.index()] = true;
                path.push((e, next));
                walk(graph, next, to, on_path, path, out);
                path.pop();
                on_path[next.index()] = false;
            }
        }
    }
    let mut on_path = vec![false; graph.node_count()];
    on_path[from.index()] = true;
    let mut out = Vec::new();
    walk(graph, from, to, &mut on_path, &mut Vec::new(), &mut out);
    out
}

/// One valid embedding as visited by the enumerator.
struct Candidate<'a> {
    ls: NodeId,
    node_loads: &'a [u64],
    edge_loads: &'a [u64],
    choices: &'a [(NodeId, usize)],
    paths: &'a [Vec<Vec<(EdgeId, NodeId)>>],
}

/// Visits every valid embedding of `request` under `view`.
fn for_each_embedding(
    graph: &SubstrateGraph,
    request: &VcRequest,
    view: &CapacityView<'_>,
    limits: &EnumerationLimits,
    mut visit: impl FnMut(&Candidate<'_>),
) -> Result<()> {
    check_graph(graph, limits)?;
    request.validate()?;
    let servers: Vec<NodeId> = graph
        .servers()
        .filter(|s| view.node_cap(graph, s.id) >= request.compute as u64)
        .map(|s| s.id)
        .collect();
    let bw = request.bandwidth as u64;
    let cu = request.compute as u64;
    let mut steps = 0u64;

    for ls in 0..graph.node_count() as u32 {
        let ls = NodeId(ls);
        // paths[i] lists the simple paths from servers[i] to ls.
        let paths: Vec<Vec<Vec<(EdgeId, NodeId)>>> =
            servers.iter().map(|&s| simple_paths(graph, s, ls)).collect();
        let options: Vec<(usize, usize)> = paths
            .iter()
            .enumerate()
            .flat_map(|(i, ps)| (0..ps.len()).map(move |p| (i, p)))
            .collect();

        let mut node_loads = vec![0u64; graph.node_count()];
        let mut edge_loads = vec![0u64; graph.edge_count()];
        let mut chosen: Vec<(NodeId, usize)> = Vec::with_capacity(request.n_vms as usize);
        let mut chosen_opts: Vec<usize> = Vec::new();

        // Iterative DFS over non-decreasing option indexes (VMs are interchangeable).
        let mut next_opt = 0usize;
        loop {
            if chosen.len() == request.n_vms as usize {
                visit(&Candidate {
                    ls,
                    node_loads: &node_loads,
                    edge_loads: &edge_loads,
                    choices: &chosen,
                    paths: &paths,
                });
            }
            let mut advanced = false;
            if chosen.len() < request.n_vms as usize {
                while next_opt < options.len() {
                    let o = next_opt;
                    next_opt += 1;
                    steps += 1;
                    if steps > limits.max_steps {
                        return Err(VceError::LimitExceeded(format!(
                            "more than {} enumeration steps",
                            limits.max_steps
                        )));
                    }
                    let (si, pi) = options[o];
                    let host = servers[si];
                    if node_loads[host.index()] + cu > view.node_cap(graph, host) {
                        continue;
                    }
                    let path = &paths[si][pi];
                    if path.iter().any(|&(e, _)| edge_loads[e.index()] + bw > view.edge_cap(graph, e)) {
                        continue;
                    }
                    node_loads[host.index()] += cu;
                    for &(e, _) in path {
                        edge_loads[e.index()] += bw;
                    }
                    chosen.push((host, pi));
                    chosen_opts.push(o);
                    next_opt = o;
                    advanced = true;
                    break;
                }
            }
            if advanced {
                continue;
            }
            // Backtrack.
            let Some(o) = chosen_opts.pop() else { break };
            let (host, pi) = chosen.pop().expect("parallel stacks");
            let si = options[o].0;
            node_loads[host.index()] -= cu;
            for &(e, _) in &paths[si][pi] {
                edge_loads[e.index()] -= bw;
            }
            next_opt = o + 1;
        }
    }
    Ok(())
}

/// Exact minimum-cost embedding by exhaustive search.
pub fn enumerate_min_cost_embedding(
    graph: &SubstrateGraph,
    request: &VcRequest,
    costs: &CostVector,
    view: &CapacityView<'_>,
) -> Result<Option<Embedding>> {
    enumerate_min_cost_embedding_with(graph, request, costs, view, &EnumerationLimits::default())
}

pub fn enumerate_min_cost_embedding_with(
    graph: &SubstrateGraph,
    request: &VcRequest,
    costs: &CostVector,
    view: &CapacityView<'_>,
    limits: &EnumerationLimits,
) -> Result<Option<Embedding>> {
    costs.validate(graph)?;
    let server_index: Vec<usize> = {
        let mut idx = vec![usize::MAX; graph.node_count()];
        for (i, s) in graph
            .servers()
            .filter(|s| view.node_cap(graph, s.id) >= request.compute as u64)
            .enumerate()
        {
            idx[s.id.index()] = i;
        }
        idx
    };
    let mut best: Option<(f64, Embedding)> = None;
    for_each_embedding(graph, request, view, limits, |c| {
        let cost: f64 = c
            .edge_loads
            .iter()
            .enumerate()
            .map(|(e, &l)| l as f64 * costs.edge[e])
            .sum::<f64>()
            + c.node_loads
                .iter()
                .enumerate()
                .map(|(v, &l)| l as f64 * costs.node[v])
                .sum::<f64>();
        if best.as_ref().is_some_and(|(b, _)| *b <= cost) {
            return;
        }
        let mut vm_count: Vec<(NodeId, u32)> = Vec::new();
        let mut flows: Vec<EdgeFlow> = Vec::new();
        for &(host, pi) in c.choices {
            match vm_count.iter_mut().find(|(v, _)| *v == host) {
                Some((_, n)) => *n += 1,
                None => vm_count.push((host, 1)),
            }
            let mut at = host;
            for &(e, next) in &c.paths[server_index[host.index()]][pi] {
                match flows.iter_mut().find(|f| f.edge == e) {
                    Some(f) => f.units += 1,
                    None => flows.push(EdgeFlow {
                        edge: e,
                        from: at,
                        to: next,
                        units: 1,
                    }),
                }
                at = next;
            }
        }
        let m = Embedding::new(c.ls, vm_count, flows, request.bandwidth, request.compute, costs);
        best = Some((cost, m));
    })?;
    Ok(best.map(|(_, m)| m))
}

/// Distinct load vectors `[node loads.., edge loads..]` of every valid
/// embedding under initial capacities, with dominated vectors removed.
pub fn embedding_load_vectors(
    graph: &SubstrateGraph,
    request: &VcRequest,
    limits: &EnumerationLimits,
) -> Result<Vec<Vec<u64>>> {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for_each_embedding(graph, request, &CapacityView::Initial, limits, |c| {
        let mut v = c.node_loads.to_vec();
        v.extend_from_slice(c.edge_loads);
        seen.insert(v);
    })?;
    let mut all: Vec<Vec<u64>> = seen.into_iter().collect();
    all.sort();
    let dominated = |a: &Vec<u64>, b: &Vec<u64>| a != b && b.iter().zip(a).all(|(x, y)| x <= y);
    let kept = all
        .iter()
        .filter(|a| !all.iter().any(|b| dominated(a, b)))
        .cloned()
        .collect();
    Ok(kept)
}

/// Largest total benefit of any request subset that can be embedded
/// simultaneously within the original capacities.
pub fn optimal_offline_profit(graph: &SubstrateGraph, requests: &[VcRequest]) -> Result<u64> {
    optimal_offline_profit_with(graph, requests, &EnumerationLimits::default())
}

pub fn optimal_offline_profit_with(
    graph: &SubstrateGraph,
    requests: &[VcRequest],
    limits: &EnumerationLimits,
) -> Result<u64> {
    TinyInstance {
        graph: graph.clone(),
        requests: requests.to_vec(),
    }
    .check(limits)?;
    // High benefits first so the pruning bound tightens early.
    let mut requests = requests.to_vec();
    requests.sort_by_key(|r| std::cmp::Reverse(r.benefit));
    let requests = &requests[..];
    let options: Vec<Vec<Vec<u64>>> = requests
        .iter()
        .map(|r| embedding_load_vectors(graph, r, limits))
        .collect::<Result<_>>()?;
    let caps: Vec<u64> = graph
        .nodes()
        .iter()
        .map(|n| n.cap as u64)
        .chain(graph.edges().iter().map(|e| e.cap as u64))
        .collect();
    let mut suffix = vec![0u64; requests.len() + 1];
    for i in (0..requests.len()).rev() {
        suffix[i] = suffix[i + 1] + if options[i].is_empty() { 0 } else { requests[i].benefit };
    }

    struct Search<'a> {
        requests: &'a [VcRequest],
        options: &'a [Vec<Vec<u64>>],
        suffix: &'a [u64],
        caps: &'a [u64],
        best: u64,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, used: &mut Vec<u64>, profit: u64) {
            if profit > self.best {
                self.best = profit;
            }
            if i == self.requests.len() || profit + self.suffix[i] <= self.best {
                return;
            }
            for opt in &self.options[i] {
                if used.iter().zip(opt).zip(self.caps).all(|((u, o), c)| u + o <= *c) {
                    used.iter_mut().zip(opt).for_each(|(u, o)| *u += o);
                    self.go(i + 1, used, profit + self.requests[i].benefit);
                    used.iter_mut().zip(opt).for_each(|(u, o)| *u -= o);
                }
            }
            self.go(i + 1, used, profit);
        }
    }
    let mut search = Search {
        requests,
        options: &options,
        suffix: &suffix,
        caps: &caps,
        best: 0,
    };
    search.go(0, &mut vec![0; caps.len()], 0);
    Ok(search.best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::NodeKind;

    fn star() -> SubstrateGraph {
        SubstrateGraph::from_parts(&[(NodeKind::Server, 20), (NodeKind::Switch, 0)], &[(0, 1, 20)]).unwrap()
    }

    #[test]
    fn star_matches_trivial_answer() {
        let g = star();
        let req = VcRequest::new(1, 3, 4, 5, 10);
        let costs = CostVector {
            node: vec![0.3, 0.0],
            edge: vec![1.0],
        };
        let m = enumerate_min_cost_embedding(&g, &req, &costs, &CapacityView::Initial).unwrap().unwrap();
        assert_eq!(m.ls_node, NodeId(0));
        assert_eq!(m.vm_count, vec![(NodeId(0), 3)]);
        assert!((m.cost - 4.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_when_caps_too_small() {
        let g = star();
        let req = VcRequest::new(1, 5, 4, 5, 10);
        assert!(enumerate_min_cost_embedding(&g, &req, &CostVector::zeros(&g), &CapacityView::Initial)
            .unwrap()
            .is_none());
    }

    #[test]
    fn limits_enforced() {
        let g = crate::substrate::build_fat_tree(4, 20, 20).unwrap();
        let req = VcRequest::new(1, 3, 4, 5, 10);
        assert!(matches!(
            enumerate_min_cost_embedding(&g, &req, &CostVector::zeros(&g), &CapacityView::Initial),
            Err(VceError::LimitExceeded(_))
        ));
        let tiny = star();
        let many = vec![VcRequest::new(1, 1, 1, 1, 1); 9];
        assert!(matches!(optimal_offline_profit(&tiny, &many), Err(VceError::LimitExceeded(_))));
    }

    #[test]
    fn simple_path_counts() {
        // 4-cycle: two simple paths between opposite corners.
        let s = (NodeKind::Server, 1);
        let g = SubstrateGraph::from_parts(&[s, s, s, s], &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1)]).unwrap();
        assert_eq!(simple_paths(&g, NodeId(0), NodeId(2)).len(), 2);
        assert_eq!(simple_paths(&g, NodeId(0), NodeId(0)), vec![Vec::new()]);
    }

    #[test]
    fn empty_sequence_profit_zero() {
        assert_eq!(optimal_offline_profit(&star(), &[]).unwrap(), 0);
    }

    #[test]
    fn high_benefit_request_beats_many_small_ones() {
        // One server of 20 CU: the big request fills it, the small ones would each take 8.
        let g = star();
        let small = |i| VcRequest::new(i, 2, 4, 4, 3);
        let reqs = vec![small(1), small(2), VcRequest::new(3, 4, 4, 5, 57), small(4)];
        assert_eq!(optimal_offline_profit(&g, &reqs).unwrap(), 57);
        let only_small = vec![small(1), small(2), small(4)];
        assert_eq!(optimal_offline_profit(&g, &only_small).unwrap(), 6);
    }

    #[test]
    fn dominated_load_vectors_dropped() {
        let s = (NodeKind::Server, 20);
        let g = SubstrateGraph::from_parts(&[s, (NodeKind::Switch, 0), s], &[(0, 1, 20), (1, 2, 20)]).unwrap();
        let vecs = embedding_load_vectors(&g, &VcRequest::new(1, 1, 4, 5, 1), &EnumerationLimits::default()).unwrap();
        // A single VM on either server with LS on its own host; all other placements only add edge load.
        assert_eq!(vecs.len(), 2);
    }
}
