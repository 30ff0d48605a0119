//! Capacitated datacenter substrates.
//!
//! Node and edge ids are dense indices assigned in construction order, so a
//! fixed set of parameters always yields the same graph. Servers carry
//! compute capacity; switches have capacity 0 and only forward traffic.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use crate::error::{Result, VceError};

pub const DEFAULT_SERVER_CAP: u32 = 20;
pub const DEFAULT_EDGE_CAP: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Server,
    Switch,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Server => "server",
            NodeKind::Switch => "switch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstrateNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub cap: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstrateEdge {
    pub id: EdgeId,
    pub endpoints: (NodeId, NodeId),
    pub cap: u32,
}

impl SubstrateEdge {
    /// The endpoint opposite `node`. `node` must be incident.
    #[inline]
    pub fn other(&self, node: NodeId) -> NodeId {
        if self.endpoints.0 == node {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

/// An immutable, connected, capacitated substrate network.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateGraph {
    nodes: Vec<SubstrateNode>,
    edges: Vec<SubstrateEdge>,
    adjacency: Vec<Vec<(EdgeId, NodeId)>>,
    max_edge_cap: u32,
    max_server_cap: u32,
}

impl SubstrateGraph {
    /// Validates and assembles a graph from node kinds/capacities and edge
    /// endpoint/capacity triples. Ids follow slice order.
    pub fn from_parts(nodes: &[(NodeKind, u32)], edges: &[(u32, u32, u32)]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(VceError::InvalidTopology("graph has no nodes".into()));
        }
        let nodes: Vec<SubstrateNode> = nodes
            .iter()
            .enumerate()
            .map(|(i, &(kind, cap))| SubstrateNode {
                id: NodeId(i as u32),
                kind,
                cap,
            })
            .collect();
        for node in &nodes {
            match node.kind {
                NodeKind::Server if node.cap == 0 => {
                    return Err(VceError::InvalidTopology(format!(
                        "server {} has zero capacity",
                        node.id
                    )))
                }
                NodeKind::Switch if node.cap != 0 => {
                    return Err(VceError::InvalidTopology(format!(
                        "switch {} has nonzero capacity",
                        node.id
                    )))
                }
                _ => {}
            }
        }

        let mut seen = HashSet::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut built = Vec::with_capacity(edges.len());
        for (i, &(u, v, cap)) in edges.iter().enumerate() {
            let id = EdgeId(i as u32);
            if u as usize >= nodes.len() || v as usize >= nodes.len() {
                return Err(VceError::InvalidTopology(format!(
                    "edge {id} references unknown node"
                )));
            }
            if u == v {
                return Err(VceError::InvalidTopology(format!("edge {id} is a self-loop")));
            }
            if cap == 0 {
                return Err(VceError::InvalidTopology(format!("edge {id} has zero capacity")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(VceError::InvalidTopology(format!(
                    "edge {id} duplicates pair ({u}, {v})"
                )));
            }
            adjacency[u as usize].push((id, NodeId(v)));
            adjacency[v as usize].push((id, NodeId(u)));
            built.push(SubstrateEdge {
                id,
                endpoints: (NodeId(u), NodeId(v)),
                cap,
            });
        }

        let graph = SubstrateGraph {
            max_edge_cap: built.iter().map(|e| e.cap).max().unwrap_or(0),
            max_server_cap: nodes.iter().map(|n| n.cap).max().unwrap_or(0),
            nodes,
            edges: built,
            adjacency,
        };
        if !graph.is_connected() {
            return Err(VceError::InvalidTopology("graph is not connected".into()));
        }
        if graph.servers().next().is_none() {
            return Err(VceError::InvalidTopology("graph has no servers".into()));
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[SubstrateNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[SubstrateEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &SubstrateNode {
        &self.nodes[id.index()]
    }

    pub fn edge(&self, id: EdgeId) -> &SubstrateEdge {
        &self.edges[id.index()]
    }

    /// Incident `(edge, neighbour)` pairs in edge-id order.
    pub fn incident(&self, id: NodeId) -> &[(EdgeId, NodeId)] {
        &self.adjacency[id.index()]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn servers(&self) -> impl Iterator<Item = &SubstrateNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Server)
    }

    pub fn server_count(&self) -> usize {
        self.servers().count()
    }

    /// `C_E`: largest edge capacity.
    pub fn max_edge_cap(&self) -> u32 {
        self.max_edge_cap
    }

    /// `C_V`: largest server capacity.
    pub fn max_server_cap(&self) -> u32 {
        self.max_server_cap
    }

    /// `|V| + |E|`.
    pub fn size(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    pub fn total_server_cap(&self) -> u64 {
        self.nodes.iter().map(|n| n.cap as u64).sum()
    }

    pub fn total_edge_cap(&self) -> u64 {
        self.edges.iter().map(|e| e.cap as u64).sum()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(_, v) in &self.adjacency[u] {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    count += 1;
                    queue.push_back(v.index());
                }
            }
        }
        count == self.nodes.len()
    }

    /// Plain-text dump: one `node_id kind cap` line per node followed by one
    /// `edge_id u v cap` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let _ = writeln!(out, "{} {} {}", n.id, n.kind.as_str(), n.cap);
        }
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {} {}", e.id, e.endpoints.0, e.endpoints.1, e.cap);
        }
        out
    }

    /// Inverse of [`SubstrateGraph::to_edge_list`]. Blank lines and `#` comments are skipped.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ctx = || format!("line {}", lineno + 1);
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<u32> {
                s.parse()
                    .map_err(|_| VceError::parse(ctx(), format!("not an integer: {s:?}")))
            };
            match fields.as_slice() {
                [id, kind, cap] => {
                    if !edges.is_empty() {
                        return Err(VceError::parse(ctx(), "node line after edge lines"));
                    }
                    if num(id)? as usize != nodes.len() {
                        return Err(VceError::parse(ctx(), "node ids must be contiguous"));
                    }
                    let kind = match *kind {
                        "server" => NodeKind::Server,
                        "switch" => NodeKind::Switch,
                        other => return Err(VceError::parse(ctx(), format!("unknown kind {other:?}"))),
                    };
                    nodes.push((kind, num(cap)?));
                }
                [id, u, v, cap] => {
                    if num(id)? as usize != edges.len() {
                        return Err(VceError::parse(ctx(), "edge ids must be contiguous"));
                    }
                    edges.push((num(u)?, num(v)?, num(cap)?));
                }
                _ => return Err(VceError::parse(ctx(), "expected 3 or 4 fields")),
            }
        }
        SubstrateGraph::from_parts(&nodes, &edges)
    }
}

/// Standard k-ary fat-tree: `k³/4` servers, `k²/2` edge, `k²/2` aggregation
/// and `k²/4` core switches.
///
/// Ids: servers first (pod-major), then edge, aggregation and core switches.
/// Aggregation switch `j` of every pod uplinks to core switches
/// `j·k/2 .. (j+1)·k/2`.
pub fn build_fat_tree(k: u32, server_cap: u32, edge_cap: u32) -> Result<SubstrateGraph> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(VceError::InvalidTopology(format!(
            "fat-tree arity must be even and >= 2, got {k}"
        )));
    }
    let half = k / 2;
    let pods = k;
    let n_servers = pods * half * half;
    let n_edge = pods * half;
    let n_agg = pods * half;
    let n_core = half * half;

    let mut nodes = Vec::with_capacity((n_servers + n_edge + n_agg + n_core) as usize);
    nodes.extend((0..n_servers).map(|_| (NodeKind::Server, server_cap)));
    nodes.extend((0..n_edge + n_agg + n_core).map(|_| (NodeKind::Switch, 0)));

    let server = |pod: u32, sw: u32, h: u32| (pod * half + sw) * half + h;
    let edge_sw = |pod: u32, sw: u32| n_servers + pod * half + sw;
    let agg_sw = |pod: u32, j: u32| n_servers + n_edge + pod * half + j;
    let core_sw = |c: u32| n_servers + n_edge + n_agg + c;

    let mut edges = Vec::with_capacity((3 * k * k * k / 4) as usize);
    for pod in 0..pods {
        for sw in 0..half {
            for h in 0..half {
                edges.push((server(pod, sw, h), edge_sw(pod, sw), edge_cap));
            }
        }
        for sw in 0..half {
            for j in 0..half {
                edges.push((edge_sw(pod, sw), agg_sw(pod, j), edge_cap));
            }
        }
        for j in 0..half {
            for c in j * half..(j + 1) * half {
                edges.push((agg_sw(pod, j), core_sw(c), edge_cap));
            }
        }
    }
    SubstrateGraph::from_parts(&nodes, &edges)
}

struct BCubeBlock {
    nodes: Vec<(NodeKind, u32)>,
    edges: Vec<(u32, u32, u32)>,
    switches: Vec<u32>,
}

fn bcube_block(n: u32, k: u32, server_cap: u32, edge_cap: u32, base: u32) -> Result<BCubeBlock> {
    if n < 2 {
        return Err(VceError::InvalidTopology(format!(
            "BCube port count must be >= 2, got {n}"
        )));
    }
    let overflow = || VceError::InvalidTopology("BCube too large".into());
    let n_servers = n.checked_pow(k + 1).ok_or_else(overflow)?;
    let per_level = n.pow(k);
    let n_switches = (k + 1).checked_mul(per_level).ok_or_else(overflow)?;

    let mut nodes = Vec::with_capacity((n_servers + n_switches) as usize);
    nodes.extend((0..n_servers).map(|_| (NodeKind::Server, server_cap)));
    nodes.extend((0..n_switches).map(|_| (NodeKind::Switch, 0)));

    // Switch (level, addr) sits at n_servers + level * n^k + addr, where addr
    // is the server address with digit `level` removed.
    let mut edges = Vec::with_capacity((n_servers * (k + 1)) as usize);
    for s in 0..n_servers {
        for level in 0..=k {
            let low = s % n.pow(level);
            let high = s / n.pow(level + 1);
            let addr = high * n.pow(level) + low;
            let sw = n_servers + level * per_level + addr;
            edges.push((base + s, base + sw, edge_cap));
        }
    }
    let switches = (n_servers..n_servers + n_switches).map(|s| base + s).collect();
    Ok(BCubeBlock {
        nodes,
        edges,
        switches,
    })
}

/// BCube(n, k): `n^(k+1)` servers and `(k+1)·n^k` switches. Server ids come
/// first, switches follow ordered by level then address.
pub fn build_bcube(n: u32, k: u32, server_cap: u32, edge_cap: u32) -> Result<SubstrateGraph> {
    let block = bcube_block(n, k, server_cap, edge_cap, 0)?;
    SubstrateGraph::from_parts(&block.nodes, &block.edges)
}

/// MDCube built from BCube(n, k) containers.
///
/// Containers are addressed by mixed-radix coordinates over `dim_sizes`.
/// Along each dimension, every pair of containers that differ only in that
/// coordinate gets one switch-to-switch link: for coordinates `a < b`,
/// container `a` uses its local switch `off + b - 1` and container `b` its
/// local switch `off + a`, where `off` is the number of switches consumed by
/// earlier dimensions.
pub fn build_mdcube(
    dim_sizes: &[u32],
    n: u32,
    k: u32,
    server_cap: u32,
    edge_cap: u32,
) -> Result<SubstrateGraph> {
    if dim_sizes.is_empty() || dim_sizes.contains(&0) {
        return Err(VceError::InvalidTopology("MDCube dimensions must be positive".into()));
    }
    let containers: u32 = dim_sizes.iter().product();
    if containers < 2 {
        return Err(VceError::InvalidTopology(
            "MDCube needs at least two containers".into(),
        ));
    }
    let probe = bcube_block(n, k, server_cap, edge_cap, 0)?;
    let per_container = probe.nodes.len() as u32;
    let needed: u32 = dim_sizes.iter().map(|d| d - 1).sum();
    if needed as usize > probe.switches.len() {
        return Err(VceError::InvalidTopology(format!(
            "each container needs {needed} inter-container links but has only {} switches",
            probe.switches.len()
        )));
    }

    let mut nodes = Vec::with_capacity((containers * per_container) as usize);
    let mut edges = Vec::new();
    let mut switch_lists = Vec::with_capacity(containers as usize);
    for c in 0..containers {
        let block = bcube_block(n, k, server_cap, edge_cap, c * per_container)?;
        nodes.extend(block.nodes);
        edges.extend(block.edges);
        switch_lists.push(block.switches);
    }

    let coords = |c: u32| -> Vec<u32> {
        let mut rest = c;
        dim_sizes
            .iter()
            .map(|&d| {
                let x = rest % d;
                rest /= d;
                x
            })
            .collect()
    };
    let index_of = |coord: &[u32]| -> u32 {
        coord
            .iter()
            .zip(dim_sizes)
            .rev()
            .fold(0, |acc, (&x, &d)| acc * d + x)
    };

    let mut offset = 0;
    for (dim, &size) in dim_sizes.iter().enumerate() {
        for c in 0..containers {
            let coord = coords(c);
            let a = coord[dim];
            for b in a + 1..size {
                let mut other = coord.clone();
                other[dim] = b;
                let peer = index_of(&other);
                let left = switch_lists[c as usize][(offset + b - 1) as usize];
                let right = switch_lists[peer as usize][(offset + a) as usize];
                edges.push((left, right, edge_cap));
            }
        }
        offset += size - 1;
    }
    SubstrateGraph::from_parts(&nodes, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degree(g: &SubstrateGraph, id: NodeId) -> usize {
        g.incident(id).len()
    }

    #[test]
    fn fat_tree_k2_by_hand() {
        let g = build_fat_tree(2, 20, 20).unwrap();
        assert_eq!(g.server_count(), 2);
        assert_eq!(g.node_count() - g.server_count(), 5);
        assert_eq!(g.edge_count(), 6);
    }

    #[test]
    fn fat_tree_k12_counts() {
        let g = build_fat_tree(12, 20, 20).unwrap();
        assert_eq!(g.server_count(), 432);
        assert_eq!(g.node_count(), 612);
        assert_eq!(g.edge_count(), 1296);
        assert_eq!(g.size(), 612 + 1296);
        assert!(g.servers().all(|s| degree(&g, s.id) == 1));
    }

    #[test]
    fn fat_tree_rejects_bad_arity() {
        assert!(build_fat_tree(3, 20, 20).is_err());
        assert!(build_fat_tree(0, 20, 20).is_err());
    }

    #[test]
    fn fat_tree_switch_degrees() {
        let k = 6;
        let g = build_fat_tree(k, 20, 20).unwrap();
        for n in g.nodes().iter().filter(|n| n.kind == NodeKind::Switch) {
            assert_eq!(degree(&g, n.id), k as usize);
            assert_eq!(n.cap, 0);
        }
    }

    #[test]
    fn bcube_small_cases() {
        let g = build_bcube(2, 0, 20, 20).unwrap();
        assert_eq!((g.server_count(), g.node_count(), g.edge_count()), (2, 3, 2));
        let g = build_bcube(2, 1, 20, 20).unwrap();
        assert_eq!((g.server_count(), g.node_count(), g.edge_count()), (4, 8, 8));
        assert!(g.servers().all(|s| degree(&g, s.id) == 2));
        let g = build_bcube(12, 1, 20, 20).unwrap();
        assert_eq!(g.server_count(), 144);
        assert_eq!(g.node_count() - 144, 24);
        assert!(build_bcube(1, 1, 20, 20).is_err());
    }

    #[test]
    fn bcube_switch_wiring_drops_digit() {
        // n=3,k=1: server 5 = digits (1,2); level 0 drops digit 0 -> addr 1, level 1 drops digit 1 -> addr 2.
        let g = build_bcube(3, 1, 20, 20).unwrap();
        let nbrs: Vec<u32> = g.incident(NodeId(5)).iter().map(|&(_, v)| v.0).collect();
        assert_eq!(nbrs, vec![9 + 1, 9 + 3 + 2]);
    }

    #[test]
    fn mdcube_reference_size() {
        let g = build_mdcube(&[4], 12, 1, 20, 20).unwrap();
        assert_eq!(g.server_count(), 576);
        let intra = 4 * 144 * 2;
        assert_eq!(g.edge_count() - intra, 6);
        assert!(g.servers().all(|s| degree(&g, s.id) == 2));
    }

    #[test]
    fn mdcube_two_stars() {
        let g = build_mdcube(&[2], 2, 0, 20, 20).unwrap();
        assert_eq!((g.server_count(), g.node_count() - g.server_count(), g.edge_count()), (4, 2, 5));
    }

    #[test]
    fn mdcube_rejects_too_many_links() {
        // BCube(2,0) has one switch; three containers need two links each.
        assert!(build_mdcube(&[3], 2, 0, 20, 20).is_err());
        assert!(build_mdcube(&[1], 2, 1, 20, 20).is_err());
    }

    #[test]
    fn mdcube_two_dimensional() {
        let g = build_mdcube(&[2, 2], 2, 1, 20, 20).unwrap();
        assert_eq!(g.server_count(), 16);
        assert_eq!(g.edge_count(), 4 * 8 + 4);
    }

    #[test]
    fn constructions_are_deterministic() {
        assert_eq!(build_fat_tree(4, 20, 20).unwrap(), build_fat_tree(4, 20, 20).unwrap());
        assert_eq!(
            build_mdcube(&[3], 3, 1, 20, 20).unwrap(),
            build_mdcube(&[3], 3, 1, 20, 20).unwrap()
        );
    }

    #[test]
    fn derived_constants() {
        let g = SubstrateGraph::from_parts(
            &[(NodeKind::Server, 7), (NodeKind::Switch, 0), (NodeKind::Server, 3)],
            &[(0, 1, 5), (1, 2, 9)],
        )
        .unwrap();
        assert_eq!(g.max_edge_cap(), 9);
        assert_eq!(g.max_server_cap(), 7);
        assert_eq!(g.size(), 5);
        assert_eq!(g.total_server_cap(), 10);
    }

    #[test]
    fn from_parts_rejects_malformed() {
        let s = (NodeKind::Server, 1);
        assert!(SubstrateGraph::from_parts(&[s, s], &[(0, 0, 1)]).is_err());
        assert!(SubstrateGraph::from_parts(&[s, s], &[(0, 1, 1), (1, 0, 1)]).is_err());
        assert!(SubstrateGraph::from_parts(&[s, s], &[(0, 1, 0)]).is_err());
        assert!(SubstrateGraph::from_parts(&[s, s], &[]).is_err());
        assert!(SubstrateGraph::from_parts(&[(NodeKind::Switch, 2), s], &[(0, 1, 1)]).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = build_bcube(2, 1, 20, 20).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("0 server 20\n"));
        assert_eq!(SubstrateGraph::from_edge_list(&text).unwrap(), g);
    }
}
