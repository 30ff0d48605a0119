//! Online admission policies.
//!
//! All four policies share [`PrimalDualState`]: cumulative loads, resource
//! prices, the running benefit bound `alpha`, per-request `z` values, and the
//! primal (`Σ cap·x + Σ z`) and dual (accepted benefit) objectives.
//!
//! * Greedy: unit prices on residual capacities, accepts whatever fits.
//! * COVCE: exponential prices on initial capacities, accepts iff the
//!   cheapest embedding costs strictly less than the benefit.
//! * COVCEload: COVCE on residual capacities.
//! * GVOP: multiplicative price updates, no benefit bound.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, VceError};
use crate::oracle::{CapacityView, CostVector, Embedding, VcAceOracle};
use crate::substrate::SubstrateGraph;
use crate::workload::VcRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmKind {
    Greedy,
    Covce,
    CovceLoad,
    Gvop,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] = [
        AlgorithmKind::Greedy,
        AlgorithmKind::Covce,
        AlgorithmKind::CovceLoad,
        AlgorithmKind::Gvop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Greedy => "greedy",
            AlgorithmKind::Covce => "covce",
            AlgorithmKind::CovceLoad => "covceload",
            AlgorithmKind::Gvop => "gvop",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = VceError;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| VceError::InvalidConfig(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Accepted(Embedding),
    /// The cheapest embedding cost at least the benefit.
    Rejected(Embedding),
    /// The oracle found no valid embedding.
    Invalid,
}

impl Decision {
    pub fn label(&self) -> &'static str {
        match self {
            Decision::Accepted(_) => "accepted",
            Decision::Rejected(_) => "rejected",
            Decision::Invalid => "invalid",
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, Decision::Accepted(_))
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        match self {
            Decision::Accepted(m) | Decision::Rejected(m) => Some(m),
            Decision::Invalid => None,
        }
    }
}

/// Graph constants entering the COVCE price function and its ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphConstants {
    /// `|V| + |E|`.
    pub size: f64,
    pub max_edge_cap: f64,
    pub max_node_cap: f64,
}

impl GraphConstants {
    pub fn of(graph: &SubstrateGraph) -> Self {
        GraphConstants {
            size: graph.size() as f64,
            max_edge_cap: graph.max_edge_cap() as f64,
            max_node_cap: graph.max_server_cap() as f64,
        }
    }

    pub fn max_cap(&self) -> f64 {
        self.max_edge_cap.max(self.max_node_cap)
    }

    /// `4·ln(1 + size·C_max·alpha) + 1`.
    pub fn covce_ratio(&self, alpha: f64) -> f64 {
        4.0 * (self.size * self.max_cap() * alpha).ln_1p() + 1.0
    }
}

/// COVCE price of a resource at `load`:
/// `(exp(ln(1 + size·c·alpha) · load / cap) - 1) / (size·c)`.
///
/// Zero at zero load and exactly `alpha` at full load.
pub fn covce_cost(load: u64, cap: u64, alpha: f64, c: f64, size: f64) -> f64 {
    let q = size * c;
    ((q * alpha).ln_1p() * load as f64 / cap as f64).exp_m1() / q
}

/// GVOP price update for one resource carrying `load` of an accepted
/// embedding whose loads of the same resource class sum to `class_weight`.
pub fn gvop_cost_update(current: f64, load: u64, cap: u64, class_weight: u64) -> f64 {
    let growth = (load as f64 / cap as f64).exp2();
    current * growth + (growth - 1.0) / class_weight as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSnapshot {
    pub primal_cost: f64,
    pub cum_profit: u64,
    pub alpha: f64,
}

/// What happened to one request, kept for after-the-fact feasibility checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestRecord {
    pub index: u32,
    pub benefit: u64,
    /// The oracle's embedding, whether accepted or rejected.
    pub embedding: Option<Embedding>,
    pub accepted: bool,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualState {
    pub node_loads: Vec<u64>,
    pub edge_loads: Vec<u64>,
    pub costs: CostVector,
    pub alpha: f64,
    pub records: Vec<RequestRecord>,
    pub cum_profit: u64,
    pub primal_cost: f64,
    pub constants: GraphConstants,
    /// When set, `alpha` is pinned and never raised.
    pub fixed_alpha: Option<f64>,
    /// Set when a benefit exceeded a pinned `alpha`.
    pub alpha_exceeded: bool,
    z_sum: f64,
    node_caps: Vec<u64>,
    edge_caps: Vec<u64>,
}

impl PrimalDualState {
    pub fn new(graph: &SubstrateGraph) -> Self {
        PrimalDualState {
            node_loads: vec![0; graph.node_count()],
            edge_loads: vec![0; graph.edge_count()],
            costs: CostVector::zeros(graph),
            alpha: 1.0,
            records: Vec::new(),
            cum_profit: 0,
            primal_cost: 0.0,
            constants: GraphConstants::of(graph),
            fixed_alpha: None,
            alpha_exceeded: false,
            z_sum: 0.0,
            node_caps: graph.nodes().iter().map(|n| n.cap as u64).collect(),
            edge_caps: graph.edges().iter().map(|e| e.cap as u64).collect(),
        }
    }

    /// Pins `alpha` for the whole run; prices start from it.
    pub fn with_fixed_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha.max(1.0);
        self.fixed_alpha = Some(self.alpha);
        self
    }

    pub fn snapshot(&self) -> ObjectiveSnapshot {
        ObjectiveSnapshot {
            primal_cost: self.primal_cost,
            cum_profit: self.cum_profit,
            alpha: self.alpha,
        }
    }

    pub fn z_total(&self) -> f64 {
        self.z_sum
    }

    fn refresh_primal(&mut self) {
        let edges: f64 = self.edge_caps.iter().zip(&self.costs.edge).map(|(&c, &x)| c as f64 * x).sum();
        let nodes: f64 = self.node_caps.iter().zip(&self.costs.node).map(|(&c, &x)| c as f64 * x).sum();
        self.primal_cost = edges + nodes + self.z_total();
    }

    /// Largest `load / cap` over capacitated resources, or 0 on an idle network.
    pub fn max_load_ratio(&self) -> f64 {
        let ratio = |(&l, &c): (&u64, &u64)| if c == 0 { 0.0 } else { l as f64 / c as f64 };
        self.edge_loads
            .iter()
            .zip(&self.edge_caps)
            .chain(self.node_loads.iter().zip(&self.node_caps))
            .map(ratio)
            .fold(0.0, f64::max)
    }

    pub fn within_capacity(&self) -> bool {
        self.edge_loads.iter().zip(&self.edge_caps).all(|(l, c)| l <= c)
            && self.node_loads.iter().zip(&self.node_caps).all(|(l, c)| l <= c)
    }

    /// Largest `Σ loads` of any accepted embedding.
    pub fn max_accepted_weight(&self) -> u64 {
        self.records
            .iter()
            .filter(|r| r.accepted)
            .filter_map(|r| r.embedding.as_ref().map(Embedding::weight))
            .max()
            .unwrap_or(0)
    }

    pub fn max_benefit(&self) -> u64 {
        self.records.iter().map(|r| r.benefit).max().unwrap_or(0)
    }

    /// Re-evaluates `Σ l·x + z >= b` for every embedding the oracle ever
    /// returned, using the current prices. Returns the indexes that fail.
    pub fn primal_infeasible_requests(&self, tolerance: f64) -> Vec<u32> {
        self.records
            .iter()
            .filter(|r| {
                r.embedding.as_ref().is_some_and(|m| {
                    let lhs = m.cost_under(&self.costs) + r.z;
                    lhs < r.benefit as f64 - tolerance * (r.benefit as f64).max(1.0)
                })
            })
            .map(|r| r.index)
            .collect()
    }

    fn add_loads(&mut self, m: &Embedding) {
        for (e, l) in m.edge_loads() {
            self.edge_loads[e.index()] += l;
        }
        for (v, l) in m.node_loads() {
            self.node_loads[v.index()] += l;
        }
    }

    fn covce_price_edge(&self, e: usize) -> f64 {
        covce_cost(self.edge_loads[e], self.edge_caps[e], self.alpha, self.constants.max_edge_cap, self.constants.size)
    }

    fn covce_price_node(&self, v: usize) -> f64 {
        if self.node_caps[v] == 0 {
            return 0.0;
        }
        covce_cost(self.node_loads[v], self.node_caps[v], self.alpha, self.constants.max_node_cap, self.constants.size)
    }

    /// Raises `alpha` to `benefit` if needed and reprices everything.
    fn covce_adjust_alpha(&mut self, benefit: u64) -> bool {
        let b = benefit as f64;
        if b <= self.alpha {
            return false;
        }
        if self.fixed_alpha.is_some() {
            self.alpha_exceeded = true;
            return false;
        }
        self.alpha = b;
        for e in 0..self.edge_loads.len() {
            self.costs.edge[e] = self.covce_price_edge(e);
        }
        for v in 0..self.node_loads.len() {
            self.costs.node[v] = self.covce_price_node(v);
        }
        self.refresh_primal();
        true
    }

    fn covce_reprice(&mut self, m: &Embedding) {
        for (e, _) in m.edge_loads() {
            self.costs.edge[e.index()] = self.covce_price_edge(e.index());
        }
        for (v, _) in m.node_loads() {
            self.costs.node[v.index()] = self.covce_price_node(v.index());
        }
    }

    fn gvop_reprice(&mut self, m: &Embedding) {
        let w_edge = m.total_edge_load();
        if w_edge > 0 {
            for (e, l) in m.edge_loads() {
                let x = &mut self.costs.edge[e.index()];
                *x = gvop_cost_update(*x, l, self.edge_caps[e.index()], w_edge);
            }
        }
        let w_node = m.total_node_load();
        if w_node > 0 {
            for (v, l) in m.node_loads() {
                let x = &mut self.costs.node[v.index()];
                *x = gvop_cost_update(*x, l, self.node_caps[v.index()], w_node);
            }
        }
    }
}

/// Result of processing one request.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub decision: Decision,
    /// Objectives after any `alpha` repricing, right before the decision.
    pub before: ObjectiveSnapshot,
    pub after: ObjectiveSnapshot,
    pub alpha_raised: bool,
}

fn residual_view(state: &PrimalDualState) -> CapacityView<'_> {
    CapacityView::Residual {
        node_loads: &state.node_loads,
        edge_loads: &state.edge_loads,
    }
}

fn record(state: &mut PrimalDualState, request: &VcRequest, decision: &Decision, z: f64) {
    state.z_sum += z;
    state.records.push(RequestRecord {
        index: request.index,
        benefit: request.benefit,
        embedding: decision.embedding().cloned(),
        accepted: decision.is_accepted(),
        z,
    });
}

#[derive(Clone, Copy, PartialEq)]
enum Pricing {
    Covce,
    Gvop,
}

fn priced_step(
    state: &mut PrimalDualState,
    graph: &SubstrateGraph,
    oracle: &VcAceOracle,
    request: &VcRequest,
    residual: bool,
    pricing: Pricing,
) -> Result<StepOutcome> {
    let alpha_raised = pricing == Pricing::Covce && state.covce_adjust_alpha(request.benefit);
    let before = state.snapshot();
    let view = if residual { residual_view(state) } else { CapacityView::Initial };
    let found = oracle.find_min_cost_embedding(graph, request, &state.costs, &view)?;
    let benefit = request.benefit as f64;
    let (decision, z) = match found {
        None => (Decision::Invalid, 0.0),
        Some(m) if m.cost < benefit => {
            let z = benefit - m.cost;
            state.add_loads(&m);
            match pricing {
                Pricing::Covce => state.covce_reprice(&m),
                Pricing::Gvop => state.gvop_reprice(&m),
            }
            state.cum_profit += request.benefit;
            (Decision::Accepted(m), z)
        }
        Some(m) => (Decision::Rejected(m), 0.0),
    };
    record(state, request, &decision, z);
    if decision.is_accepted() {
        state.refresh_primal();
    }
    Ok(StepOutcome {
        decision,
        before,
        after: state.snapshot(),
        alpha_raised,
    })
}

pub fn covce_process(
    state: &mut PrimalDualState,
    graph: &SubstrateGraph,
    oracle: &VcAceOracle,
    request: &VcRequest,
) -> Result<StepOutcome> {
    priced_step(state, graph, oracle, request, false, Pricing::Covce)
}

pub fn covceload_process(
    state: &mut PrimalDualState,
    graph: &SubstrateGraph,
    oracle: &VcAceOracle,
    request: &VcRequest,
) -> Result<StepOutcome> {
    priced_step(state, graph, oracle, request, true, Pricing::Covce)
}

pub fn gvop_process(
    state: &mut PrimalDualState,
    graph: &SubstrateGraph,
    oracle: &VcAceOracle,
    request: &VcRequest,
) -> Result<StepOutcome> {
    priced_step(state, graph, oracle, request, false, Pricing::Gvop)
}

/// Unit prices on residual capacities; accepts any valid embedding.
pub fn greedy_process(
    state: &mut PrimalDualState,
    graph: &SubstrateGraph,
    oracle: &VcAceOracle,
    request: &VcRequest,
    unit_costs: &CostVector,
) -> Result<StepOutcome> {
    let before = state.snapshot();
    let found = oracle.find_min_cost_embedding(graph, request, unit_costs, &residual_view(state))?;
    let decision = match found {
        Some(m) => {
            state.add_loads(&m);
            state.cum_profit += request.benefit;
            Decision::Accepted(m)
        }
        None => Decision::Invalid,
    };
    record(state, request, &decision, 0.0);
    Ok(StepOutcome {
        decision,
        before,
        after: state.snapshot(),
        alpha_raised: false,
    })
}

/// Checks one COVCE step against the per-request primal/dual ratio.
///
/// `before` must be taken after any `alpha` repricing of that step (see
/// [`StepOutcome::before`]). An accepted request must raise the dual by
/// exactly its benefit and the primal by at most
/// `(4·ln(1 + size·C_max·alpha) + 1)·benefit`; any other outcome must leave
/// both unchanged.
pub fn check_step_ratio(
    before: &ObjectiveSnapshot,
    after: &ObjectiveSnapshot,
    request: &VcRequest,
    constants: &GraphConstants,
) -> bool {
    let d_dual = after.cum_profit - before.cum_profit;
    let d_primal = after.primal_cost - before.primal_cost;
    if d_dual == 0 {
        return d_primal == 0.0;
    }
    let bound = constants.covce_ratio(after.alpha) * request.benefit as f64;
    d_dual == request.benefit && d_primal <= bound * (1.0 + 1e-12)
}

/// One policy processing one request sequence over a fixed substrate.
#[derive(Debug, Clone)]
pub struct OnlineRun<'g> {
    kind: AlgorithmKind,
    graph: &'g SubstrateGraph,
    oracle: VcAceOracle,
    state: PrimalDualState,
    unit_costs: Option<CostVector>,
}

impl<'g> OnlineRun<'g> {
    pub fn new(kind: AlgorithmKind, graph: &'g SubstrateGraph) -> Self {
        OnlineRun {
            kind,
            graph,
            oracle: VcAceOracle::default(),
            state: PrimalDualState::new(graph),
            unit_costs: (kind == AlgorithmKind::Greedy).then(|| CostVector::uniform(graph, 1.0)),
        }
    }

    pub fn with_oracle(mut self, oracle: VcAceOracle) -> Self {
        self.oracle = oracle;
        self
    }

    /// Pins `alpha` for COVCE and COVCEload; ignored by the other policies.
    pub fn with_fixed_alpha(mut self, alpha: Option<f64>) -> Self {
        if let (Some(a), AlgorithmKind::Covce | AlgorithmKind::CovceLoad) = (alpha, self.kind) {
            self.state = self.state.with_fixed_alpha(a);
        }
        self
    }

    pub fn kind(&self) -> AlgorithmKind {
        self.kind
    }

    pub fn graph(&self) -> &'g SubstrateGraph {
        self.graph
    }

    pub fn state(&self) -> &PrimalDualState {
        &self.state
    }

    pub fn process(&mut self, request: &VcRequest) -> Result<StepOutcome> {
        let (g, o) = (self.graph, &self.oracle);
        match self.kind {
            AlgorithmKind::Greedy => {
                let unit = self.unit_costs.as_ref().expect("greedy run has unit costs");
                greedy_process(&mut self.state, g, o, request, unit)
            }
            AlgorithmKind::Covce => covce_process(&mut self.state, g, o, request),
            AlgorithmKind::CovceLoad => covceload_process(&mut self.state, g, o, request),
            AlgorithmKind::Gvop => gvop_process(&mut self.state, g, o, request),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::{build_fat_tree, NodeKind};
    use crate::workload::{generate_sequence, BenefitPattern, RequestDomain};

    #[test]
    fn covce_cost_boundaries() {
        assert_eq!(covce_cost(0, 20, 7.0, 20.0, 84.0), 0.0);
        let at_cap = covce_cost(20, 20, 7.0, 20.0, 84.0);
        assert!((at_cap - 7.0).abs() <= 1e-9 * 7.0);
        // load = 2·cap, alpha = 1: ((1+q)^2 - 1)/q = q + 2.
        let q = 84.0 * 20.0;
        let twice = covce_cost(40, 20, 1.0, 20.0, 84.0);
        assert!((twice - (q + 2.0)).abs() <= 1e-9 * (q + 2.0));
    }

    #[test]
    fn gvop_first_update_from_zero() {
        // One edge at full capacity: 0·2 + (1/l)(2-1) = 1/l.
        assert!((gvop_cost_update(0.0, 20, 20, 20) - 1.0 / 20.0).abs() < 1e-15);
        assert!((gvop_cost_update(1.0, 10, 20, 40) - (2f64.sqrt() + (2f64.sqrt() - 1.0) / 40.0)).abs() < 1e-15);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for k in AlgorithmKind::ALL {
            assert_eq!(k.name().parse::<AlgorithmKind>().unwrap(), k);
        }
        assert!("nope".parse::<AlgorithmKind>().is_err());
    }

    fn star() -> SubstrateGraph {
        SubstrateGraph::from_parts(&[(NodeKind::Server, 20), (NodeKind::Switch, 0)], &[(0, 1, 20)]).unwrap()
    }

    #[test]
    fn fresh_covce_accepts_anything() {
        let g = star();
        let mut run = OnlineRun::new(AlgorithmKind::Covce, &g);
        let out = run.process(&VcRequest::new(1, 3, 4, 5, 1)).unwrap();
        assert!(out.decision.is_accepted());
        assert_eq!(run.state().records[0].z, 1.0);
        assert_eq!(run.state().cum_profit, 1);
        assert!(check_step_ratio(&out.before, &out.after, &VcRequest::new(1, 3, 4, 5, 1), &run.state().constants));
    }

    #[test]
    fn covce_rejects_through_full_resource() {
        let g = star();
        let mut run = OnlineRun::new(AlgorithmKind::Covce, &g);
        // Fill the server exactly: 4 VMs x 5 CU = 20.
        let first = VcRequest::new(1, 4, 4, 5, 10);
        assert!(run.process(&first).unwrap().decision.is_accepted());
        assert!((run.state().costs.node[0] - 10.0).abs() < 1e-9);
        // Any embedding now pays >= 5 * alpha on the server.
        let second = VcRequest::new(2, 1, 4, 5, 10);
        let out = run.process(&second).unwrap();
        assert!(matches!(out.decision, Decision::Rejected(_)));
        assert_eq!(out.before, out.after);
        assert!(check_step_ratio(&out.before, &out.after, &second, &run.state().constants));
    }

    #[test]
    fn alpha_raise_reprices_from_loads() {
        let g = build_fat_tree(4, 20, 20).unwrap();
        let mut run = OnlineRun::new(AlgorithmKind::Covce, &g);
        let seq = generate_sequence(3, 60, &BenefitPattern::random(), RequestDomain::default()).unwrap();
        for r in &seq {
            let out = run.process(r).unwrap();
            let s = run.state();
            assert!(s.alpha >= out.before.alpha - 0.0 && s.alpha >= 1.0);
            for e in 0..g.edge_count() {
                assert_eq!(s.costs.edge[e], s.covce_price_edge(e));
            }
            for v in 0..g.node_count() {
                assert_eq!(s.costs.node[v], s.covce_price_node(v));
            }
        }
    }

    #[test]
    fn fixed_alpha_flags_excess() {
        let g = star();
        let mut run = OnlineRun::new(AlgorithmKind::Covce, &g).with_fixed_alpha(Some(5.0));
        run.process(&VcRequest::new(1, 1, 4, 5, 3)).unwrap();
        assert!(!run.state().alpha_exceeded);
        let out = run.process(&VcRequest::new(2, 1, 4, 5, 9)).unwrap();
        assert!(!out.alpha_raised);
        assert_eq!(run.state().alpha, 5.0);
        assert!(run.state().alpha_exceeded);
    }

    #[test]
    fn greedy_accepts_until_full() {
        let g = star();
        let mut run = OnlineRun::new(AlgorithmKind::Greedy, &g);
        assert!(run.process(&VcRequest::new(1, 3, 4, 5, 1)).unwrap().decision.is_accepted());
        let out = run.process(&VcRequest::new(2, 2, 4, 5, 1)).unwrap();
        assert_eq!(out.decision, Decision::Invalid);
        assert!(run.state().within_capacity());
        assert_eq!(run.state().primal_cost, 0.0);
    }

    #[test]
    fn covceload_first_request_matches_greedy() {
        let g = build_fat_tree(4, 20, 20).unwrap();
        let r = VcRequest::new(1, 6, 5, 12, 100);
        let mut a = OnlineRun::new(AlgorithmKind::CovceLoad, &g);
        let mut b = OnlineRun::new(AlgorithmKind::Greedy, &g);
        let (da, db) = (a.process(&r).unwrap().decision, b.process(&r).unwrap().decision);
        assert!(da.is_accepted() && db.is_accepted());
        assert_eq!(a.state().node_loads.iter().sum::<u64>(), b.state().node_loads.iter().sum::<u64>());
    }

    #[test]
    fn gvop_prices_grow_multiplicatively() {
        let g = star();
        let mut run = OnlineRun::new(AlgorithmKind::Gvop, &g);
        run.process(&VcRequest::new(1, 4, 4, 5, 100)).unwrap();
        // w_V = 20 on the one server, load 20 of 20.
        assert!((run.state().costs.node[0] - 1.0 / 20.0).abs() < 1e-15);
        run.process(&VcRequest::new(2, 4, 4, 5, 100)).unwrap();
        assert!((run.state().costs.node[0] - (2.0 / 20.0 + 1.0 / 20.0)).abs() < 1e-15);
        assert_eq!(run.state().max_load_ratio(), 2.0);
    }

    #[test]
    fn primal_feasibility_after_short_runs() {
        let g = build_fat_tree(4, 20, 20).unwrap();
        let seq = generate_sequence(8, 150, &BenefitPattern::random(), RequestDomain::default()).unwrap();
        for kind in [AlgorithmKind::Covce, AlgorithmKind::CovceLoad, AlgorithmKind::Gvop] {
            let mut run = OnlineRun::new(kind, &g);
            for r in &seq {
                run.process(r).unwrap();
            }
            assert!(run.state().primal_infeasible_requests(1e-9).is_empty(), "{kind}");
        }
    }
}
