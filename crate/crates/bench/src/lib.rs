//! Shared fixtures for the criterion benchmarks.

use vcesim_core::algorithms::{AlgorithmKind, OnlineRun};
use vcesim_core::oracle::CostVector;
use vcesim_core::substrate::{build_fat_tree, SubstrateGraph};
use vcesim_core::workload::{generate_sequence, BenefitPattern, RequestDomain, VcRequest};

pub fn fat_tree(k: u32) -> SubstrateGraph {
    build_fat_tree(k, 20, 20).expect("even k")
}

pub fn requests(seed: u64, len: usize) -> Vec<VcRequest> {
    generate_sequence(seed, len, &BenefitPattern::random(), RequestDomain::default()).expect("valid length")
}

/// Prices left behind by a COVCE run over `warmup` requests, so the oracle
/// is timed on a realistic, uneven price landscape.
pub fn covce_prices(graph: &SubstrateGraph, warmup: usize) -> CostVector {
    let mut run = OnlineRun::new(AlgorithmKind::Covce, graph);
    for r in requests(7, warmup) {
        run.process(&r).expect("valid request");
    }
    run.state().costs.clone()
}
