//! Seeded experiment runs and their CSV artifacts.
//!
//! Output layout under the configured directory:
//!
//! ```text
//! manifest.txt
//! cost_table.csv                 (vcesize only)
//! seed_<s>/sequence.csv
//! seed_<s>/<alg>_decisions.csv
//! seed_<s>/<alg>_metrics.csv
//! seed_<s>/<alg>_windows.csv
//! averaged/<alg>_metrics.csv
//! averaged/<alg>_windows.csv
//! ```

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::algorithms::{AlgorithmKind, Decision, OnlineRun, PrimalDualState};
use crate::error::{Result, VceError};
use crate::metrics::{average_across_runs, MetricsRecorder, MetricsSeries};
use crate::substrate::SubstrateGraph;
use crate::workload::{
    build_empirical_cost_table, generate_sequence, sequence_to_csv, BenefitPattern, EmpiricalCostTable,
    RequestDomain, VceSizeModel, VcRequest,
};

pub use config::{ExperimentConfig, PatternConfig, Topology};

/// One row of a decision log.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRow {
    pub index: u32,
    pub decision: &'static str,
    pub benefit: u64,
    /// Cost of the oracle's embedding under the prices it was found with.
    pub embedding_cost: Option<f64>,
    pub z: f64,
    pub alpha: f64,
    pub edges_touched: usize,
    pub nodes_touched: usize,
}

pub const DECISIONS_HEADER: &str = "index,algorithm,decision,benefit,embedding_cost,z,alpha,edges_touched,nodes_touched";

pub fn decisions_csv(rows: &[DecisionRow], algorithm: AlgorithmKind) -> String {
    let mut out = String::from(DECISIONS_HEADER);
    out.push('\n');
    for r in rows {
        let cost = r.embedding_cost.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{algorithm},{},{},{cost},{},{},{},{}",
            r.index, r.decision, r.benefit, r.z, r.alpha, r.edges_touched, r.nodes_touched
        );
    }
    out
}

/// Everything one algorithm produced on one sequence.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: AlgorithmKind,
    pub decisions: Vec<DecisionRow>,
    pub series: MetricsSeries,
    pub state: PrimalDualState,
}

/// Runs one policy over `sequence` from a fresh state.
pub fn run_algorithm(
    graph: &SubstrateGraph,
    algorithm: AlgorithmKind,
    sequence: &[VcRequest],
    window_width: usize,
    fixed_alpha: Option<f64>,
) -> Result<RunResult> {
    let mut run = OnlineRun::new(algorithm, graph).with_fixed_alpha(fixed_alpha);
    let mut recorder = MetricsRecorder::new(window_width)?;
    let mut decisions = Vec::with_capacity(sequence.len());
    for req in sequence {
        let step = run.process(req)?;
        let state = run.state();
        let z = state.records.last().map_or(0.0, |r| r.z);
        let m = step.decision.embedding();
        decisions.push(DecisionRow {
            index: req.index,
            decision: step.decision.label(),
            benefit: req.benefit,
            embedding_cost: m.map(|m| m.cost),
            z,
            alpha: state.alpha,
            edges_touched: m.map_or(0, |m| m.edge_flow.len()),
            nodes_touched: m.map_or(0, |m| m.vm_count.len()),
        });
        recorder.observe(
            matches!(step.decision, Decision::Accepted(_)),
            state.cum_profit,
            &state.node_loads,
            &state.edge_loads,
            graph,
        );
    }
    Ok(RunResult {
        algorithm,
        decisions,
        series: recorder.finish(),
        state: run.state().clone(),
    })
}

/// Turns the configured pattern into a concrete one, loading or building
/// the empirical cost table for `vcesize`.
pub fn resolve_pattern(
    pattern: &PatternConfig,
    graph: &SubstrateGraph,
) -> Result<(BenefitPattern, Option<Arc<EmpiricalCostTable>>)> {
    Ok(match pattern {
        PatternConfig::Random { lo, hi } => (BenefitPattern::Random { lo: *lo, hi: *hi }, None),
        PatternConfig::ReqSize => (BenefitPattern::ReqSize, None),
        PatternConfig::Wave {
            amplitude,
            frequency,
            offset,
        } => (
            BenefitPattern::Wave {
                amplitude: *amplitude,
                frequency: *frequency,
                offset: *offset,
            },
            None,
        ),
        PatternConfig::Peak {
            period,
            peak_value,
            base_value,
        } => (
            BenefitPattern::Peak {
                period: *period,
                peak_value: *peak_value,
                base_value: *base_value,
            },
            None,
        ),
        PatternConfig::VceSize {
            cost_table,
            table_seed,
            table_experiments,
            table_requests,
            scale_max,
        } => {
            let table = match cost_table {
                Some(path) => EmpiricalCostTable::load(path)?,
                None => build_empirical_cost_table(*table_seed, *table_experiments, *table_requests, graph)?,
            };
            let table = Arc::new(table);
            let model = VceSizeModel::new(table.clone(), graph, domain_of(graph), *scale_max)?;
            (BenefitPattern::VceSize(model), Some(table))
        }
    })
}

fn domain_of(graph: &SubstrateGraph) -> RequestDomain {
    RequestDomain {
        node_cap: graph.max_server_cap(),
        edge_cap: graph.max_edge_cap(),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| VceError::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| VceError::io(path, e))
}

/// Runs every (seed, algorithm) pair and writes the artifact tree.
/// Returns the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<PathBuf> {
    config.validate()?;
    let out = config.output_dir.clone().expect("validated");
    let graph = config.topology.build(config.server_cap, config.edge_cap)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| VceError::InvalidConfig(format!("thread pool: {e}")))?;

    let (seq_results, run_results, table) = pool.install(|| -> Result<_> {
        let (pattern, table) = resolve_pattern(&config.pattern, &graph)?;
        let domain = domain_of(&graph);
        let sequences: Vec<Vec<VcRequest>> = config
            .seeds
            .par_iter()
            .map(|&s| generate_sequence(s, config.sequence_length, &pattern, domain))
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, AlgorithmKind)> = (0..sequences.len())
            .flat_map(|i| config.algorithms.iter().map(move |&a| (i, a)))
            .collect();
        let runs: Vec<RunResult> = jobs
            .par_iter()
            .map(|&(i, a)| run_algorithm(&graph, a, &sequences[i], config.window_width, config.fixed_alpha))
            .collect::<Result<_>>()?;
        Ok((sequences, runs, table))
    })?;

    mkdir(&out)?;
    if let Some(t) = &table {
        t.save(&out.join("cost_table.csv"))?;
    }
    let per_seed = config.algorithms.len();
    for (si, seed) in config.seeds.iter().enumerate() {
        let dir = out.join(format!("seed_{seed}"));
        mkdir(&dir)?;
        write(&dir.join("sequence.csv"), &sequence_to_csv(&seq_results[si]))?;
        for r in &run_results[si * per_seed..(si + 1) * per_seed] {
            let alg = r.algorithm.name();
            write(&dir.join(format!("{alg}_decisions.csv")), &decisions_csv(&r.decisions, r.algorithm))?;
            write(&dir.join(format!("{alg}_metrics.csv")), &r.series.metrics_csv(alg))?;
            write(&dir.join(format!("{alg}_windows.csv")), &r.series.windows_csv(alg))?;
        }
    }

    let avg_dir = out.join("averaged");
    mkdir(&avg_dir)?;
    for (ai, alg) in config.algorithms.iter().enumerate() {
        let series: Vec<MetricsSeries> = (0..config.seeds.len())
            .map(|si| run_results[si * per_seed + ai].series.clone())
            .collect();
        let avg = average_across_runs(&series)?;
        write(&avg_dir.join(format!("{alg}_metrics.csv")), &avg.metrics_csv(alg.name()))?;
        write(&avg_dir.join(format!("{alg}_windows.csv")), &avg.windows_csv(alg.name()))?;
    }

    let mut manifest = format!(
        "tool = {}\nversion = {}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    );
    manifest.push_str(&config.to_kv_text());
    let _ = writeln!(manifest, "nodes = {}", graph.node_count());
    let _ = writeln!(manifest, "edges = {}", graph.edge_count());
    let _ = writeln!(manifest, "servers = {}", graph.server_count());
    if config.fixed_alpha.is_some() {
        let exceeded: Vec<String> = run_results
            .iter()
            .enumerate()
            .filter(|(_, r)| r.state.alpha_exceeded)
            .map(|(i, r)| format!("{}:{}", config.seeds[i / per_seed], r.algorithm))
            .collect();
        let _ = writeln!(manifest, "fixed_alpha_exceeded = {}", exceeded.join(","));
    }
    write(&out.join("manifest.txt"), &manifest)?;
    Ok(out)
}
