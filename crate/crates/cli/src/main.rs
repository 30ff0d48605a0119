use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use vcesim_core::runner::{run_experiment, ExperimentConfig, Topology};
use vcesim_core::verify::run_invariant_suite;
use vcesim_core::workload::build_empirical_cost_table;

#[derive(Parser)]
#[command(name = "vcesim", version, about = "Online virtual cluster embedding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV tree.
    Run(RunArgs),
    /// Build the empirical cost table used by the vcesize pattern.
    BuildCostTable(CostTableArgs),
    /// Check the oracle and online policies against brute force on tiny instances.
    Verify(VerifyArgs),
    /// Print a topology as an edge list.
    DumpTopology(TopologyArgs),
}

#[derive(Args)]
struct TopologyArgs {
    /// fat-tree, bcube or mdcube.
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    /// MDCube containers per dimension, comma separated.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    server_cap: Option<u32>,
    #[arg(long)]
    edge_cap: Option<u32>,
}

impl TopologyArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        let pairs = [
            ("topology", self.topology.clone()),
            ("k", self.k.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("dims", self.dims.clone()),
            ("server_cap", self.server_cap.map(|v| v.to_string())),
            ("edge_cap", self.edge_cap.map(|v| v.to_string())),
        ];
        set_all(cfg, &pairs)
    }
}

fn set_all(cfg: &mut ExperimentConfig, pairs: &[(&str, Option<String>)]) -> Result<()> {
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(())
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    topology: TopologyArgs,
    /// random, reqsize, vcesize, wave or peak.
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// e.g. `1,2,3` or `1..=15`.
    #[arg(long)]
    seeds: Option<String>,
    /// `all` or a comma separated subset of greedy, covce, covceload, gvop.
    #[arg(long)]
    algs: Option<String>,
    #[arg(long)]
    fixed_alpha: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CostTableArgs {
    #[command(flatten)]
    topology: TopologyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    experiments: usize,
    #[arg(long, default_value_t = 400)]
    requests: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 30)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_kv_text(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    args.topology.apply(&mut cfg)?;
    let pairs = [
        ("pattern", args.pattern.clone()),
        ("length", args.length.map(|v| v.to_string())),
        ("window", args.window.map(|v| v.to_string())),
        ("seeds", args.seeds.clone()),
        ("algs", args.algs.clone()),
        ("fixed_alpha", args.fixed_alpha.map(|v| v.to_string())),
        ("threads", args.threads.map(|v| v.to_string())),
    ];
    set_all(&mut cfg, &pairs)?;
    for kv in &args.set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.output_dir = Some(args.out);
    let out = run_experiment(&cfg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn build_cost_table(args: CostTableArgs) -> Result<()> {
    let mut cfg = ExperimentConfig {
        topology: Topology::FatTree { k: 4 },
        ..ExperimentConfig::default()
    };
    args.topology.apply(&mut cfg)?;
    let graph = cfg.topology.build(cfg.server_cap, cfg.edge_cap)?;
    let table = build_empirical_cost_table(args.seed, args.experiments, args.requests, &graph)?;
    table.save(&args.out)?;
    println!("wrote {} entries to {}", table.entries().len(), args.out.display());
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let report = run_invariant_suite(args.instances, args.seed)?;
    for f in &report.failures {
        eprintln!("FAIL {f}");
    }
    println!(
        "{} instances, {} oracle checks, {} failures",
        report.instances,
        report.oracle_checks,
        report.failures.len()
    );
    Ok(report.failures.is_empty())
}

fn dump_topology(args: TopologyArgs) -> Result<()> {
    let mut cfg = ExperimentConfig {
        topology: Topology::FatTree { k: 4 },
        ..ExperimentConfig::default()
    };
    args.apply(&mut cfg)?;
    let graph = cfg.topology.build(cfg.server_cap, cfg.edge_cap)?;
    print!("{}", graph.to_edge_list());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a).map(|_| true),
        Command::BuildCostTable(a) => build_cost_table(a).map(|_| true),
        Command::Verify(a) => verify(a),
        Command::DumpTopology(a) => dump_topology(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
