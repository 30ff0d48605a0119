//! Experiment configuration as flat `key = value` text.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::algorithms::AlgorithmKind;
use crate::error::{Result, VceError};
use crate::substrate::{build_bcube, build_fat_tree, build_mdcube, SubstrateGraph, DEFAULT_EDGE_CAP, DEFAULT_SERVER_CAP};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Topology {
    FatTree { k: u32 },
    BCube { n: u32, k: u32 },
    MdCube { dims: Vec<u32>, n: u32, k: u32 },
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::FatTree { .. } => "fat-tree",
            Topology::BCube { .. } => "bcube",
            Topology::MdCube { .. } => "mdcube",
        }
    }

    pub fn build(&self, server_cap: u32, edge_cap: u32) -> Result<SubstrateGraph> {
        match self {
            Topology::FatTree { k } => build_fat_tree(*k, server_cap, edge_cap),
            Topology::BCube { n, k } => build_bcube(*n, *k, server_cap, edge_cap),
            Topology::MdCube { dims, n, k } => build_mdcube(dims, *n, *k, server_cap, edge_cap),
        }
    }
}

/// Benefit pattern settings; `vcesize` resolves its cost table at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternConfig {
    Random { lo: u64, hi: u64 },
    ReqSize,
    VceSize {
        /// Existing table; built from greedy runs when absent.
        cost_table: Option<PathBuf>,
        table_seed: u64,
        table_experiments: usize,
        table_requests: usize,
        scale_max: u64,
    },
    Wave { amplitude: f64, frequency: f64, offset: f64 },
    Peak { period: u32, peak_value: u64, base_value: u64 },
}

impl PatternConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PatternConfig::Random { .. } => "random",
            PatternConfig::ReqSize => "reqsize",
            PatternConfig::VceSize { .. } => "vcesize",
            PatternConfig::Wave { .. } => "wave",
            PatternConfig::Peak { .. } => "peak",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: Topology,
    pub server_cap: u32,
    pub edge_cap: u32,
    pub pattern: PatternConfig,
    pub sequence_length: usize,
    pub window_width: usize,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<AlgorithmKind>,
    pub fixed_alpha: Option<f64>,
    pub output_dir: Option<PathBuf>,
    /// Worker threads for (seed, algorithm) jobs; 0 uses all cores.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: Topology::FatTree { k: 12 },
            server_cap: DEFAULT_SERVER_CAP,
            edge_cap: DEFAULT_EDGE_CAP,
            pattern: PatternConfig::Random { lo: 1, hi: 1000 },
            sequence_length: 6400,
            window_width: 100,
            seeds: vec![1],
            algorithms: AlgorithmKind::ALL.to_vec(),
            fixed_alpha: None,
            output_dir: None,
            threads: 0,
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> VceError {
    VceError::Parse {
        context: format!("config key {key:?}"),
        message: format!("{value:?}: {why}"),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

/// Seeds as `1,2,3`, `1..=5` or a mix.
fn seeds(key: &str, value: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..=") {
            let (a, b): (u64, u64) = (num(key, a.trim())?, num(key, b.trim())?);
            if a > b {
                return Err(bad(key, value, "empty range"));
            }
            out.extend(a..=b);
        } else {
            out.push(num(key, part)?);
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| VceError::Parse {
                context: format!("config line {}", lineno + 1),
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Applies one setting. `k` may come before `topology`; every other
    /// topology or pattern parameter must follow the kind it belongs to.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "topology" => {
                self.topology = match value {
                    "fat-tree" | "fattree" => Topology::FatTree { k: self.topo_k().unwrap_or(12) },
                    "bcube" => Topology::BCube {
                        n: self.topo_n().unwrap_or(4),
                        k: self.topo_k().unwrap_or(1),
                    },
                    "mdcube" => Topology::MdCube {
                        dims: vec![2],
                        n: self.topo_n().unwrap_or(4),
                        k: self.topo_k().unwrap_or(1),
                    },
                    _ => return Err(bad(key, value, "expected fat-tree, bcube or mdcube")),
                }
            }
            "k" => {
                let v = num(key, value)?;
                match &mut self.topology {
                    Topology::FatTree { k } | Topology::BCube { k, .. } | Topology::MdCube { k, .. } => *k = v,
                }
            }
            "n" => match &mut self.topology {
                Topology::BCube { n, .. } | Topology::MdCube { n, .. } => *n = num(key, value)?,
                Topology::FatTree { .. } => return Err(bad(key, value, "fat-tree takes only k")),
            },
            "dims" => match &mut self.topology {
                Topology::MdCube { dims, .. } => *dims = list(key, value)?,
                _ => return Err(bad(key, value, "dims applies to mdcube only")),
            },
            "server_cap" => self.server_cap = num(key, value)?,
            "edge_cap" => self.edge_cap = num(key, value)?,
            "pattern" => {
                self.pattern = match value {
                    "random" => PatternConfig::Random { lo: 1, hi: 1000 },
                    "reqsize" => PatternConfig::ReqSize,
                    "vcesize" => PatternConfig::VceSize {
                        cost_table: None,
                        table_seed: 0,
                        table_experiments: 10,
                        table_requests: 400,
                        scale_max: 1000,
                    },
                    "wave" => PatternConfig::Wave {
                        amplitude: 300.0,
                        frequency: 0.1,
                        offset: 400.0,
                    },
                    "peak" => PatternConfig::Peak {
                        period: 100,
                        peak_value: 1000,
                        base_value: 1,
                    },
                    _ => return Err(bad(key, value, "expected random, reqsize, vcesize, wave or peak")),
                }
            }
            "random_lo" | "random_hi" => match &mut self.pattern {
                PatternConfig::Random { lo, hi } => *(if key == "random_lo" { lo } else { hi }) = num(key, value)?,
                _ => return Err(bad(key, value, "pattern is not random")),
            },
            "wave_amplitude" | "wave_frequency" | "wave_offset" => match &mut self.pattern {
                PatternConfig::Wave {
                    amplitude,
                    frequency,
                    offset,
                } => {
                    let slot = match key {
                        "wave_amplitude" => amplitude,
                        "wave_frequency" => frequency,
                        _ => offset,
                    };
                    *slot = num(key, value)?;
                }
                _ => return Err(bad(key, value, "pattern is not wave")),
            },
            "peak_period" | "peak_value" | "peak_base" => match &mut self.pattern {
                PatternConfig::Peak {
                    period,
                    peak_value,
                    base_value,
                } => match key {
                    "peak_period" => *period = num(key, value)?,
                    "peak_value" => *peak_value = num(key, value)?,
                    _ => *base_value = num(key, value)?,
                },
                _ => return Err(bad(key, value, "pattern is not peak")),
            },
            "cost_table" | "cost_table_seed" | "cost_table_experiments" | "cost_table_requests" | "vcesize_scale" => {
                match &mut self.pattern {
                    PatternConfig::VceSize {
                        cost_table,
                        table_seed,
                        table_experiments,
                        table_requests,
                        scale_max,
                    } => match key {
                        "cost_table" => *cost_table = Some(PathBuf::from(value)),
                        "cost_table_seed" => *table_seed = num(key, value)?,
                        "cost_table_experiments" => *table_experiments = num(key, value)?,
                        "cost_table_requests" => *table_requests = num(key, value)?,
                        _ => *scale_max = num(key, value)?,
                    },
                    _ => return Err(bad(key, value, "pattern is not vcesize")),
                }
            }
            "length" | "sequence_length" => self.sequence_length = num(key, value)?,
            "window" | "window_width" => self.window_width = num(key, value)?,
            "seeds" => self.seeds = seeds(key, value)?,
            "algs" | "algorithms" => {
                self.algorithms = if value == "all" {
                    AlgorithmKind::ALL.to_vec()
                } else {
                    list(key, value)?
                }
            }
            "fixed_alpha" => {
                self.fixed_alpha = match value {
                    "" | "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "out" | "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "threads" => self.threads = num(key, value)?,
            _ => {
                return Err(VceError::Parse {
                    context: "config".into(),
                    message: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    fn topo_k(&self) -> Option<u32> {
        match &self.topology {
            Topology::FatTree { k } | Topology::BCube { k, .. } | Topology::MdCube { k, .. } => Some(*k),
        }
    }

    fn topo_n(&self) -> Option<u32> {
        match &self.topology {
            Topology::BCube { n, .. } | Topology::MdCube { n, .. } => Some(*n),
            Topology::FatTree { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(VceError::InvalidConfig(m.into()));
        if self.seeds.is_empty() {
            return err("at least one seed is required");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return err("seeds must be distinct");
        }
        if self.sequence_length == 0 {
            return err("sequence length must be >= 1");
        }
        if self.window_width == 0 {
            return err("window width must be >= 1");
        }
        if self.algorithms.is_empty() {
            return err("at least one algorithm is required");
        }
        let mut algs = self.algorithms.clone();
        algs.sort_unstable();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return err("algorithms must be distinct");
        }
        if let Some(a) = self.fixed_alpha {
            if !(a.is_finite() && a > 0.0) {
                return err("fixed_alpha must be positive");
            }
        }
        if self.output_dir.is_none() {
            return err("an output directory is required");
        }
        match &self.pattern {
            PatternConfig::Random { lo, hi } if *lo < 1 || lo > hi => return err("random_lo must be in 1..=random_hi"),
            PatternConfig::VceSize {
                table_experiments,
                table_requests,
                scale_max,
                cost_table,
                ..
            } if cost_table.is_none() && (*table_experiments == 0 || *table_requests == 0) || *scale_max == 0 => {
                return err("vcesize needs a cost table or positive table-building sizes")
            }
            _ => {}
        }
        // Builds the substrate once to surface topology errors before any work.
        self.topology.build(self.server_cap, self.edge_cap)?;
        Ok(())
    }

    /// Canonical `key = value` dump. The output directory is left out so
    /// identical experiments in different places produce identical bytes.
    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let join = |xs: &[u32]| xs.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        kv("topology", self.topology.name().into());
        match &self.topology {
            Topology::FatTree { k } => kv("k", k.to_string()),
            Topology::BCube { n, k } => {
                kv("n", n.to_string());
                kv("k", k.to_string());
            }
            Topology::MdCube { dims, n, k } => {
                kv("n", n.to_string());
                kv("k", k.to_string());
                kv("dims", join(dims));
            }
        }
        kv("server_cap", self.server_cap.to_string());
        kv("edge_cap", self.edge_cap.to_string());
        kv("pattern", self.pattern.name().into());
        match &self.pattern {
            PatternConfig::Random { lo, hi } => {
                kv("random_lo", lo.to_string());
                kv("random_hi", hi.to_string());
            }
            PatternConfig::ReqSize => {}
            PatternConfig::VceSize {
                cost_table,
                table_seed,
                table_experiments,
                table_requests,
                scale_max,
            } => {
                if let Some(p) = cost_table {
                    kv("cost_table", p.display().to_string());
                }
                kv("cost_table_seed", table_seed.to_string());
                kv("cost_table_experiments", table_experiments.to_string());
                kv("cost_table_requests", table_requests.to_string());
                kv("vcesize_scale", scale_max.to_string());
            }
            PatternConfig::Wave {
                amplitude,
                frequency,
                offset,
            } => {
                kv("wave_amplitude", amplitude.to_string());
                kv("wave_frequency", frequency.to_string());
                kv("wave_offset", offset.to_string());
            }
            PatternConfig::Peak {
                period,
                peak_value,
                base_value,
            } => {
                kv("peak_period", period.to_string());
                kv("peak_value", peak_value.to_string());
                kv("peak_base", base_value.to_string());
            }
        }
        kv("length", self.sequence_length.to_string());
        kv("window", self.window_width.to_string());
        kv(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        kv(
            "algs",
            self.algorithms.iter().map(|a| a.name()).collect::<Vec<_>>().join(","),
        );
        kv(
            "fixed_alpha",
            self.fixed_alpha.map_or_else(|| "none".into(), |a| a.to_string()),
        );
        kv("threads", self.threads.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_text() {
        let cfg = ExperimentConfig::from_kv_text(
            "# desk run\ntopology = fat-tree\nk = 4\npattern = wave\nwave_amplitude = 100 # smaller\n\
             length = 400\nseeds = 1..=3, 7\nalgs = greedy,gvop\nout = /tmp/x\n",
        )
        .unwrap();
        assert_eq!(cfg.topology, Topology::FatTree { k: 4 });
        assert_eq!(
            cfg.pattern,
            PatternConfig::Wave {
                amplitude: 100.0,
                frequency: 0.1,
                offset: 400.0
            }
        );
        assert_eq!(cfg.seeds, vec![1, 2, 3, 7]);
        assert_eq!(cfg.algorithms, vec![AlgorithmKind::Greedy, AlgorithmKind::Gvop]);
        cfg.validate().unwrap();
    }

    #[test]
    fn full_scale_is_expressible() {
        let cfg = ExperimentConfig::from_kv_text(
            "topology = fat-tree\nk = 12\npattern = random\nlength = 6400\nseeds = 1..=15\nalgs = all\nout = /tmp/p\n",
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seeds.len(), 15);
        let g = cfg.topology.build(cfg.server_cap, cfg.edge_cap).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (612, 1296));
    }

    #[test]
    fn k_before_topology_is_kept() {
        let cfg = ExperimentConfig::from_kv_text("k = 2\ntopology = bcube\nn = 3\n").unwrap();
        assert_eq!(cfg.topology, Topology::BCube { n: 3, k: 2 });
    }

    #[test]
    fn round_trips_through_text() {
        let mut cfg = ExperimentConfig::from_kv_text(
            "topology = mdcube\nn = 2\nk = 1\ndims = 2,2\npattern = vcesize\ncost_table_requests = 50\nfixed_alpha = 500\n",
        )
        .unwrap();
        let again = ExperimentConfig::from_kv_text(&cfg.to_kv_text()).unwrap();
        assert_eq!(again, cfg);
        cfg.output_dir = Some("/somewhere".into());
        assert!(!cfg.to_kv_text().contains("somewhere"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_kv_text("nonsense\n").is_err());
        assert!(ExperimentConfig::from_kv_text("colour = red\n").is_err());
        assert!(ExperimentConfig::from_kv_text("k = four\n").is_err());
        assert!(ExperimentConfig::from_kv_text("wave_offset = 3\n").is_err());
        assert!(ExperimentConfig::from_kv_text("algs = greedy,bogus\n").is_err());

        let ok = |extra: &str| {
            ExperimentConfig::from_kv_text(&format!("k = 4\nout = /tmp/x\n{extra}"))
                .unwrap()
                .validate()
        };
        assert!(ok("").is_ok());
        assert!(ok("seeds = \n").is_err());
        assert!(ok("seeds = 1,1\n").is_err());
        assert!(ok("length = 0\n").is_err());
        assert!(ok("window = 0\n").is_err());
        assert!(ok("k = 3\n").is_err());
        assert!(ok("fixed_alpha = -1\n").is_err());
        assert!(ExperimentConfig::from_kv_text("k = 4\n").unwrap().validate().is_err());
    }
}
