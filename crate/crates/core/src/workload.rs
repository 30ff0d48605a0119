//! Seeded request sequences and benefit patterns.
//!
//! Sequences come from a ChaCha8 stream seeded with `seed_from_u64`, so the
//! same `(seed, length, pattern, caps)` replays byte-identically on every
//! platform. Per request the stream is consumed in the order
//! `n_vms, bandwidth, compute[, benefit]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algorithms::{AlgorithmKind, Decision, OnlineRun};
use crate::error::{Result, VceError};
use crate::substrate::SubstrateGraph;

pub const MIN_VMS: u32 = 3;
pub const MAX_VMS: u32 = 14;
const BANDWIDTH_FRACTION: (f64, f64) = (0.2, 0.6);
const COMPUTE_FRACTION: (f64, f64) = (0.2, 1.0);

/// One virtual cluster demand: `n_vms` VMs of `compute` units each, linked
/// to a logical switch with `bandwidth` units per link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VcRequest {
    /// 1-based position in the sequence.
    pub index: u32,
    pub n_vms: u32,
    pub bandwidth: u32,
    pub compute: u32,
    pub benefit: u64,
}

impl VcRequest {
    pub fn new(index: u32, n_vms: u32, bandwidth: u32, compute: u32, benefit: u64) -> Self {
        VcRequest {
            index,
            n_vms,
            bandwidth,
            compute,
            benefit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vms == 0 || self.bandwidth == 0 || self.compute == 0 || self.benefit == 0 {
            return Err(VceError::InvalidRequest(format!(
                "request {} has a zero field: {:?}",
                self.index, self
            )));
        }
        Ok(())
    }

    pub fn triple(&self) -> (u32, u32, u32) {
        (self.n_vms, self.bandwidth, self.compute)
    }
}

/// Half-up rounding to the nearest integer.
#[inline]
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Per-request demand ranges derived from the substrate capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestDomain {
    pub node_cap: u32,
    pub edge_cap: u32,
}

impl Default for RequestDomain {
    fn default() -> Self {
        RequestDomain {
            node_cap: crate::substrate::DEFAULT_SERVER_CAP,
            edge_cap: crate::substrate::DEFAULT_EDGE_CAP,
        }
    }
}

impl RequestDomain {
    fn scaled(frac: f64, cap: u32) -> u32 {
        round_half_up(frac * cap as f64).max(1) as u32
    }

    pub fn vm_range(&self) -> (u32, u32) {
        (MIN_VMS, MAX_VMS)
    }

    pub fn bandwidth_range(&self) -> (u32, u32) {
        (
            Self::scaled(BANDWIDTH_FRACTION.0, self.edge_cap),
            Self::scaled(BANDWIDTH_FRACTION.1, self.edge_cap),
        )
    }

    pub fn compute_range(&self) -> (u32, u32) {
        (
            Self::scaled(COMPUTE_FRACTION.0, self.node_cap),
            Self::scaled(COMPUTE_FRACTION.1, self.node_cap),
        )
    }

    /// Every `(n_vms, bandwidth, compute)` triple the generator can emit.
    pub fn triples(&self) -> impl Iterator<Item = (u32, u32, u32)> {
        let (n0, n1) = self.vm_range();
        let (b0, b1) = self.bandwidth_range();
        let (c0, c1) = self.compute_range();
        (n0..=n1).flat_map(move |n| (b0..=b1).flat_map(move |b| (c0..=c1).map(move |c| (n, b, c))))
    }
}

/// Averaged edge-bandwidth consumption per request triple, measured by
/// running the greedy embedder.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCostTable {
    entries: BTreeMap<(u32, u32, u32), CostEntry>,
    fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEntry {
    pub phi: f64,
    pub samples: u64,
}

impl EmpiricalCostTable {
    pub fn new(entries: BTreeMap<(u32, u32, u32), CostEntry>) -> Self {
        EmpiricalCostTable {
            entries,
            fallback: true,
        }
    }

    pub fn with_fallback(mut self, enabled: bool) -> Self {
        self.fallback = enabled;
        self
    }

    pub fn entries(&self) -> &BTreeMap<(u32, u32, u32), CostEntry> {
        &self.entries
    }

    pub fn get(&self, triple: (u32, u32, u32)) -> Option<CostEntry> {
        self.entries.get(&triple).copied()
    }

    /// `φ` for a triple. Unobserved triples take the value of the nearest
    /// observed triple under L1 distance, ties going to the smaller triple.
    pub fn phi(&self, triple: (u32, u32, u32)) -> Result<f64> {
        if let Some(e) = self.entries.get(&triple) {
            return Ok(e.phi);
        }
        let missing = || VceError::MissingCostEntry(triple.0, triple.1, triple.2);
        if !self.fallback {
            return Err(missing());
        }
        let dist = |t: &(u32, u32, u32)| {
            t.0.abs_diff(triple.0) + t.1.abs_diff(triple.1) + t.2.abs_diff(triple.2)
        };
        // BTreeMap iterates in ascending triple order, so min_by_key keeps the smallest on ties.
        self.entries
            .iter()
            .min_by_key(|(t, _)| dist(t))
            .map(|(_, e)| e.phi)
            .ok_or_else(missing)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_vms,bandwidth,compute,phi,samples\n");
        for (&(n, b, c), e) in &self.entries {
            let _ = writeln!(out, "{n},{b},{c},{},{}", e.phi, e.samples);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some("n_vms,bandwidth,compute,phi,samples") => {}
            other => {
                return Err(VceError::parse(
                    "cost table header",
                    format!("unexpected header {other:?}"),
                ))
            }
        }
        let mut entries = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ctx = format!("cost table line {}", i + 2);
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(VceError::parse(ctx, "expected 5 columns"));
            }
            let int = |s: &str| s.parse::<u32>().map_err(|e| VceError::parse(&ctx, e.to_string()));
            let phi: f64 = f[3].parse().map_err(|_| VceError::parse(&ctx, "bad phi"))?;
            let samples: u64 = f[4].parse().map_err(|_| VceError::parse(&ctx, "bad samples"))?;
            if !(phi >= 0.0 && phi.is_finite()) {
                return Err(VceError::parse(ctx, "phi must be finite and >= 0"));
            }
            entries.insert((int(f[0])?, int(f[1])?, int(f[2])?), CostEntry { phi, samples });
        }
        Ok(EmpiricalCostTable::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VceError::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| VceError::io(path, e))
    }
}

/// Benefit model derived from the expected embedding footprint of a request.
#[derive(Debug, Clone)]
pub struct VceSizeModel {
    table: Arc<EmpiricalCostTable>,
    server_cap_total: f64,
    edge_cap_total: f64,
    scale_max: u64,
    raw_min: f64,
    raw_max: f64,
}

impl VceSizeModel {
    /// Fixes the affine scaling from raw values to `[1, scale_max]` over
    /// every triple in `domain`.
    pub fn new(
        table: Arc<EmpiricalCostTable>,
        graph: &SubstrateGraph,
        domain: RequestDomain,
        scale_max: u64,
    ) -> Result<Self> {
        if scale_max == 0 {
            return Err(VceError::InvalidConfig("vcesize scale must be >= 1".into()));
        }
        let mut model = VceSizeModel {
            table,
            server_cap_total: graph.total_server_cap() as f64,
            edge_cap_total: graph.total_edge_cap() as f64,
            scale_max,
            raw_min: f64::INFINITY,
            raw_max: f64::NEG_INFINITY,
        };
        for t in domain.triples() {
            let raw = model.raw(t)?;
            model.raw_min = model.raw_min.min(raw);
            model.raw_max = model.raw_max.max(raw);
        }
        Ok(model)
    }

    pub fn table(&self) -> &EmpiricalCostTable {
        &self.table
    }

    /// Unscaled value: node share squared, weighted by the edge/node
    /// capacity ratio, plus the squared edge share of `φ`.
    pub fn raw(&self, (n, b, c): (u32, u32, u32)) -> Result<f64> {
        let phi = self.table.phi((n, b, c))?;
        let v = self.server_cap_total;
        let e = self.edge_cap_total;
        let node_share = (n as f64 * c as f64) / v;
        let edge_share = phi / e;
        Ok((e / v) * node_share * node_share + edge_share * edge_share)
    }

    pub fn scale(&self, raw: f64) -> u64 {
        let span = self.raw_max - self.raw_min;
        if span.is_nan() || span <= 0.0 {
            return 1;
        }
        let t = ((raw - self.raw_min) / span).clamp(0.0, 1.0);
        (1 + round_half_up(t * (self.scale_max - 1) as f64)) as u64
    }
}

#[derive(Debug, Clone)]
pub enum BenefitPattern {
    Random { lo: u64, hi: u64 },
    ReqSize,
    VceSize(VceSizeModel),
    Wave { amplitude: f64, frequency: f64, offset: f64 },
    Peak { period: u32, peak_value: u64, base_value: u64 },
}

impl BenefitPattern {
    pub fn random() -> Self {
        BenefitPattern::Random { lo: 1, hi: 1000 }
    }

    pub fn wave() -> Self {
        BenefitPattern::Wave {
            amplitude: 300.0,
            frequency: 0.1,
            offset: 400.0,
        }
    }

    pub fn peak(peak_value: u64) -> Self {
        BenefitPattern::Peak {
            period: 100,
            peak_value,
            base_value: 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BenefitPattern::Random { .. } => "random",
            BenefitPattern::ReqSize => "reqsize",
            BenefitPattern::VceSize(_) => "vcesize",
            BenefitPattern::Wave { .. } => "wave",
            BenefitPattern::Peak { .. } => "peak",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VceError::InvalidConfig(m));
        match *self {
            BenefitPattern::Random { lo, hi } if lo < 1 || lo > hi => {
                bad(format!("random benefit interval [{lo}, {hi}] invalid"))
            }
            BenefitPattern::Wave {
                amplitude,
                frequency,
                offset,
            } if !(amplitude.is_finite() && frequency.is_finite() && offset.is_finite())
                || round_half_up(offset - amplitude.abs()) < 1 =>
            {
                bad(format!("wave offset {offset} minus amplitude {amplitude} must stay >= 1"))
            }
            BenefitPattern::Peak {
                period,
                peak_value,
                base_value,
            } if period == 0 || peak_value == 0 || base_value == 0 => {
                bad("peak period and values must be >= 1".into())
            }
            _ => Ok(()),
        }
    }
}

pub fn benefit_random<R: Rng + ?Sized>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    rng.gen_range(lo..=hi)
}

/// `n · (bandwidth + compute)`.
pub fn benefit_reqsize(n_vms: u32, bandwidth: u32, compute: u32) -> u64 {
    n_vms as u64 * (bandwidth as u64 + compute as u64)
}

pub fn benefit_wave(index: u32, amplitude: f64, frequency: f64, offset: f64) -> u64 {
    round_half_up(amplitude * (frequency * index as f64).sin() + offset).max(1) as u64
}

/// Peaks land on indexes `1, 1 + period, 1 + 2·period, ...`.
pub fn benefit_peak(index: u32, period: u32, peak_value: u64, base_value: u64) -> u64 {
    if period <= 1 || index % period == 1 {
        peak_value
    } else {
        base_value
    }
}

pub fn benefit_vcesize(request: &VcRequest, model: &VceSizeModel) -> Result<u64> {
    Ok(model.scale(model.raw(request.triple())?))
}

pub fn generate_sequence(
    seed: u64,
    length: usize,
    pattern: &BenefitPattern,
    domain: RequestDomain,
) -> Result<Vec<VcRequest>> {
    if length == 0 {
        return Err(VceError::InvalidConfig("sequence length must be >= 1".into()));
    }
    pattern.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n0, n1) = domain.vm_range();
    let edge_cap = domain.edge_cap as f64;
    let node_cap = domain.node_cap as f64;

    let mut out = Vec::with_capacity(length);
    for i in 1..=length as u32 {
        let n_vms = rng.gen_range(n0..=n1);
        let bw = rng.gen_range(BANDWIDTH_FRACTION.0..=BANDWIDTH_FRACTION.1) * edge_cap;
        let cu = rng.gen_range(COMPUTE_FRACTION.0..=COMPUTE_FRACTION.1) * node_cap;
        let bandwidth = round_half_up(bw).max(1) as u32;
        let compute = round_half_up(cu).max(1) as u32;
        let mut req = VcRequest::new(i, n_vms, bandwidth, compute, 1);
        req.benefit = match pattern {
            BenefitPattern::Random { lo, hi } => benefit_random(&mut rng, *lo, *hi),
            BenefitPattern::ReqSize => benefit_reqsize(n_vms, bandwidth, compute),
            BenefitPattern::VceSize(model) => benefit_vcesize(&req, model)?,
            BenefitPattern::Wave {
                amplitude,
                frequency,
                offset,
            } => benefit_wave(i, *amplitude, *frequency, *offset),
            BenefitPattern::Peak {
                period,
                peak_value,
                base_value,
            } => benefit_peak(i, *period, *peak_value, *base_value),
        };
        out.push(req);
    }
    Ok(out)
}

/// Runs greedy embedding over `num_experiments` seeded sequences and
/// averages, per triple, the total edge bandwidth of each valid embedding.
/// Experiment `e` uses sequence seed `seed + e`.
pub fn build_empirical_cost_table(
    seed: u64,
    num_experiments: usize,
    requests_per_experiment: usize,
    graph: &SubstrateGraph,
) -> Result<EmpiricalCostTable> {
    let domain = RequestDomain {
        node_cap: graph.max_server_cap(),
        edge_cap: graph.max_edge_cap(),
    };
    type Samples = Vec<((u32, u32, u32), u64)>;
    let per_experiment: Vec<Samples> = (0..num_experiments)
        .into_par_iter()
        .map(|e| -> Result<_> {
            let seq = generate_sequence(
                seed.wrapping_add(e as u64),
                requests_per_experiment,
                &BenefitPattern::random(),
                domain,
            )?;
            let mut run = OnlineRun::new(AlgorithmKind::Greedy, graph);
            let mut samples = Vec::new();
            for req in &seq {
                if let Decision::Accepted(m) = run.process(req)?.decision {
                    samples.push((req.triple(), m.total_edge_load()));
                }
            }
            Ok(samples)
        })
        .collect::<Result<_>>()?;

    let mut sums: BTreeMap<(u32, u32, u32), (u64, u64)> = BTreeMap::new();
    for (triple, load) in per_experiment.into_iter().flatten() {
        let slot = sums.entry(triple).or_default();
        slot.0 += load;
        slot.1 += 1;
    }
    let entries = sums
        .into_iter()
        .map(|(t, (sum, n))| {
            (
                t,
                CostEntry {
                    phi: sum as f64 / n as f64,
                    samples: n,
                },
            )
        })
        .collect();
    Ok(EmpiricalCostTable::new(entries))
}

pub fn sequence_to_csv(requests: &[VcRequest]) -> String {
    let mut out = String::from("index,n_vms,bandwidth,compute,benefit\n");
    for r in requests {
        let _ = writeln!(out, "{},{},{},{},{}", r.index, r.n_vms, r.bandwidth, r.compute, r.benefit);
    }
    out
}

pub fn sequence_from_csv(text: &str) -> Result<Vec<VcRequest>> {
    let mut lines = text.lines();
    if lines.next() != Some("index,n_vms,bandwidth,compute,benefit") {
        return Err(VceError::parse("sequence header", "unexpected header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let ctx = format!("sequence line {}", i + 2);
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(VceError::parse(ctx, "expected 5 columns"));
            }
            let p = |s: &str| s.parse::<u64>().map_err(|e| VceError::parse(&ctx, e.to_string()));
            let req = VcRequest::new(p(f[0])? as u32, p(f[1])? as u32, p(f[2])? as u32, p(f[3])? as u32, p(f[4])?);
            req.validate()?;
            Ok(req)
        })
        .collect()
}
