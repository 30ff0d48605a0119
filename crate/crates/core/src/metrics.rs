//! Evaluation series: capacity violation, relative profit and windowed
//! acceptance ratios.
//!
//! Zero-capacity resources (switch nodes) never enter a ratio or a count.

use std::fmt::Write as _;

use crate::error::{Result, VceError};
use crate::substrate::SubstrateGraph;

/// `max(1, max load/cap)` over capacitated nodes and edges.
pub fn violation(node_loads: &[u64], edge_loads: &[u64], graph: &SubstrateGraph) -> f64 {
    let edges = graph
        .edges()
        .iter()
        .map(|e| edge_loads[e.id.index()] as f64 / e.cap as f64);
    let nodes = graph
        .servers()
        .map(|n| node_loads[n.id.index()] as f64 / n.cap as f64);
    edges.chain(nodes).fold(1.0, f64::max)
}

/// `max(1, mean edge load/cap + mean server load/cap)`.
///
/// The two means are added, so a network loaded exactly to capacity scores 2.
pub fn avg_violation(node_loads: &[u64], edge_loads: &[u64], graph: &SubstrateGraph) -> f64 {
    let edge_mean = graph
        .edges()
        .iter()
        .map(|e| edge_loads[e.id.index()] as f64 / e.cap as f64)
        .sum::<f64>()
        / graph.edge_count().max(1) as f64;
    let servers = graph.server_count().max(1) as f64;
    let node_mean = graph
        .servers()
        .map(|n| node_loads[n.id.index()] as f64 / n.cap as f64)
        .sum::<f64>()
        / servers;
    (edge_mean + node_mean).max(1.0)
}

pub fn relative_profit(cum_profit: f64, violation: f64) -> f64 {
    cum_profit / violation
}

pub fn avg_relative_profit(cum_profit: f64, avg_violation: f64) -> f64 {
    cum_profit / avg_violation
}

/// Fraction of accepted requests per block of `width`; a trailing partial
/// block is divided by its own size.
pub fn acceptance_ratio_windows(accepted: &[bool], width: usize) -> Result<Vec<f64>> {
    if width == 0 {
        return Err(VceError::InvalidConfig("window width must be >= 1".into()));
    }
    Ok(accepted
        .chunks(width)
        .map(|w| w.iter().filter(|&&a| a).count() as f64 / w.len() as f64)
        .collect())
}

/// Per-request series for one run (or the mean of several).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsSeries {
    pub cum_profit: Vec<f64>,
    pub violation: Vec<f64>,
    pub avg_violation: Vec<f64>,
    pub relative_profit: Vec<f64>,
    pub avg_relative_profit: Vec<f64>,
    pub acceptance_ratio: Vec<f64>,
}

impl MetricsSeries {
    pub fn len(&self) -> usize {
        self.cum_profit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum_profit.is_empty()
    }

    pub fn final_violation(&self) -> f64 {
        self.violation.last().copied().unwrap_or(1.0)
    }

    pub fn metrics_csv(&self, algorithm: &str) -> String {
        let mut out = String::from("index,algorithm,cum_profit,violation,avg_violation,relative_profit,avg_relative_profit\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{algorithm},{},{},{},{},{}",
                i + 1,
                self.cum_profit[i],
                self.violation[i],
                self.avg_violation[i],
                self.relative_profit[i],
                self.avg_relative_profit[i]
            );
        }
        out
    }

    pub fn windows_csv(&self, algorithm: &str) -> String {
        let mut out = String::from("window_index,algorithm,acceptance_ratio\n");
        for (w, r) in self.acceptance_ratio.iter().enumerate() {
            let _ = writeln!(out, "{},{algorithm},{r}", w + 1);
        }
        out
    }
}

/// Accumulates a [`MetricsSeries`] one request at a time.
#[derive(Debug, Clone)]
pub struct MetricsRecorder {
    series: MetricsSeries,
    accepted: Vec<bool>,
    window_width: usize,
}

impl MetricsRecorder {
    pub fn new(window_width: usize) -> Result<Self> {
        if window_width == 0 {
            return Err(VceError::InvalidConfig("window width must be >= 1".into()));
        }
        Ok(MetricsRecorder {
            series: MetricsSeries::default(),
            accepted: Vec::new(),
            window_width,
        })
    }

    /// Records the state right after request `i` was decided.
    pub fn observe(&mut self, accepted: bool, cum_profit: u64, node_loads: &[u64], edge_loads: &[u64], graph: &SubstrateGraph) {
        let v = violation(node_loads, edge_loads, graph);
        let av = avg_violation(node_loads, edge_loads, graph);
        let p = cum_profit as f64;
        let s = &mut self.series;
        s.cum_profit.push(p);
        s.violation.push(v);
        s.avg_violation.push(av);
        s.relative_profit.push(relative_profit(p, v));
        s.avg_relative_profit.push(avg_relative_profit(p, av));
        self.accepted.push(accepted);
    }

    pub fn finish(mut self) -> MetricsSeries {
        self.series.acceptance_ratio =
            acceptance_ratio_windows(&self.accepted, self.window_width).expect("width checked in new");
        self.series
    }
}

/// Pointwise mean of equally long series.
pub fn average_across_runs(runs: &[MetricsSeries]) -> Result<MetricsSeries> {
    let first = runs
        .first()
        .ok_or_else(|| VceError::InvalidConfig("no runs to average".into()))?;
    for r in runs {
        if r.len() != first.len() {
            return Err(VceError::LengthMismatch {
                expected: first.len(),
                found: r.len(),
            });
        }
        if r.acceptance_ratio.len() != first.acceptance_ratio.len() {
            return Err(VceError::LengthMismatch {
                expected: first.acceptance_ratio.len(),
                found: r.acceptance_ratio.len(),
            });
        }
    }
    let k = runs.len() as f64;
    let mean = |pick: fn(&MetricsSeries) -> &Vec<f64>| -> Vec<f64> {
        (0..pick(first).len())
            .map(|i| runs.iter().map(|r| pick(r)[i]).sum::<f64>() / k)
            .collect()
    };
    Ok(MetricsSeries {
        cum_profit: mean(|s| &s.cum_profit),
        violation: mean(|s| &s.violation),
        avg_violation: mean(|s| &s.avg_violation),
        relative_profit: mean(|s| &s.relative_profit),
        avg_relative_profit: mean(|s| &s.avg_relative_profit),
        acceptance_ratio: mean(|s| &s.acceptance_ratio),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::{NodeKind, SubstrateGraph};

    fn graph() -> SubstrateGraph {
        SubstrateGraph::from_parts(
            &[(NodeKind::Server, 20), (NodeKind::Switch, 0), (NodeKind::Server, 20)],
            &[(0, 1, 20), (1, 2, 20)],
        )
        .unwrap()
    }

    #[test]
    fn violation_cases() {
        let g = graph();
        assert_eq!(violation(&[0, 0, 0], &[0, 0], &g), 1.0);
        assert_eq!(violation(&[0, 0, 0], &[30, 0], &g), 1.5);
        assert_eq!(violation(&[10, 0, 0], &[0, 0], &g), 1.0);
    }

    #[test]
    fn avg_violation_cases() {
        let g = graph();
        assert_eq!(avg_violation(&[0, 0, 0], &[0, 0], &g), 1.0);
        assert_eq!(avg_violation(&[20, 0, 20], &[20, 20], &g), 2.0);
        // edges 0.5 mean + servers 0.25 mean < 1.
        assert_eq!(avg_violation(&[10, 0, 0], &[20, 0], &g), 1.0);
    }

    #[test]
    fn relative_profit_cases() {
        assert_eq!(relative_profit(0.0, 1.0), 0.0);
        assert_eq!(relative_profit(10.0, 1.0), 10.0);
        assert_eq!(relative_profit(10.0, 2.0), 5.0);
        assert_eq!(avg_relative_profit(9.0, 1.5), 6.0);
    }

    #[test]
    fn windows() {
        assert_eq!(acceptance_ratio_windows(&[true; 250], 100).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(acceptance_ratio_windows(&vec![false; 6400], 100).unwrap().len(), 64);
        let alt: Vec<bool> = (0..300).map(|i| i % 2 == 0).collect();
        assert_eq!(acceptance_ratio_windows(&alt, 100).unwrap(), vec![0.5; 3]);
        assert_eq!(acceptance_ratio_windows(&[true, false, false], 2).unwrap(), vec![0.5, 0.0]);
        assert!(acceptance_ratio_windows(&[true], 0).is_err());
    }

    fn constant(v: f64, n: usize) -> MetricsSeries {
        MetricsSeries {
            cum_profit: vec![v; n],
            violation: vec![v; n],
            avg_violation: vec![v; n],
            relative_profit: vec![v; n],
            avg_relative_profit: vec![v; n],
            acceptance_ratio: vec![v; 2],
        }
    }

    #[test]
    fn averaging() {
        let one = constant(1.0, 5);
        assert_eq!(average_across_runs(std::slice::from_ref(&one)).unwrap(), one);
        assert_eq!(average_across_runs(&[constant(1.0, 5), constant(3.0, 5)]).unwrap(), constant(2.0, 5));
        let odd = MetricsSeries {
            cum_profit: vec![0.1, 0.7, 1e6 + 0.3],
            violation: vec![1.0, 1.3, 1.9],
            avg_violation: vec![1.0; 3],
            relative_profit: vec![0.1, 0.7 / 1.3, (1e6 + 0.3) / 1.9],
            avg_relative_profit: vec![0.2; 3],
            acceptance_ratio: vec![0.37],
        };
        let avg = average_across_runs(&vec![odd.clone(); 7]).unwrap();
        for (a, b) in avg.cum_profit.iter().zip(&odd.cum_profit) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert!(matches!(
            average_across_runs(&[constant(1.0, 5), constant(1.0, 4)]),
            Err(VceError::LengthMismatch { .. })
        ));
        assert!(average_across_runs(&[]).is_err());
    }

    #[test]
    fn recorder_series() {
        let g = graph();
        let mut rec = MetricsRecorder::new(2).unwrap();
        rec.observe(true, 10, &[0, 0, 0], &[0, 0], &g);
        rec.observe(true, 30, &[0, 0, 0], &[40, 0], &g);
        rec.observe(false, 30, &[0, 0, 0], &[40, 0], &g);
        let s = rec.finish();
        assert_eq!(s.relative_profit, vec![10.0, 15.0, 15.0]);
        assert_eq!(s.acceptance_ratio, vec![1.0, 0.0]);
        assert!(s.relative_profit.iter().zip(&s.cum_profit).all(|(r, p)| r <= p));
        let csv = s.metrics_csv("covce");
        assert!(csv.lines().nth(2).unwrap().starts_with("2,covce,30,2,"));
        assert_eq!(s.windows_csv("covce"), "window_index,algorithm,acceptance_ratio\n1,covce,1\n2,covce,0\n");
    }
}
