use serde::Serialize;

use super::periods::{LabeledInterval, PeriodScheme};
use crate::fluid::Period;
use crate::stats::{linear_fit, quantile_sorted};
use crate::stochastic::{ScaledSample, Trace};

/// Least-squares slope of the node-average queue against ticks.
pub fn node_average_slope(trace: &Trace) -> f64 {
    let t: Vec<f64> = trace.ticks().iter().map(|&t| t as f64).collect();
    let avg: Vec<f64> = (0..trace.len()).map(|k| trace.node_average(k)).collect();
    linear_fit(&t, &avg).slope
}

fn average_at(samples: &[ScaledSample], t: f64) -> f64 {
    let k = samples.partition_point(|s| s.t < t).min(samples.len() - 1);
    samples[k].q.iter().sum::<f64>() / samples[k].q.len() as f64
}

/// For every interval labelled `label` with duration `d` and end `b`, the
/// change of the scaled node-average queue over `[b, b + d]`.
pub fn post_period_increments(samples: &[ScaledSample], intervals: &[LabeledInterval], label: Period) -> Vec<f64> {
    if samples.is_empty() {
        return Vec::new();
    }
    let end = samples[samples.len() - 1].t;
    intervals
        .iter()
        .filter(|iv| iv.label == Some(label) && iv.t_end + iv.duration() <= end)
        .map(|iv| average_at(samples, iv.t_end + iv.duration()) - average_at(samples, iv.t_end))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SawtoothSummary {
    pub cycles: usize,
    pub median_ratio: f64,
    pub ratios: Vec<f64>,
}

/// Per-node cycles between consecutive starts of the node's service (runs of
/// intervals whose schedule contains the node); each cycle reports
/// `max X_i / max(min X_i, 1)` in packets, with `X = R·Q`.
pub fn sawtooth_ratios(
    samples: &[ScaledSample],
    intervals: &[LabeledInterval],
    scheme: &PeriodScheme,
    r: f64,
) -> SawtoothSummary {
    let n = samples.first().map_or(0, |s| s.q.len());
    let mut ratios = Vec::new();
    for node in 0..n {
        let serving: Vec<bool> = intervals
            .iter()
            .map(|iv| {
                iv.label
                    .and_then(|l| scheme.labels.iter().find(|(p, _)| *p == l))
                    .is_some_and(|(_, members)| members.contains(&node))
            })
            .collect();
        let starts: Vec<f64> = (0..intervals.len())
            .filter(|&j| serving[j] && (j == 0 || !serving[j - 1]))
            .map(|j| intervals[j].t_start)
            .collect();
        for w in starts.windows(2) {
            let a = samples.partition_point(|s| s.t < w[0]);
            let b = samples.partition_point(|s| s.t < w[1]);
            if b <= a {
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for s in &samples[a..b] {
                let x = s.q[node] * r;
                lo = lo.min(x);
                hi = hi.max(x);
            }
            ratios.push(hi / lo.max(1.0));
        }
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median_ratio = if sorted.is_empty() { f64::NAN } else { quantile_sorted(&sorted, 0.5) };
    SawtoothSummary { cycles: ratios.len(), median_ratio, ratios }
}
