use serde::Serialize;

use crate::error::Result;
use crate::fluid::{FluidPath, Period, Topology};
use crate::graph::{maximal_schedules, InterferenceGraph};
use crate::stats::linear_fit;
use crate::stochastic::ScaledSample;

/// A maximal interval with one period label, or an unlabeled gap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabeledInterval {
    pub label: Option<Period>,
    pub t_start: f64,
    pub t_end: f64,
    /// Mean window confidence in `[0, 1]`; exact labels carry 1.
    pub confidence: f64,
    /// Regression windows merged into the interval (1 for exact labels).
    pub windows: usize,
}

impl LabeledInterval {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Period labels and the schedule each one stands for.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodScheme {
    pub labels: Vec<(Period, Vec<usize>)>,
}

impl PeriodScheme {
    /// `M1 = {1,2}`, `M2 = {3,4}`, `M3 = {5,6}`, `M4 = {4,5}`.
    pub fn broken_diamond() -> Self {
        Self {
            labels: vec![
                (Period::M1, vec![0, 1]),
                (Period::M2, vec![2, 3]),
                (Period::M3, vec![4, 5]),
                (Period::M4, vec![3, 4]),
            ],
        }
    }

    pub fn from_components(components: &[Vec<usize>]) -> Self {
        Self {
            labels: components
                .iter()
                .enumerate()
                .map(|(k, c)| (Period(k as u8 + 1), c.clone()))
                .collect(),
        }
    }

    /// Maximal schedules of `g` in canonical order.
    pub fn from_graph(g: &InterferenceGraph) -> Result<Self> {
        let labels = maximal_schedules(g)?
            .into_iter()
            .enumerate()
            .map(|(k, s)| (Period(k as u8 + 1), s.members()))
            .collect();
        Ok(Self { labels })
    }

    /// Label matching a set of full-rate nodes. A label matches when one of
    /// its exclusive members is served, or, lacking exclusive members, when
    /// all of its members are. Zero or several matches give `None`.
    pub fn classify(&self, served: &[bool]) -> Option<Period> {
        let mut hit = None;
        for (k, (label, members)) in self.labels.iter().enumerate() {
            let exclusive: Vec<usize> = members
                .iter()
                .copied()
                .filter(|i| self.labels.iter().enumerate().all(|(j, (_, m))| j == k || !m.contains(i)))
                .collect();
            let matched = if exclusive.is_empty() {
                members.iter().all(|&i| served[i])
            } else {
                exclusive.iter().any(|&i| served[i])
            };
            if matched {
                if hit.is_some() {
                    return None;
                }
                hit = Some(*label);
            }
        }
        hit
    }
}

/// Exact labels of a fluid path: one interval per segment.
pub fn path_periods(path: &FluidPath) -> Vec<LabeledInterval> {
    path.segments
        .iter()
        .map(|s| LabeledInterval { label: Some(s.period), t_start: s.t_start, t_end: s.t_end, confidence: 1.0, windows: 1 })
        .collect()
}

/// Scheme matching a fluid path's topology.
pub fn path_scheme(path: &FluidPath) -> PeriodScheme {
    match &path.topology {
        Topology::Partite { components } => PeriodScheme::from_components(components),
        Topology::BrokenDiamond => PeriodScheme::broken_diamond(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[derive(Default)]
pub struct DetectOptions {
    /// Samples per regression window; `None` uses `max(50, 1%)` of the trace.
    pub window: Option<usize>,
}


/// Labels a fluid-scaled pre-limit trace by regressing each queue over
/// consecutive windows. A node counts as served at full rate when its slope
/// is below `−(μ_i − λ_i)/2`. Windows with no single matching label become
/// unlabeled gaps; adjacent windows with equal labels are merged.
pub fn detect_periods(
    samples: &[ScaledSample],
    lambdas: &[f64],
    mus: &[f64],
    scheme: &PeriodScheme,
    options: &DetectOptions,
) -> Vec<LabeledInterval> {
    let n = lambdas.len();
    let w = options.window.unwrap_or_else(|| 50.max(samples.len() / 100)).max(2);
    let mut out: Vec<LabeledInterval> = Vec::new();
    let mut start = 0;
    while start + 1 < samples.len() {
        let end = (start + w).min(samples.len() - 1);
        let block = &samples[start..=end];
        let t: Vec<f64> = block.iter().map(|s| s.t).collect();
        let mut served = vec![false; n];
        let mut confidence: f64 = 1.0;
        for i in 0..n {
            let q: Vec<f64> = block.iter().map(|s| s.q[i]).collect();
            let slope = linear_fit(&t, &q).slope;
            let half = 0.5 * (mus[i] - lambdas[i]);
            served[i] = slope < -half;
            confidence = confidence.min(((slope + half).abs() / half).min(1.0));
        }
        let label = scheme.classify(&served);
        let interval =
            LabeledInterval { label, t_start: block[0].t, t_end: block[block.len() - 1].t, confidence, windows: 1 };
        match out.last_mut() {
            Some(last) if last.label == interval.label => {
                last.t_end = interval.t_end;
                let w = last.windows as f64;
                last.confidence = (last.confidence * w + confidence) / (w + 1.0);
                last.windows += 1;
            }
            _ => out.push(interval),
        }
        start = end;
    }
    out
}

/// First labeled interval after the leading run of `from`, skipping gaps and
/// intervals shorter than `min_duration` or below `min_confidence`.
/// Returns `None` if the leading interval is not `from` or nothing follows.
pub fn next_period(
    intervals: &[LabeledInterval],
    from: Period,
    min_duration: f64,
    min_confidence: f64,
) -> Option<(Period, f64)> {
    let first = intervals.iter().position(|iv| iv.label.is_some())?;
    if intervals[first].label != Some(from) {
        return None;
    }
    intervals[first + 1..]
        .iter()
        .filter(|iv| iv.duration() >= min_duration && iv.confidence >= min_confidence)
        .find_map(|iv| match iv.label {
            Some(p) if p != from => Some((p, iv.confidence)),
            _ => None,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{simulate_broken_diamond, BrokenDiamondOptions};

    fn samples_from_path(path: &FluidPath, dt: f64) -> Vec<ScaledSample> {
        let steps = (path.end_time() / dt) as usize;
        (0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                ScaledSample { t, q: path.q_at(t), i: vec![0.0; path.n()] }
            })
            .collect()
    }

    #[test]
    fn scheme_classification() {
        let s = PeriodScheme::broken_diamond();
        let mark = |idx: &[usize]| {
            let mut v = vec![false; 6];
            idx.iter().for_each(|&i| v[i] = true);
            v
        };
        assert_eq!(s.classify(&mark(&[0])), Some(Period::M1));
        assert_eq!(s.classify(&mark(&[2, 3])), Some(Period::M2));
        assert_eq!(s.classify(&mark(&[3, 4])), Some(Period::M4));
        assert_eq!(s.classify(&mark(&[3])), None);
        assert_eq!(s.classify(&mark(&[0, 2])), None);
    }

    #[test]
    fn fluid_labels_round_trip() {
        let lam = [0.3, 0.3, 0.3, 0.25, 0.15, 0.2];
        let p = simulate_broken_diamond(&lam, &[0.2, 0.1, 0.5, 0.2, 0.1, 0.4], 30.0, 3, &Default::default())
            .unwrap();
        let labels = path_periods(&p);
        assert_eq!(labels.len(), p.segments.len());
        for (iv, s) in labels.iter().zip(&p.segments) {
            assert_eq!(iv.label, Some(s.period));
        }
    }

    #[test]
    fn regression_recovers_long_fluid_periods() {
        let lam = [0.3, 0.3, 0.3, 0.25, 0.15, 0.2];
        let opts = BrokenDiamondOptions::default();
        let p = simulate_broken_diamond(&lam, &[0.2, 0.1, 0.5, 0.2, 0.1, 0.4], 10.0, 3, &opts).unwrap();
        let samples = samples_from_path(&p, 1e-3);
        let found = detect_periods(&samples, &lam, &[1.0; 6], &PeriodScheme::broken_diamond(), &DetectOptions {
            window: Some(20),
        });
        for seg in p.segments.iter().filter(|s| s.duration() > 0.2) {
            let mid = 0.5 * (seg.t_start + seg.t_end);
            let iv = found.iter().find(|iv| iv.t_start <= mid && mid <= iv.t_end).unwrap();
            assert_eq!(iv.label, Some(seg.period), "at t = {mid}");
        }
        let exit = next_period(&found, Period::M1, 0.05, 0.5).unwrap();
        let want = p.segments[1..].iter().find(|s| s.duration() > 0.05).unwrap().period;
        assert!(p.segments[1].duration() > 0.2, "{:?}", p.periods());
        assert_eq!(exit.0, want);
    }

    #[test]
    fn next_period_requires_leading_label() {
        let iv = |label, a, b| LabeledInterval { label, t_start: a, t_end: b, confidence: 1.0, windows: 1 };
        let list = vec![iv(None, 0.0, 0.1), iv(Some(Period::M2), 0.1, 1.0), iv(Some(Period::M1), 1.0, 2.0)];
        assert_eq!(next_period(&list, Period::M1, 0.0, 0.0), None);
        assert_eq!(next_period(&list, Period::M2, 0.0, 0.0), Some((Period::M1, 1.0)));
    }
}
