use serde::Serialize;

use super::{EventKind, SystemState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ActivityKind {
    Activation,
    Release,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ActivityEvent {
    pub tick: u64,
    pub node: usize,
    pub kind: ActivityKind,
}

/// Sampled jump-chain trajectory. Samples are stored flat: sample `k` owns
/// `x[k·n .. (k+1)·n]` and `i[k·n .. (k+1)·n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub n: usize,
    pub beta: f64,
    pub seed: u64,
    pub stride: u64,
    pub horizon: u64,
    ticks: Vec<u64>,
    x: Vec<u64>,
    u: Vec<u64>,
    i: Vec<u64>,
    pub events: Vec<ActivityEvent>,
    pub final_state: SystemState,
}

impl Trace {
    pub(crate) fn new(n: usize, beta: f64, seed: u64, stride: u64, horizon: u64) -> Self {
        Self {
            n,
            beta,
            seed,
            stride,
            horizon,
            ticks: Vec::new(),
            x: Vec::new(),
            u: Vec::new(),
            i: Vec::new(),
            events: Vec::new(),
            final_state: SystemState::new(vec![0; n]),
        }
    }

    pub(crate) fn push(&mut self, s: &SystemState) {
        self.ticks.push(s.tick);
        self.x.extend_from_slice(&s.x);
        self.u.push(s.u);
        self.i.extend_from_slice(&s.i);
    }

    pub(crate) fn log_event(&mut self, tick: u64, event: EventKind) {
        let (node, kind) = match event {
            EventKind::Activation(i) => (i, ActivityKind::Activation),
            EventKind::DepartureRelease(i) => (i, ActivityKind::Release),
            _ => return,
        };
        self.events.push(ActivityEvent { tick, node, kind });
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn tick(&self, k: usize) -> u64 {
        self.ticks[k]
    }

    pub fn ticks(&self) -> &[u64] {
        &self.ticks
    }

    pub fn x(&self, k: usize) -> &[u64] {
        &self.x[k * self.n..(k + 1) * self.n]
    }

    pub fn u(&self, k: usize) -> u64 {
        self.u[k]
    }

    pub fn cumulative(&self, k: usize) -> &[u64] {
        &self.i[k * self.n..(k + 1) * self.n]
    }

    /// Node-average queue length of sample `k`.
    pub fn node_average(&self, k: usize) -> f64 {
        self.x(k).iter().sum::<u64>() as f64 / self.n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaledSample {
    pub t: f64,
    pub q: Vec<f64>,
    pub i: Vec<f64>,
}

/// Fluid-scaled samples: `t = tick/(Rβ)`, `Q = X/R`, `I = I/R`.
pub fn scaled_trace(trace: &Trace, r: f64) -> Vec<ScaledSample> {
    let time_scale = r * trace.beta;
    (0..trace.len())
        .map(|k| ScaledSample {
            t: trace.tick(k) as f64 / time_scale,
            q: trace.x(k).iter().map(|&v| v as f64 / r).collect(),
            i: trace.cumulative(k).iter().map(|&v| v as f64 / r).collect(),
        })
        .collect()
}

/// Linear interpolation of a scaled path at time `t` (clamped to its range).
pub fn interpolate(samples: &[ScaledSample], t: f64) -> ScaledSample {
    let k = samples.partition_point(|s| s.t <= t);
    if k == 0 {
        return samples[0].clone();
    }
    if k == samples.len() {
        return samples[k - 1].clone();
    }
    let (a, b) = (&samples[k - 1], &samples[k]);
    let w = (t - a.t) / (b.t - a.t);
    let lerp = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + w * (q - p)).collect();
    ScaledSample { t, q: lerp(&a.q, &b.q), i: lerp(&a.i, &b.i) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::InterferenceGraph;
    use crate::stochastic::{simulate, NodeDynamics};

    #[test]
    fn unit_scale_only_rescales_time() {
        let g = InterferenceGraph::new(2).unwrap();
        let t = simulate(&g, &vec![NodeDynamics::new(0.2, 2.0); 2], &[3, 4], 1000, 5).unwrap();
        let s = scaled_trace(&t, 1.0);
        for (k, sample) in s.iter().enumerate() {
            assert_eq!(sample.t, t.tick(k) as f64 / t.beta);
            assert_eq!(sample.q, t.x(k).iter().map(|&v| v as f64).collect::<Vec<_>>());
        }
    }

    #[test]
    fn interpolation_is_linear_between_samples() {
        let s = vec![
            ScaledSample { t: 0.0, q: vec![0.0], i: vec![0.0] },
            ScaledSample { t: 2.0, q: vec![4.0], i: vec![1.0] },
        ];
        let m = interpolate(&s, 0.5);
        assert_eq!(m.q, vec![1.0]);
        assert_eq!(m.i, vec![0.25]);
        assert_eq!(interpolate(&s, 9.0).q, vec![4.0]);
    }
}
