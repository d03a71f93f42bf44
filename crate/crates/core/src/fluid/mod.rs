//! Random piecewise-linear fluid paths.
//!
//! During a period every queue is affine: served nodes drain at
//! `−(μ_i − λ_i)` until they hit zero, the rest fill at `+λ_i`. A path is a
//! list of such segments; the random part is the choice of the next period.

mod broken_diamond;
mod partite;

pub use broken_diamond::{is_natural, natural_entry_bound, simulate_broken_diamond, BrokenDiamondOptions};
pub use partite::{simulate_partite, PartiteOptions};

use std::fmt;

use serde::{Deserialize, Serialize};

/// Relative tolerance (times `max Q`) for the natural-state predicate.
pub const TAU_NAT: f64 = 1e-12;
/// Relative tolerance (times `max Q`) for the M4 exit tie.
pub const TAU_TIE: f64 = 1e-12;

/// Period label `M_k`, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Period(pub u8);

impl Period {
    pub const M1: Period = Period(1);
    pub const M2: Period = Period(2);
    pub const M3: Period = Period(3);
    pub const M4: Period = Period(4);

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchDecision {
    /// Candidate next periods with the probabilities used for the draw.
    pub probs: Vec<(Period, f64)>,
    pub outcome: Period,
    /// Set when the draw resolved an exact tie whose law is not determined at
    /// fluid scale.
    pub tie: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub period: Period,
    pub q_start: Vec<f64>,
    pub q_end: Vec<f64>,
    pub slope: Vec<f64>,
    /// Nodes served during the segment.
    pub served: Vec<usize>,
    pub switch: Option<SwitchDecision>,
}

impl FluidSegment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Queue vector at `t ∈ [t_start, t_end]`.
    pub fn q_at(&self, t: f64) -> Vec<f64> {
        let dt = t - self.t_start;
        self.q_start.iter().zip(&self.slope).map(|(q, s)| (q + s * dt).max(0.0)).collect()
    }

    /// Times inside the segment where some `Q_i` reaches zero.
    pub fn zero_hits(&self) -> Vec<f64> {
        self.q_start
            .iter()
            .zip(&self.slope)
            .filter(|(q, s)| **s < 0.0 && **q > 0.0)
            .map(|(q, s)| self.t_start + q / -s)
            .filter(|&t| t < self.t_end)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Partite { components: Vec<Vec<usize>> },
    BrokenDiamond,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    Drained,
    /// The caller's segment budget ran out.
    Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidPath {
    pub topology: Topology,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub segments: Vec<FluidSegment>,
    pub termination: Termination,
}

impl FluidPath {
    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn start_time(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.t_start)
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    pub fn final_q(&self) -> &[f64] {
        &self.segments.last().expect("paths have at least one segment").q_end
    }

    /// Components used by the Lyapunov function: the partite components, or
    /// `{1,2}, {3,4}, {5,6}` for the broken diamond.
    pub fn lyapunov_components(&self) -> Vec<Vec<usize>> {
        match &self.topology {
            Topology::Partite { components } => components.clone(),
            Topology::BrokenDiamond => vec![vec![0, 1], vec![2, 3], vec![4, 5]],
        }
    }

    pub fn q_at(&self, t: f64) -> Vec<f64> {
        let k = self.segments.partition_point(|s| s.t_end < t).min(self.segments.len() - 1);
        let s = &self.segments[k];
        s.q_at(t.clamp(s.t_start, s.t_end))
    }

    pub fn lyapunov_at(&self, t: f64) -> f64 {
        lyapunov(&self.q_at(t), &self.lyapunov_components(), &self.mus)
    }

    /// Minimum of `L` over a segment. `L` is piecewise affine inside a
    /// segment, so its minimum sits at an endpoint, a zero hit, or a time
    /// where two queues of one component cross.
    pub fn segment_min_lyapunov(&self, seg: &FluidSegment) -> f64 {
        let comps = self.lyapunov_components();
        let mut times = vec![seg.t_start, seg.t_end];
        times.extend(seg.zero_hits());
        for c in &comps {
            for (a, &i) in c.iter().enumerate() {
                for &j in &c[a + 1..] {
                    let ds = seg.slope[i] / self.mus[i] - seg.slope[j] / self.mus[j];
                    if ds != 0.0 {
                        let dq = seg.q_start[i] / self.mus[i] - seg.q_start[j] / self.mus[j];
                        let t = seg.t_start - dq / ds;
                        if t > seg.t_start && t < seg.t_end {
                            times.push(t);
                        }
                    }
                }
            }
        }
        times
            .into_iter()
            .map(|t| lyapunov(&seg.q_at(t), &comps, &self.mus))
            .fold(f64::INFINITY, f64::min)
    }

    /// Period sequence with start and end times.
    pub fn periods(&self) -> Vec<(Period, f64, f64)> {
        self.segments.iter().map(|s| (s.period, s.t_start, s.t_end)).collect()
    }
}

/// `L(Q) = Σ_k max_{i ∈ M_k} Q_i/μ_i`.
pub fn lyapunov(q: &[f64], components: &[Vec<usize>], mus: &[f64]) -> f64 {
    components
        .iter()
        .map(|c| c.iter().map(|&i| q[i] / mus[i]).fold(0.0, f64::max))
        .sum()
}

pub(crate) fn affine_end(q: &[f64], slope: &[f64], dt: f64) -> Vec<f64> {
    q.iter().zip(slope).map(|(q, s)| (q + s * dt).max(0.0)).collect()
}
