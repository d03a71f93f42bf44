use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::periods::{detect_periods, next_period, DetectOptions, PeriodScheme};
use crate::error::{invalid, Error, Result};
use crate::fluid::{FluidPath, Period};
use crate::graph::InterferenceGraph;
use crate::stats::{wilson, Interval, Z95};
use crate::stochastic::{scaled_trace, JumpChain, NodeDynamics, SimOptions, SystemState};

/// Minimum number of M1 exits behind a frequency report.
pub const MIN_EXITS: usize = 500;

/// Mergeable counts of detected period transitions.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExitCounts {
    pub to: BTreeMap<Period, usize>,
    /// Runs whose transition could not be detected with enough confidence.
    pub discarded: usize,
}

impl ExitCounts {
    pub fn record(&mut self, p: Option<Period>) {
        match p {
            Some(p) => *self.to.entry(p).or_default() += 1,
            None => self.discarded += 1,
        }
    }

    pub fn merge(mut self, other: ExitCounts) -> ExitCounts {
        for (p, c) in other.to {
            *self.to.entry(p).or_default() += c;
        }
        self.discarded += other.discarded;
        self
    }

    pub fn total(&self) -> usize {
        self.to.values().sum()
    }

    pub fn count(&self, p: Period) -> usize {
        self.to.get(&p).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExitFrequency {
    pub period: Period,
    pub count: usize,
    pub frequency: f64,
    pub ci: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExitFrequencies {
    pub exits: usize,
    pub discarded: usize,
    pub rows: Vec<ExitFrequency>,
}

impl ExitFrequencies {
    pub fn frequency(&self, p: Period) -> f64 {
        self.rows.iter().find(|r| r.period == p).map_or(0.0, |r| r.frequency)
    }
}

/// Exits recorded by the fluid engine at the end of every M1-period.
pub fn path_m1_exits(paths: &[FluidPath]) -> ExitCounts {
    let mut counts = ExitCounts::default();
    for s in paths.iter().flat_map(|p| &p.segments).filter(|s| s.period == Period::M1) {
        if let Some(d) = &s.switch {
            counts.record(Some(d.outcome));
        }
    }
    counts
}

/// Frequencies over M2, M3, M4 with Wilson intervals.
pub fn m1_exit_frequencies(counts: &ExitCounts) -> Result<ExitFrequencies> {
    let exits = counts.total();
    if exits < MIN_EXITS {
        return Err(Error::Insufficient { what: "M1 exits", needed: MIN_EXITS, got: exits });
    }
    let rows = [Period::M2, Period::M3, Period::M4]
        .into_iter()
        .map(|p| {
            let c = counts.count(p);
            ExitFrequency { period: p, count: c, frequency: c as f64 / exits as f64, ci: wilson(c, exits, Z95) }
        })
        .collect();
    Ok(ExitFrequencies { exits, discarded: counts.discarded, rows })
}

/// Settings for pre-limit transition experiments on the broken diamond.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionRun {
    /// Fluid-scaled time simulated beyond the expected end of the first period.
    pub tail: f64,
    /// Samples recorded per run.
    pub samples: u64,
    /// Detected intervals shorter than this (scaled time) are ignored.
    pub min_duration: f64,
    pub min_confidence: f64,
}

impl Default for TransitionRun {
    fn default() -> Self {
        Self { tail: 0.25, samples: 4000, min_duration: 0.02, min_confidence: 0.3 }
    }
}

/// Runs the jump chain from `X = R·q0` with `active` holding the medium and
/// reports the first period detected after the leading `from` period.
#[allow(clippy::too_many_arguments)]
pub fn prelimit_transition(
    chain: &JumpChain,
    q0: &[f64],
    active: &[usize],
    from: Period,
    first_duration: f64,
    r: f64,
    seed: u64,
    run: &TransitionRun,
) -> Result<Option<Period>> {
    let x0: Vec<u64> = q0.iter().map(|q| (q * r).round() as u64).collect();
    let state = SystemState::new(x0).with_active(chain.graph(), active)?;
    let horizon = ((first_duration + run.tail) * r * chain.beta()).ceil() as u64;
    let stride = (horizon / run.samples.max(1)).max(1);
    let trace = chain.simulate(state, horizon, seed, &SimOptions { stride: Some(stride), event_window: None })?;
    let samples = scaled_trace(&trace, r);
    let lambdas: Vec<f64> = chain.params().iter().map(|p| p.lambda).collect();
    let mus: Vec<f64> = chain.params().iter().map(|p| p.mu).collect();
    let intervals =
        detect_periods(&samples, &lambdas, &mus, &PeriodScheme::broken_diamond(), &DetectOptions::default());
    Ok(next_period(&intervals, from, run.min_duration, run.min_confidence).map(|(p, _)| p))
}

/// Pre-limit M1 exits: `runs` replications started in an M1-period with
/// nodes 1 and 2 active and `X = R·q0`. Replication `j` uses seed `seed + j`.
pub fn prelimit_m1_exits(
    params: &[NodeDynamics],
    q0: &[f64],
    r: f64,
    runs: usize,
    seed: u64,
    run: &TransitionRun,
) -> Result<ExitCounts> {
    let g = InterferenceGraph::broken_diamond();
    let chain = JumpChain::new(&g, params)?;
    check_broken_diamond_start(params, q0)?;
    let d = (q0[0] / (1.0 - params[0].lambda)).max(q0[1] / (1.0 - params[1].lambda));
    (0..runs)
        .into_par_iter()
        .map(|j| prelimit_transition(&chain, q0, &[0, 1], Period::M1, d, r, seed + j as u64, run))
        .try_fold(ExitCounts::default, |mut acc, p| {
            acc.record(p?);
            Ok(acc)
        })
        .try_reduce(ExitCounts::default, |a, b| Ok(a.merge(b)))
}

fn check_broken_diamond_start(params: &[NodeDynamics], q0: &[f64]) -> Result<()> {
    if params.len() != 6 || q0.len() != 6 {
        return Err(invalid("params", "the broken diamond has six nodes"));
    }
    if q0.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
        return Err(invalid("q0", "must be finite and nonnegative"));
    }
    Ok(())
}

/// The exit side used by [`estimate_pq`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PqSide {
    /// Start in M2; `p̄ = P(M1 next)`, `q̄ = P(M3 next)`.
    M2,
    /// Start in M3; `p̄ = P(M1 next)`, `q̄ = P(M2 next)`.
    M3,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PqRung {
    pub r: f64,
    pub to_m1: usize,
    pub to_other: usize,
    pub discarded: usize,
    pub p_bar: f64,
    pub ci: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PqEstimate {
    pub side: PqSide,
    pub rungs: Vec<PqRung>,
    pub p_bar: f64,
    pub q_bar: f64,
    /// Interval for `p̄`; the one for `q̄` is its mirror.
    pub ci: Interval,
}

/// Natural start configuration for M2 runs: `(0, 0, 0.3, 0.1, 0.05, 0.15)`;
/// mirrored for M3.
pub fn pq_start(side: PqSide) -> [f64; 6] {
    match side {
        PqSide::M2 => [0.0, 0.0, 0.3, 0.1, 0.05, 0.15],
        PqSide::M3 => [0.0, 0.0, 0.15, 0.05, 0.1, 0.3],
    }
}

/// Monte Carlo estimate of the M2 (or M3) exit law on an `R` ladder. Runs
/// start in the period with its schedule active and `X = R·q0`; the next
/// detected period is M1 or the opposite side. The estimate pools the counts
/// of the two largest `R` values, so `p̄ + q̄ = 1` by construction.
pub fn estimate_pq(
    params: &[NodeDynamics],
    side: PqSide,
    q0: &[f64],
    ladder: &[f64],
    reps: usize,
    seed: u64,
    run: &TransitionRun,
) -> Result<PqEstimate> {
    if params.iter().any(|p| !(p.gamma() > 1.0)) {
        return Err(invalid("gamma", "the switch law needs γ > 1"));
    }
    if ladder.is_empty() {
        return Err(invalid("ladder", "needs at least one scale"));
    }
    check_broken_diamond_start(params, q0)?;
    let g = InterferenceGraph::broken_diamond();
    let chain = JumpChain::new(&g, params)?;
    let (from, other, active, lead) = match side {
        PqSide::M2 => (Period::M2, Period::M3, [2, 3], 2),
        PqSide::M3 => (Period::M3, Period::M2, [4, 5], 5),
    };
    let d = q0[lead] / (1.0 - params[lead].lambda);
    let mut rungs = Vec::new();
    for (step, &r) in ladder.iter().enumerate() {
        let base = seed.wrapping_add((step as u64) << 32);
        let counts = (0..reps)
            .into_par_iter()
            .map(|j| prelimit_transition(&chain, q0, &active, from, d, r, base + j as u64, run))
            .try_fold(ExitCounts::default, |mut acc, p| {
                acc.record(p?);
                Ok::<_, Error>(acc)
            })
            .try_reduce(ExitCounts::default, |a, b| Ok(a.merge(b)))?;
        let to_m1 = counts.count(Period::M1);
        let to_other = counts.count(other);
        let misc = counts.total() - to_m1 - to_other;
        let n = to_m1 + to_other;
        rungs.push(PqRung {
            r,
            to_m1,
            to_other,
            discarded: counts.discarded + misc,
            p_bar: if n > 0 { to_m1 as f64 / n as f64 } else { f64::NAN },
            ci: wilson(to_m1, n, Z95),
        });
    }
    let top: Vec<&PqRung> = {
        let mut sorted: Vec<&PqRung> = rungs.iter().collect();
        sorted.sort_by(|a, b| b.r.total_cmp(&a.r));
        sorted.into_iter().take(2).collect()
    };
    let hits: usize = top.iter().map(|r| r.to_m1).sum();
    let n: usize = top.iter().map(|r| r.to_m1 + r.to_other).sum();
    if n == 0 {
        return Err(Error::Insufficient { what: "detected exits", needed: 1, got: 0 });
    }
    let p_bar = hits as f64 / n as f64;
    Ok(PqEstimate { side, rungs, p_bar, q_bar: 1.0 - p_bar, ci: wilson(hits, n, Z95) })
}
