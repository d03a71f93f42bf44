//! Exact pre-limit dynamics, simulated as the jump chain of the uniformized
//! continuous-time Markov process.
//!
//! Every tick draws one uniform variate and maps it to exactly one event:
//! an arrival at node `i` (mass `λ_i/β`), an activation, a departure that
//! keeps the medium, a departure that releases it, or a dummy event. Each node
//! owns a slot of width `max(μ_i, ν_i)` so that `β = Σλ + Σ max(μ, ν)`, which
//! reduces to `Σλ + N` for unit rates.

mod backoff;
mod occupancy;
mod oracle;
mod trace;

pub use backoff::{backoff_bound, backoff_monte_carlo, BackoffEstimate, TAIL_TERMS};
pub use occupancy::{activity_occupancy, Occupancy};
pub use oracle::{empirical_queue_law, single_node_stationary};
pub use trace::{interpolate, scaled_trace, ActivityEvent, ActivityKind, ScaledSample, Trace};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::InterferenceGraph;

/// Probability of starting a transmission when a back-off ends, `φ(x)` for
/// `x ≥ 1`. `φ(0) = 0` always.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Constant { value: f64 },
}

/// Probability `ψ(x)` of releasing the medium after a transmission that
/// started with `x` packets queued.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Release {
    /// `ψ(x) = (1 + x)^{-γ}`; `γ = ∞` gives random capture.
    Power { gamma: f64 },
    /// `ψ ≡ 1`: release after every packet.
    Always,
    /// Random capture: hold the medium until the queue is empty.
    Capture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDynamics {
    pub lambda: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "unit_activation")]
    pub activation: Activation,
    pub release: Release,
    /// Sets `ψ(1) = 1`. A departure that empties the queue always releases the
    /// medium, so this does not change the sampled dynamics; it only changes
    /// what [`NodeDynamics::psi`] reports at `x = 1`.
    #[serde(default)]
    pub force_release_at_one: bool,
}

fn one() -> f64 {
    1.0
}

fn unit_activation() -> Activation {
    Activation::Constant { value: 1.0 }
}

impl NodeDynamics {
    /// Unit service and back-off rates, `φ ≡ 1`, `ψ(x) = (1+x)^{-γ}`.
    pub fn new(lambda: f64, gamma: f64) -> Self {
        let release = if gamma.is_infinite() { Release::Capture } else { Release::Power { gamma } };
        Self {
            lambda,
            mu: 1.0,
            nu: 1.0,
            activation: unit_activation(),
            release,
            force_release_at_one: false,
        }
    }

    pub fn with_release(mut self, release: Release) -> Self {
        self.release = release;
        self
    }

    /// Back-off exponent; `∞` for random capture and `0` for `ψ ≡ 1`.
    pub fn gamma(&self) -> f64 {
        match self.release {
            Release::Power { gamma } => gamma,
            Release::Always => 0.0,
            Release::Capture => f64::INFINITY,
        }
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn phi(&self, x: u64) -> f64 {
        match (x, self.activation) {
            (0, _) => 0.0,
            (_, Activation::Constant { value }) => value,
        }
    }

    pub fn psi(&self, x: u64) -> f64 {
        if x <= 1 && self.force_release_at_one {
            return 1.0;
        }
        match self.release {
            Release::Power { gamma } => (1.0 + x as f64).powf(-gamma),
            Release::Always => 1.0,
            Release::Capture => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.lambda) {
            return Err(invalid("lambda", format!("must be finite and nonnegative, got {}", self.lambda)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(invalid("mu", format!("must be finite and positive, got {}", self.mu)));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(invalid("nu", format!("must be finite and positive, got {}", self.nu)));
        }
        let Activation::Constant { value } = self.activation;
        if !(0.0..=1.0).contains(&value) {
            return Err(invalid("activation", format!("φ must lie in [0, 1], got {value}")));
        }
        if let Release::Power { gamma } = self.release {
            if !(gamma > 0.0) {
                return Err(invalid("gamma", format!("must be positive, got {gamma}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemState {
    /// Activity vector as a bit mask.
    pub u: u64,
    pub x: Vec<u64>,
    /// Cumulative number of ticks each node has been active.
    pub i: Vec<u64>,
    pub tick: u64,
}

impl SystemState {
    pub fn new(x0: Vec<u64>) -> Self {
        let n = x0.len();
        Self { u: 0, x: x0, i: vec![0; n], tick: 0 }
    }

    /// Marks the given nodes active. They must form an independent set and
    /// have nonempty queues.
    pub fn with_active(mut self, g: &InterferenceGraph, active: &[usize]) -> Result<Self> {
        let mask = active.iter().fold(0u64, |m, &i| m | 1 << i);
        if !g.is_independent(mask) {
            return Err(invalid("active", "initial activity is not an independent set"));
        }
        if let Some(&i) = active.iter().find(|&&i| self.x[i] == 0) {
            return Err(invalid("active", format!("node {} is active with an empty queue", i + 1)));
        }
        self.u = mask;
        Ok(self)
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.u >> i & 1 == 1
    }

    pub fn activity(&self) -> Vec<u8> {
        (0..self.x.len()).map(|i| (self.u >> i & 1) as u8).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Arrival(usize),
    Activation(usize),
    DepartureContinue(usize),
    DepartureRelease(usize),
    Dummy,
}

/// A validated network: graph, per-node dynamics and the uniformization layout.
#[derive(Clone, Debug)]
pub struct JumpChain {
    graph: InterferenceGraph,
    params: Vec<NodeDynamics>,
    /// `blocking[i]` = neighbours of `i` plus `i` itself.
    blocking: Vec<u64>,
    arrival_cum: Vec<f64>,
    total_arrival: f64,
    slot_start: Vec<f64>,
    unit_slots: bool,
    beta: f64,
}

impl JumpChain {
    pub fn new(graph: &InterferenceGraph, params: &[NodeDynamics]) -> Result<Self> {
        if params.len() != graph.n() {
            return Err(invalid(
                "params",
                format!("{} node dynamics supplied for {} nodes", params.len(), graph.n()),
            ));
        }
        for p in params {
            p.validate()?;
        }
        let mut arrival_cum = Vec::with_capacity(params.len());
        let mut acc = 0.0;
        for p in params {
            acc += p.lambda;
            arrival_cum.push(acc);
        }
        let total_arrival = acc;
        let mut slot_start = Vec::with_capacity(params.len());
        let mut s = 0.0;
        for p in params {
            slot_start.push(s);
            s += p.mu.max(p.nu);
        }
        let unit_slots = params.iter().all(|p| p.mu.max(p.nu) == 1.0);
        let blocking = (0..graph.n()).map(|i| graph.neighbor_mask(i) | 1 << i).collect();
        Ok(Self {
            graph: graph.clone(),
            params: params.to_vec(),
            blocking,
            arrival_cum,
            total_arrival,
            slot_start,
            unit_slots,
            beta: total_arrival + s,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn graph(&self) -> &InterferenceGraph {
        &self.graph
    }

    pub fn params(&self) -> &[NodeDynamics] {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.len()
    }

    pub fn check_state(&self, s: &SystemState) -> Result<()> {
        if s.x.len() != self.n() || s.i.len() != self.n() {
            return Err(invalid("x0", format!("expected {} queue entries", self.n())));
        }
        if !self.graph.is_independent(s.u) {
            return Err(invalid("state", "activity is not an independent set"));
        }
        if (0..self.n()).any(|i| s.is_active(i) && s.x[i] == 0) {
            return Err(invalid("state", "active node with an empty queue"));
        }
        Ok(())
    }

    /// Advances the state by one uniformized tick.
    pub fn step<R: Rng + ?Sized>(&self, s: &mut SystemState, rng: &mut R) -> EventKind {
        let v = rng.random::<f64>() * self.beta;
        let event = self.event_at(s, v);
        match event {
            EventKind::Arrival(i) => s.x[i] += 1,
            EventKind::Activation(i) => s.u |= 1 << i,
            EventKind::DepartureContinue(i) => s.x[i] -= 1,
            EventKind::DepartureRelease(i) => {
                s.x[i] -= 1;
                s.u &= !(1 << i);
            }
            EventKind::Dummy => {}
        }
        s.tick += 1;
        let mut u = s.u;
        while u != 0 {
            let i = u.trailing_zeros() as usize;
            s.i[i] += 1;
            u &= u - 1;
        }
        event
    }

    /// Maps a point `v ∈ [0, β)` to the event it selects in state `s`.
    fn event_at(&self, s: &SystemState, v: f64) -> EventKind {
        if v < self.total_arrival {
            let i = self.arrival_cum.partition_point(|&c| c <= v).min(self.n() - 1);
            return EventKind::Arrival(i);
        }
        let w = v - self.total_arrival;
        let i = if self.unit_slots {
            (w as usize).min(self.n() - 1)
        } else {
            self.slot_start.partition_point(|&c| c <= w).saturating_sub(1)
        };
        let r = w - self.slot_start[i];
        let p = &self.params[i];
        if s.u >> i & 1 == 1 {
            if r >= p.mu {
                return EventKind::Dummy;
            }
            let x = s.x[i];
            if x == 1 || r < p.mu * p.psi(x) {
                EventKind::DepartureRelease(i)
            } else {
                EventKind::DepartureContinue(i)
            }
        } else if s.u & self.blocking[i] == 0 && r < p.nu * p.phi(s.x[i]) {
            EventKind::Activation(i)
        } else {
            EventKind::Dummy
        }
    }

    /// Runs `horizon` ticks from `initial`, recording a [`Trace`].
    pub fn simulate(
        &self,
        initial: SystemState,
        horizon: u64,
        seed: u64,
        options: &SimOptions,
    ) -> Result<Trace> {
        self.check_state(&initial)?;
        let max_x = initial.x.iter().copied().max().unwrap_or(0);
        if max_x.checked_add(horizon).is_none_or(|v| v > i64::MAX as u64) {
            return Err(Error::QueueOverflow);
        }
        let stride = options.stride.unwrap_or_else(|| default_stride(horizon)).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = initial;
        let mut trace = Trace::new(self.n(), self.beta, seed, stride, horizon);
        trace.push(&state);
        for _ in 0..horizon {
            let prev_u = state.u;
            let event = self.step(&mut state, &mut rng);
            if let Some((from, to)) = options.event_window {
                if (from..to).contains(&state.tick) && prev_u != state.u {
                    trace.log_event(state.tick, event);
                }
            }
            if state.tick.is_multiple_of(stride) {
                trace.push(&state);
            }
        }
        if !state.tick.is_multiple_of(stride) {
            trace.push(&state);
        }
        trace.final_state = state;
        Ok(trace)
    }
}

/// Default recording stride: about `10^5` samples per run.
pub fn default_stride(horizon: u64) -> u64 {
    horizon.div_ceil(100_000).max(1)
}

#[derive(Clone, Debug, Default)]
pub struct SimOptions {
    /// Ticks between recorded samples; `None` uses [`default_stride`].
    pub stride: Option<u64>,
    /// Tick range `[from, to)` in which activations and releases are logged.
    pub event_window: Option<(u64, u64)>,
}

/// Convenience wrapper: validates the configuration and runs one replication.
pub fn simulate(
    g: &InterferenceGraph,
    params: &[NodeDynamics],
    x0: &[u64],
    horizon: u64,
    seed: u64,
) -> Result<Trace> {
    let chain = JumpChain::new(g, params)?;
    chain.simulate(SystemState::new(x0.to_vec()), horizon, seed, &SimOptions::default())
}
