use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::stats::{mean, wilson, Interval, Z95};

/// Number of explicitly summed tail terms before the integral remainder.
pub const TAIL_TERMS: u64 = 1_000_000;

/// `Σ_{m ≥ start} m^{-γ}`: explicit terms, then an Euler–Maclaurin remainder.
fn zeta_tail(start: u64, gamma: f64) -> f64 {
    let end = start + TAIL_TERMS;
    let mut sum = 0.0;
    // Smallest terms first.
    for m in (start..end).rev() {
        sum += (m as f64).powf(-gamma);
    }
    let e = end as f64;
    let remainder = e.powf(1.0 - gamma) / (gamma - 1.0)
        + 0.5 * e.powf(-gamma)
        + gamma / 12.0 * e.powf(-gamma - 1.0);
    sum + remainder
}

/// Upper bound on the probability that a node holding the medium backs off
/// before its queue falls below `x_t`:
/// `ε = (1/(1−λ))·Σ_{r ≥ x_t} (1+r)^{-γ}`.
pub fn backoff_bound(lambda: f64, gamma: f64, x_t: u64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(invalid("gamma", format!("the tail sum diverges for γ ≤ 1, got {gamma}")));
    }
    if !(0.0..1.0).contains(&lambda) {
        return Err(invalid("lambda", format!("must lie in [0, 1), got {lambda}")));
    }
    Ok(zeta_tail(x_t + 1, gamma) / (1.0 - lambda))
}

#[derive(Clone, Debug, Serialize)]
pub struct BackoffEstimate {
    pub runs: usize,
    pub hits: usize,
    pub frequency: f64,
    /// Wilson interval for `frequency`.
    pub ci: Interval,
    /// Mean over runs of `1 − Π(1 − g(X))` along the departures of each path:
    /// the backoff probability given the arrival/departure sequence.
    pub conditional: f64,
    /// Normal interval for `conditional`.
    pub conditional_ci: Interval,
}

/// Monte Carlo estimate of the probability of a back-off while the queue
/// stays at or above `x_t`, for one node that holds the medium from `x0`
/// packets. Each run follows the queue until it drops below `x_t` and reports
/// both whether a back-off was drawn and the conditional back-off
/// probability given the path.
///
/// While the node is active it is never blocked, so the jump chain reduces
/// to arrivals (mass `λ/(λ+1)`) and departures; dummy ticks are skipped.
pub fn backoff_monte_carlo(
    lambda: f64,
    gamma: f64,
    x0: u64,
    x_t: u64,
    runs: usize,
    seed: u64,
) -> Result<BackoffEstimate> {
    if x0 <= x_t {
        return Err(invalid("x0", "must exceed the threshold"));
    }
    if !(0.0..1.0).contains(&lambda) {
        return Err(invalid("lambda", format!("must lie in [0, 1), got {lambda}")));
    }
    if runs == 0 {
        return Err(invalid("runs", "need at least one run"));
    }
    let p_arrival = lambda / (lambda + 1.0);
    let outcomes: Vec<(bool, f64)> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run as u64);
            let mut x = x0;
            let mut hit = false;
            // ln Π(1 − g)
            let mut log_survive = 0.0f64;
            loop {
                if rng.random::<f64>() < p_arrival {
                    x += 1;
                    continue;
                }
                if x - 1 < x_t {
                    return (hit, -log_survive.exp_m1());
                }
                let g = (1.0 + x as f64).powf(-gamma);
                hit |= rng.random::<f64>() < g;
                log_survive += (-g).ln_1p();
                x -= 1;
            }
        })
        .collect();
    let hits = outcomes.iter().filter(|o| o.0).count();
    let cond: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    let conditional = mean(&cond);
    let var = cond.iter().map(|c| (c - conditional).powi(2)).sum::<f64>() / (runs.max(2) - 1) as f64;
    let half = Z95 * (var / runs as f64).sqrt();
    Ok(BackoffEstimate {
        runs,
        hits,
        frequency: hits as f64 / runs as f64,
        ci: wilson(hits, runs, Z95),
        conditional,
        conditional_ci: Interval { lo: conditional - half, hi: conditional + half },
    })
}
