//! Single-node reference solutions for checking the uniformized sampler.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{JumpChain, NodeDynamics, SystemState};
use crate::error::{invalid, Result};
use crate::graph::InterferenceGraph;

/// Stationary law of the queue length for one isolated node, from the
/// explicit jump-chain transition matrix on `(U, X)`, `X ∈ 0..=max_x`,
/// solved by power iteration. Arrivals at `max_x` are rejected.
pub fn single_node_stationary(p: &NodeDynamics, max_x: usize) -> Result<Vec<f64>> {
    p.validate()?;
    if max_x < 1 {
        return Err(invalid("max_x", "truncation must keep at least two levels"));
    }
    let beta = p.lambda + p.mu.max(p.nu);
    let a = p.lambda / beta;
    let levels = max_x + 1;
    // index: u·levels + x
    let mut pi = vec![0.0; 2 * levels];
    pi[0] = 1.0;
    let mut next = vec![0.0; 2 * levels];
    for _ in 0..1_000_000 {
        next.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..levels {
            // idle
            let m = pi[x];
            let up = if x < max_x { a } else { 0.0 };
            let act = p.nu * p.phi(x as u64) / beta;
            if x < max_x {
                next[x + 1] += m * up;
            }
            next[levels + x] += m * act;
            next[x] += m * (1.0 - up - act);
            // active (x ≥ 1)
            if x == 0 {
                continue;
            }
            let m = pi[levels + x];
            let dep = p.mu / beta;
            let release = if x == 1 { 1.0 } else { p.psi(x as u64) };
            if x < max_x {
                next[levels + x + 1] += m * up;
            }
            next[x - 1] += m * dep * release;
            next[levels + x - 1] += m * dep * (1.0 - release);
            next[levels + x] += m * (1.0 - up - dep);
        }
        let delta: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if delta < 1e-14 {
            break;
        }
    }
    let total: f64 = pi.iter().sum();
    Ok((0..levels).map(|x| (pi[x] + pi[levels + x]) / total).collect())
}

/// Tick-average law of the queue length of one node, over `0..=max_x`
/// (longer queues are lumped into the last entry).
pub fn empirical_queue_law(p: &NodeDynamics, max_x: usize, ticks: u64, seed: u64) -> Result<Vec<f64>> {
    let g = InterferenceGraph::new(1)?;
    let chain = JumpChain::new(&g, std::slice::from_ref(p))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SystemState::new(vec![0]);
    let mut counts = vec![0u64; max_x + 1];
    for _ in 0..ticks {
        chain.step(&mut s, &mut rng);
        counts[(s.x[0] as usize).min(max_x)] += 1;
    }
    Ok(counts.iter().map(|&c| c as f64 / ticks as f64).collect())
}
