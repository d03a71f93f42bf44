use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::graph::InterferenceGraph;

/// Time fractions spent in each activity state, keyed by activity mask.
#[derive(Clone, Debug, Default)]
pub struct Occupancy {
    pub time: BTreeMap<u64, f64>,
    pub total: f64,
}

impl Occupancy {
    pub fn fraction(&self, mask: u64) -> f64 {
        self.time.get(&mask).copied().unwrap_or(0.0) / self.total
    }

    pub fn merge(&mut self, other: &Occupancy) {
        for (&m, &t) in &other.time {
            *self.time.entry(m).or_default() += t;
        }
        self.total += other.total;
    }
}

/// Simulates the activity process with frozen queues: unblocked node `i`
/// activates at rate `activate[i]`, active node `i` releases at rate
/// `release[i]`. Runs `events` transitions from the empty state.
pub fn activity_occupancy(
    g: &InterferenceGraph,
    activate: &[f64],
    release: &[f64],
    events: u64,
    seed: u64,
) -> Result<Occupancy> {
    let n = g.n();
    if activate.len() != n || release.len() != n {
        return Err(invalid("rates", format!("expected {n} activation and release rates")));
    }
    if activate.iter().chain(release).any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(invalid("rates", "rates must be finite and nonnegative"));
    }
    let blocking: Vec<u64> = (0..n).map(|i| g.neighbor_mask(i) | 1 << i).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occ = Occupancy::default();
    let mut u = 0u64;
    let mut rates = vec![0.0; n];
    for _ in 0..events {
        let mut total = 0.0;
        for i in 0..n {
            rates[i] = if u >> i & 1 == 1 {
                release[i]
            } else if u & blocking[i] == 0 {
                activate[i]
            } else {
                0.0
            };
            total += rates[i];
        }
        if total == 0.0 {
            break;
        }
        let hold = -(1.0 - rng.random::<f64>()).ln() / total;
        *occ.time.entry(u).or_default() += hold;
        occ.total += hold;
        let mut v = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &r) in rates.iter().enumerate() {
            if v < r {
                pick = i;
                break;
            }
            v -= r;
        }
        u ^= 1 << pick;
    }
    Ok(occ)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_node_matches_ratio() {
        // single node: fraction active = a/(a+r)
        let g = InterferenceGraph::new(1).unwrap();
        let occ = activity_occupancy(&g, &[3.0], &[1.0], 200_000, 4).unwrap();
        assert!((occ.fraction(1) - 0.75).abs() < 0.01);
    }

    #[test]
    fn conflicting_nodes_never_coexist() {
        let g = InterferenceGraph::complete(3).unwrap();
        let occ = activity_occupancy(&g, &[1.0; 3], &[1.0; 3], 50_000, 2).unwrap();
        assert!(occ.time.keys().all(|m| m.count_ones() <= 1));
    }
}
