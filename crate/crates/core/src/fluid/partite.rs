use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{affine_end, lyapunov, FluidPath, FluidSegment, Period, SwitchDecision, Termination, Topology};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug)]
pub struct PartiteOptions {
    /// First period; `None` draws it with the switch law.
    pub start: Option<usize>,
    /// The path is reported drained once `L < drain_tol·L(0)`.
    pub drain_tol: f64,
    /// Hard cap on the number of segments.
    pub max_segments: usize,
}

impl Default for PartiteOptions {
    fn default() -> Self {
        Self { start: None, drain_tol: 1e-12, max_segments: 1_000_000 }
    }
}

/// Complete partite ("diamond") network: in an `M_k`-period the nodes of
/// component `k` drain until all are empty, then the next component `l ≠ k`
/// is drawn with weight equal to its number of nonempty queues (the limit of
/// `Σ_{i∈M_l} f(R·Q_i)` with `f ≡ 1`). If every other component is empty the
/// draw is uniform.
pub fn simulate_partite(
    components: &[Vec<usize>],
    lambdas: &[f64],
    mus: &[f64],
    q0: &[f64],
    horizon: f64,
    seed: u64,
    options: &PartiteOptions,
) -> Result<FluidPath> {
    let n = lambdas.len();
    if mus.len() != n || q0.len() != n {
        return Err(invalid("q0", format!("lambdas, mus and q0 must all have {n} entries")));
    }
    let mut seen = vec![false; n];
    for &i in components.iter().flatten() {
        if i >= n || seen[i] {
            return Err(invalid("components", "must partition the nodes"));
        }
        seen[i] = true;
    }
    if components.len() < 2 || seen.iter().any(|s| !s) {
        return Err(invalid("components", "must partition the nodes into at least two parts"));
    }
    if let Some(i) = (0..n).find(|&i| !(mus[i] - lambdas[i] > 0.0) || lambdas[i] < 0.0) {
        return Err(invalid("lambdas", format!("node {} needs 0 ≤ λ < μ", i + 1)));
    }
    if q0.iter().any(|q| !(q.is_finite() && *q >= 0.0)) || q0.iter().all(|&q| q == 0.0) {
        return Err(invalid("q0", "must be nonnegative and not identically zero"));
    }
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l0 = lyapunov(q0, components, mus);
    let mut q = q0.to_vec();
    let mut t = 0.0;
    let mut k = match options.start {
        Some(k) if k < components.len() => k,
        Some(_) => return Err(invalid("start", "no such component")),
        None => draw_next(components, &q, None, &mut rng).outcome.index(),
    };
    let mut segments: Vec<FluidSegment> = Vec::new();
    let mut termination = Termination::Horizon;
    loop {
        if segments.len() >= options.max_segments {
            return Err(Error::Fluid(format!("segment cap {} reached", options.max_segments)));
        }
        let served = &components[k];
        let duration =
            served.iter().map(|&i| q[i] / (mus[i] - lambdas[i])).fold(0.0, f64::max);
        let slope: Vec<f64> = (0..n)
            .map(|i| if served.contains(&i) { lambdas[i] - mus[i] } else { lambdas[i] })
            .collect();
        let truncated = t + duration >= horizon;
        let t_end = if truncated { horizon } else { t + duration };
        let mut q_end = affine_end(&q, &slope, t_end - t);
        if !truncated {
            for &i in served {
                q_end[i] = 0.0;
            }
        }
        let mut seg = FluidSegment {
            t_start: t,
            t_end,
            period: Period(k as u8 + 1),
            q_start: q.clone(),
            q_end: q_end.clone(),
            slope,
            served: served.clone(),
            switch: None,
        };
        q = q_end;
        t = t_end;
        if truncated {
            segments.push(seg);
            break;
        }
        if lyapunov(&q, components, mus) < options.drain_tol * l0 {
            segments.push(seg);
            termination = Termination::Drained;
            break;
        }
        let decision = draw_next(components, &q, Some(k), &mut rng);
        k = decision.outcome.index();
        seg.switch = Some(decision);
        segments.push(seg);
    }
    Ok(FluidPath {
        topology: Topology::Partite { components: components.to_vec() },
        seed,
        lambdas: lambdas.to_vec(),
        mus: mus.to_vec(),
        segments,
        termination,
    })
}

fn draw_next<R: Rng>(
    components: &[Vec<usize>],
    q: &[f64],
    current: Option<usize>,
    rng: &mut R,
) -> SwitchDecision {
    let candidates: Vec<usize> = (0..components.len()).filter(|&l| Some(l) != current).collect();
    let mut weights: Vec<f64> = candidates
        .iter()
        .map(|&l| components[l].iter().filter(|&&i| q[i] > 0.0).count() as f64)
        .collect();
    let mut total: f64 = weights.iter().sum();
    if total == 0.0 {
        weights.iter_mut().for_each(|w| *w = 1.0);
        total = weights.len() as f64;
    }
    let probs: Vec<(Period, f64)> =
        candidates.iter().zip(&weights).map(|(&l, &w)| (Period(l as u8 + 1), w / total)).collect();
    let mut v = rng.random::<f64>() * total;
    let mut outcome = probs.last().expect("at least two components").0;
    for (&(p, _), &w) in probs.iter().zip(&weights) {
        if v < w {
            outcome = p;
            break;
        }
        v -= w;
    }
    SwitchDecision { probs, outcome, tie: false }
}
