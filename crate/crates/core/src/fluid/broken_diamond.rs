use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{affine_end, lyapunov, FluidPath, FluidSegment, Period, SwitchDecision, Termination, Topology, TAU_NAT, TAU_TIE};
use crate::error::{invalid, Error, Result};

/// Consecutive zero-length segments tolerated before the engine gives up.
const MAX_ZERO_RUN: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BrokenDiamondOptions {
    /// `P(M2 → M1)`; the complement goes to M3.
    pub m2_to_m1: f64,
    /// `P(M3 → M1)`; the complement goes to M2.
    pub m3_to_m1: f64,
    pub start: Period,
    /// Accept `λ3 = λ4` or `λ6 = λ5`. Equal drain times at an M2/M3 exit are
    /// then resolved with the usual `m2_to_m1`/`m3_to_m1` draw and flagged.
    pub allow_tie: bool,
    pub max_segments: usize,
    /// The path is reported drained once `L < drain_tol·L(0)`.
    pub drain_tol: f64,
    /// Stop cleanly after this many segments (termination `Budget`).
    pub segment_budget: Option<usize>,
}

impl Default for BrokenDiamondOptions {
    fn default() -> Self {
        Self { m2_to_m1: 0.5, m3_to_m1: 0.5, start: Period::M1, allow_tie: false, max_segments: 10_000_000, drain_tol: 1e-12, segment_budget: None }
    }
}

fn schedule(p: Period) -> &'static [usize] {
    match p.0 {
        1 => &[0, 1],
        2 => &[2, 3],
        3 => &[4, 5],
        _ => &[3, 4],
    }
}

/// `Q3 ≥ Q4` and `Q6 ≥ Q5`, with equality only when both sides are zero.
/// Equality and zero are judged at `TAU_NAT·max Q`.
pub fn is_natural(q: &[f64]) -> bool {
    let tol = TAU_NAT * q.iter().cloned().fold(0.0, f64::max);
    let side = |big: f64, small: f64| {
        if (big - small).abs() <= tol {
            big <= tol && small <= tol
        } else {
            big > small
        }
    };
    side(q[2], q[3]) && side(q[5], q[4])
}

/// Time after which the path is guaranteed to be natural:
/// `max([Q4 − Q3]₊/(λ3 − λ4), [Q5 − Q6]₊/(λ6 − λ5))`.
pub fn natural_entry_bound(lambdas: &[f64], q0: &[f64]) -> f64 {
    let t3 = (q0[3] - q0[2]).max(0.0) / (lambdas[2] - lambdas[3]);
    let t6 = (q0[4] - q0[5]).max(0.0) / (lambdas[5] - lambdas[4]);
    let fix = |t: f64| if t.is_nan() { 0.0 } else { t };
    fix(t3).max(fix(t6))
}

/// Broken-diamond fluid path with unit service rates.
///
/// M1 drains nodes 1, 2 for `max(Q1/(1−λ1), Q2/(1−λ2))` and exits to M2, M3,
/// M4 with probabilities 3/8, 3/8, 1/4. M2 drains 3 (and 4) for `Q3/(1−λ3)`;
/// it is forced into M4 if node 4 is still nonempty, and otherwise exits to
/// M1 with probability `m2_to_m1`. M3 mirrors M2 with nodes 6, 5 and `m3_to_m1`.
/// M4 drains 4 and 5 for `min(Q4/(1−λ4), Q5/(1−λ5))` and hands over to the
/// side that is still nonempty (M2 for node 4, M3 for node 5); an exact tie
/// is resolved by a fair coin and flagged.
pub fn simulate_broken_diamond(
    lambdas: &[f64],
    q0: &[f64],
    horizon: f64,
    seed: u64,
    options: &BrokenDiamondOptions,
) -> Result<FluidPath> {
    validate(lambdas, q0, horizon, options)?;
    let mus = vec![1.0; 6];
    let comps = vec![vec![0, 1], vec![2, 3], vec![4, 5]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = q0.to_vec();
    let mut t = 0.0;
    let mut period = options.start;
    let mut segments: Vec<FluidSegment> = Vec::new();
    let mut zero_run = 0;
    let l0 = lyapunov(q0, &comps, &mus);
    loop {
        if segments.len() >= options.max_segments {
            return Err(Error::Fluid(format!("segment cap {} reached", options.max_segments)));
        }
        let served = schedule(period);
        let r = |i: usize| q[i] / (1.0 - lambdas[i]);
        let (duration, emptied): (f64, Vec<usize>) = match period.0 {
            1 => (r(0).max(r(1)), vec![0, 1]),
            2 => (r(2), vec![2]),
            3 => (r(5), vec![5]),
            _ => {
                let (a, b) = (r(3), r(4));
                let scale = q.iter().copied().fold(0.0, f64::max);
                if (a - b).abs() <= TAU_TIE * scale {
                    (a.min(b), vec![3, 4])
                } else if a < b {
                    (a, vec![3])
                } else {
                    (b, vec![4])
                }
            }
        };
        let slope: Vec<f64> =
            (0..6).map(|i| if served.contains(&i) { lambdas[i] - 1.0 } else { lambdas[i] }).collect();
        let truncated = t + duration >= horizon;
        let t_end = if truncated { horizon } else { t + duration };
        let mut q_end = affine_end(&q, &slope, t_end - t);
        if !truncated {
            for &i in &emptied {
                q_end[i] = 0.0;
            }
            // Served queues left at rounding level are empty.
            let scale = q.iter().copied().fold(0.0, f64::max);
            for &i in served {
                if q_end[i] <= TAU_TIE * scale {
                    q_end[i] = 0.0;
                }
            }
        }
        let mut seg = FluidSegment {
            t_start: t,
            t_end,
            period,
            q_start: q.clone(),
            q_end: q_end.clone(),
            slope,
            served: served.to_vec(),
            switch: None,
        };
        let q_entry = std::mem::replace(&mut q, q_end);
        t = t_end;
        if truncated {
            segments.push(seg);
            return Ok(finish(lambdas, seed, segments, Termination::Horizon));
        }
        if lyapunov(&q, &comps, &mus) <= options.drain_tol * l0 {
            segments.push(seg);
            return Ok(finish(lambdas, seed, segments, Termination::Drained));
        }
        zero_run = if duration == 0.0 { zero_run + 1 } else { 0 };
        if zero_run > MAX_ZERO_RUN {
            return Err(Error::Fluid(format!(
                "degenerate alternation of zero-length periods at t = {t} (Q = {q:?})"
            )));
        }
        let decision = next_period(period, &q_entry, &q, lambdas, options, &mut rng)?;
        period = decision.outcome;
        seg.switch = Some(decision);
        segments.push(seg);
        if options.segment_budget.is_some_and(|b| segments.len() >= b) {
            return Ok(finish(lambdas, seed, segments, Termination::Budget));
        }
    }
}

fn q_ratio(q: &[f64], lambdas: &[f64], i: usize) -> f64 {
    q[i] / (1.0 - lambdas[i])
}

fn finish(lambdas: &[f64], seed: u64, segments: Vec<FluidSegment>, termination: Termination) -> FluidPath {
    FluidPath {
        topology: Topology::BrokenDiamond,
        seed,
        lambdas: lambdas.to_vec(),
        mus: vec![1.0; 6],
        segments,
        termination,
    }
}

fn validate(lambdas: &[f64], q0: &[f64], horizon: f64, o: &BrokenDiamondOptions) -> Result<()> {
    if lambdas.len() != 6 || q0.len() != 6 {
        return Err(invalid("lambdas", "the broken diamond has six nodes"));
    }
    if lambdas.iter().any(|l| !(0.0..1.0).contains(l)) {
        return Err(invalid("lambdas", "each rate must lie in [0, 1)"));
    }
    let tie34 = lambdas[2] == lambdas[3];
    let tie65 = lambdas[5] == lambdas[4];
    if lambdas[2] < lambdas[3] || lambdas[5] < lambdas[4] || (!o.allow_tie && (tie34 || tie65)) {
        return Err(invalid("lambdas", "need λ3 > λ4 and λ6 > λ5 (or allow_tie for equality)"));
    }
    if q0.iter().any(|q| !(q.is_finite() && *q >= 0.0)) || q0.iter().all(|&q| q == 0.0) {
        return Err(invalid("q0", "must be nonnegative and not identically zero"));
    }
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    if !(0.0..=1.0).contains(&o.m2_to_m1) {
        return Err(invalid("m2_to_m1", "must be a probability"));
    }
    if !(0.0..=1.0).contains(&o.m3_to_m1) {
        return Err(invalid("m3_to_m1", "must be a probability"));
    }
    if !(1..=4).contains(&o.start.0) {
        return Err(invalid("start", "period must be one of M1..M4"));
    }
    // Equal drain ratios with positive queues make the M2/M3 exit law depend
    // on pre-limit history.
    let r = |i: usize| q0[i] / (1.0 - lambdas[i]);
    if (q0[2] > 0.0 && r(2) == r(3)) || (q0[5] > 0.0 && r(5) == r(4)) {
        return Err(Error::Fluid(
            "start state has equal drain times on a non-natural side; its exit law is not determined at fluid scale"
                .into(),
        ));
    }
    Ok(())
}

fn draw<R: Rng>(rng: &mut R, probs: Vec<(Period, f64)>, tie: bool) -> SwitchDecision {
    let mut v = rng.random::<f64>();
    let mut outcome = probs.last().expect("nonempty").0;
    for &(p, w) in &probs {
        if v < w {
            outcome = p;
            break;
        }
        v -= w;
    }
    SwitchDecision { probs, outcome, tie }
}

fn forced(p: Period) -> SwitchDecision {
    SwitchDecision { probs: vec![(p, 1.0)], outcome: p, tie: false }
}

fn next_period<R: Rng>(
    period: Period,
    q_entry: &[f64],
    q_exit: &[f64],
    lambdas: &[f64],
    o: &BrokenDiamondOptions,
    rng: &mut R,
) -> Result<SwitchDecision> {
    let r = |i: usize| q_ratio(q_entry, lambdas, i);
    Ok(match period.0 {
        1 => draw(rng, vec![(Period::M2, 0.375), (Period::M3, 0.375), (Period::M4, 0.25)], false),
        2 => {
            if q_exit[3] > 0.0 {
                forced(Period::M4)
            } else {
                let tie = q_entry[2] > 0.0 && r(2) == r(3);
                if tie && !o.allow_tie {
                    return Err(Error::Fluid("M2 exit with equal drain times of nodes 3 and 4".into()));
                }
                draw(rng, vec![(Period::M1, o.m2_to_m1), (Period::M3, 1.0 - o.m2_to_m1)], tie)
            }
        }
        3 => {
            if q_exit[4] > 0.0 {
                forced(Period::M4)
            } else {
                let tie = q_entry[5] > 0.0 && r(5) == r(4);
                if tie && !o.allow_tie {
                    return Err(Error::Fluid("M3 exit with equal drain times of nodes 5 and 6".into()));
                }
                draw(rng, vec![(Period::M1, o.m3_to_m1), (Period::M2, 1.0 - o.m3_to_m1)], tie)
            }
        }
        _ => match (q_exit[3] > 0.0, q_exit[4] > 0.0) {
            (true, _) => forced(Period::M2),
            (false, true) => forced(Period::M3),
            (false, false) => draw(rng, vec![(Period::M2, 0.5), (Period::M3, 0.5)], true),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEC6: [f64; 6] = [0.388, 0.388, 0.388, 0.388, 0.194, 0.194];

    fn lam() -> [f64; 6] {
        // λ3 > λ4, λ6 > λ5
        [0.38, 0.38, 0.4, 0.3, 0.15, 0.2]
    }

    #[test]
    fn m1_duration_and_fill() {
        let c = 2.0;
        let l = lam();
        let p = simulate_broken_diamond(&l, &[c, c, 0.0, 0.0, 0.0, 0.0], 1e6, 1, &Default::default())
            .unwrap();
        let s = &p.segments[0];
        assert_eq!(s.period, Period::M1);
        let t1 = c / (1.0 - 0.38);
        assert!((s.duration() - t1).abs() < 1e-12);
        assert!((s.q_end[2] - 0.4 * t1).abs() < 1e-12);
        assert_eq!(&s.q_end[..2], &[0.0, 0.0]);
    }

    #[test]
    fn m4_with_larger_node4_ratio_goes_to_m2() {
        let l = lam();
        let q0 = [0.0, 0.0, 3.0, 2.0, 0.5, 1.0];
        let o = BrokenDiamondOptions { start: Period::M4, ..Default::default() };
        for seed in 0..20 {
            let p = simulate_broken_diamond(&l, &q0, 1e6, seed, &o).unwrap();
            let d = p.segments[0].switch.as_ref().unwrap();
            assert_eq!(d.outcome, Period::M2);
            assert_eq!(d.probs, vec![(Period::M2, 1.0)]);
        }
    }

    #[test]
    fn m1_exit_frequencies() {
        let l = lam();
        let mut counts = [0usize; 3];
        let mut total = 0;
        let mut seed = 0;
        while total < 10_000 {
            let path = simulate_broken_diamond(&l, &[0.5, 0.5, 0.6, 0.4, 0.4, 0.6], 1e4, seed, &Default::default())
                .unwrap();
            for s in &path.segments {
                if let (Period::M1, Some(d)) = (s.period, &s.switch) {
                    counts[d.outcome.index() - 1] += 1;
                    total += 1;
                }
            }
            seed += 1;
        }
        let f: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        assert!((f[0] - 0.375).abs() < 0.02 && (f[1] - 0.375).abs() < 0.02 && (f[2] - 0.25).abs() < 0.02, "{f:?}");
    }

    #[test]
    fn natural_predicate() {
        assert!(is_natural(&[9.0, 9.0, 2.0, 1.0, 0.0, 1.0]));
        assert!(!is_natural(&[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]));
        assert!(is_natural(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn natural_after_entry_bound() {
        let l = lam();
        let q0 = [0.2, 0.1, 0.1, 0.6, 0.5, 0.05];
        let bound = natural_entry_bound(&l, &q0);
        for seed in 0..50 {
            let p = simulate_broken_diamond(&l, &q0, 200.0, seed, &Default::default()).unwrap();
            for s in p.segments.iter().filter(|s| s.t_end > bound) {
                assert!(is_natural(&s.q_end), "seed {seed}: {:?}", s.q_end);
            }
        }
    }

    #[test]
    fn no_m4_after_m2_or_m3_once_natural() {
        let l = lam();
        for seed in 0..50 {
            let p = simulate_broken_diamond(&l, &[0.3, 0.3, 0.5, 0.1, 0.1, 0.5], 500.0, seed, &Default::default())
                .unwrap();
            for w in p.segments.windows(2) {
                if w[1].period == Period::M4 && is_natural(&w[0].q_start) {
                    assert_eq!(w[0].period, Period::M1);
                }
            }
        }
    }

    #[test]
    fn rejects_rate_order_and_equal_start() {
        assert!(simulate_broken_diamond(&SEC6, &[1.0; 6], 1.0, 0, &Default::default()).is_err());
        let o = BrokenDiamondOptions { allow_tie: true, ..Default::default() };
        // Q3 = Q4 > 0 with equal rates: history-dependent exit
        assert!(simulate_broken_diamond(&SEC6, &[1.0; 6], 1.0, 0, &o).is_err());
        let r = simulate_broken_diamond(&SEC6, &[1.0, 1.0, 2.0, 1.0, 0.5, 1.0], 10.0, 0, &o);
        assert!(r.is_ok(), "{r:?}");
    }

    #[test]
    fn continuity_and_independent_service() {
        let l = lam();
        let p = simulate_broken_diamond(&l, &[0.3, 0.2, 0.5, 0.1, 0.1, 0.5], 300.0, 7, &Default::default())
            .unwrap();
        let g = crate::graph::InterferenceGraph::broken_diamond();
        for w in p.segments.windows(2) {
            assert_eq!(w[0].q_end, w[1].q_start);
            assert_eq!(w[0].t_end, w[1].t_start);
        }
        for s in &p.segments {
            let mask = s.served.iter().fold(0u64, |m, &i| m | 1 << i);
            assert!(g.is_independent(mask));
        }
    }
}
