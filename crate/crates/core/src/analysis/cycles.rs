use serde::Serialize;

use super::constants::{ConstantsStatus, InstabilityConstants};
use crate::error::{Error, Result};
use crate::fluid::{is_natural, lyapunov, FluidPath, Period};

/// Relative slack on the Lemma/Proposition inequalities (floating point only).
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleStats {
    /// 1-based cycle index.
    pub index: usize,
    pub t: f64,
    pub l: f64,
    pub dt: f64,
    pub dl: f64,
    pub periods: Vec<Period>,
    /// Queues when the opening M1-period ends.
    pub q_m1_end: Option<Vec<f64>>,
    pub weakly_balanced: Option<bool>,
    /// 1-based index `k` of the pair `D_k` holding this cycle.
    pub pair: usize,
    pub time_bound_ok: Option<bool>,
    pub load_bound_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairStats {
    pub k: usize,
    pub t: f64,
    pub l: f64,
    pub dt: f64,
    pub dl: f64,
    /// Minimum of `L` over `[T_k, T_{k+1}]`.
    pub min_l: f64,
    pub any_weakly_balanced: Option<bool>,
    pub duration_bound_ok: Option<bool>,
    pub floor_ok: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    CycleDuration,
    CycleLoadIncrease,
    PairDuration,
    PairFloor,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: BoundKind,
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleReport {
    /// Start of the first segment from which the path stays natural.
    pub natural_entry: Option<f64>,
    pub cycles: Vec<CycleStats>,
    pub pairs: Vec<PairStats>,
    pub violations: Vec<Violation>,
}

impl CycleReport {
    pub fn weakly_balanced_pair_fraction(&self) -> Option<f64> {
        let flags: Vec<bool> = self.pairs.iter().filter_map(|p| p.any_weakly_balanced).collect();
        (!flags.is_empty()).then(|| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
    }
}

/// `β^min ≤ Q3/Q5 ≤ β^max` and `β^min ≤ Q6/Q4 ≤ β^max` at an M1-period end.
/// A zero denominator means the ratio is unbounded and gives `false`.
pub fn weakly_balanced(q_m1_end: Option<&[f64]>, consts: &InstabilityConstants) -> Result<bool> {
    let q = q_m1_end.ok_or(Error::MissingRecord("queues at the M1-period end"))?;
    if q[4] == 0.0 || q[3] == 0.0 {
        return Ok(false);
    }
    let inside = |r: f64| consts.beta_min <= r && r <= consts.beta_max;
    Ok(inside(q[2] / q[4]) && inside(q[5] / q[3]))
}

/// Splits a broken-diamond fluid path into cycles between consecutive
/// M1-period starts after natural-state entry, groups them into pairs and
/// checks the per-cycle and per-pair bounds when constants are supplied.
/// The pair floor is only checked when `θ > 0`.
pub fn cycle_decomposition(path: &FluidPath, consts: Option<&InstabilityConstants>) -> CycleReport {
    let segs = &path.segments;
    let comps = path.lyapunov_components();
    let l_of = |q: &[f64]| lyapunov(q, &comps, &path.mus);

    let mut entry = segs.len();
    while entry > 0 && is_natural(&segs[entry - 1].q_start) {
        entry -= 1;
    }
    let natural_entry = segs.get(entry).map(|s| s.t_start);
    // A run of consecutive M1 segments is one M1-period.
    let starts: Vec<usize> = (entry..segs.len())
        .filter(|&j| segs[j].period == Period::M1 && (j == entry || segs[j - 1].period != Period::M1))
        .collect();

    let mut violations = Vec::new();
    let mut cycles = Vec::new();
    for (c, w) in starts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let t = segs[a].t_start;
        let l = l_of(&segs[a].q_start);
        let l_next = l_of(&segs[b].q_start);
        let dt = segs[b].t_start - t;
        let dl = l_next - l;
        let m1_last = (a..b).take_while(|&j| segs[j].period == Period::M1).last().unwrap_or(a);
        let q_end = segs[m1_last].q_end.clone();
        let mut periods: Vec<Period> = segs[a..b].iter().map(|s| s.period).collect();
        periods.dedup();
        let mut stats = CycleStats {
            index: c + 1,
            t,
            l,
            dt,
            dl,
            periods,
            q_m1_end: Some(q_end),
            weakly_balanced: None,
            pair: c / 2 + 1,
            time_bound_ok: None,
            load_bound_ok: None,
        };
        if let Some(k) = consts {
            stats.weakly_balanced = weakly_balanced(stats.q_m1_end.as_deref(), k).ok();
            let time_rhs = k.c_t * l;
            let load_rhs = k.c_l * l;
            let time_ok = dt <= time_rhs * (1.0 + BOUND_SLACK);
            let load_ok = dl <= load_rhs * (1.0 + BOUND_SLACK) + BOUND_SLACK * l;
            if !time_ok {
                violations.push(Violation { kind: BoundKind::CycleDuration, index: c + 1, lhs: dt, rhs: time_rhs });
            }
            if !load_ok {
                violations.push(Violation { kind: BoundKind::CycleLoadIncrease, index: c + 1, lhs: dl, rhs: load_rhs });
            }
            stats.time_bound_ok = Some(time_ok);
            stats.load_bound_ok = Some(load_ok);
        }
        cycles.push(stats);
    }

    let mut pairs = Vec::new();
    for (kk, pair) in cycles.chunks_exact(2).enumerate() {
        let (first, second) = (&pair[0], &pair[1]);
        let (t0, t1) = (first.t, second.t + second.dt);
        let a = starts[2 * kk];
        let b = starts[2 * kk + 2];
        let min_l = segs[a..b].iter().map(|s| path.segment_min_lyapunov(s)).fold(f64::INFINITY, f64::min);
        let mut stats = PairStats {
            k: kk + 1,
            t: t0,
            l: first.l,
            dt: t1 - t0,
            dl: second.l + second.dl - first.l,
            min_l,
            any_weakly_balanced: match (first.weakly_balanced, second.weakly_balanced) {
                (Some(x), Some(y)) => Some(x || y),
                _ => None,
            },
            duration_bound_ok: None,
            floor_ok: None,
        };
        if let Some(k) = consts {
            let rhs = k.c_lt * stats.l;
            let ok = stats.dt <= rhs * (1.0 + BOUND_SLACK);
            if !ok {
                violations.push(Violation { kind: BoundKind::PairDuration, index: kk + 1, lhs: stats.dt, rhs });
            }
            stats.duration_bound_ok = Some(ok);
            if k.status == ConstantsStatus::Ok {
                let floor = k.theta * stats.l;
                let ok = min_l >= floor - BOUND_SLACK * stats.l;
                if !ok {
                    violations.push(Violation { kind: BoundKind::PairFloor, index: kk + 1, lhs: min_l, rhs: floor });
                }
                stats.floor_ok = Some(ok);
            }
        }
        pairs.push(stats);
    }
    CycleReport { natural_entry, cycles, pairs, violations }
}
