//! Fast-mixing regime: the activity process averages out on the fluid scale
//! and the queues follow the drift `dQ/dt = λ − μ·u(Q)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{maximum_schedules, InterferenceGraph, Schedule};

/// Limit shape `ĥ(a) = lim h(aR)/h(R)` of the activation/de-activation ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFunctionSpec {
    /// `h(x) = x^γ`, `ĥ(a) = a^γ`.
    Power { gamma: f64 },
    /// `h(x) = log(1+x)`, `ĥ ≡ 1`.
    Log,
    /// `ĥ ≡ 1`.
    Constant,
    /// `ĥ` tabulated at increasing abscissae, linearly interpolated and held
    /// constant outside the table.
    Table { points: Vec<(f64, f64)> },
}

impl RateFunctionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RateFunctionSpec::Power { gamma } if !(*gamma > 0.0) => {
                Err(invalid("gamma", format!("power kind needs γ > 0, got {gamma}")))
            }
            RateFunctionSpec::Table { points } => {
                if points.is_empty() || points.iter().any(|&(_, y)| !(y > 0.0)) {
                    return Err(invalid("points", "table needs positive values"));
                }
                if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(invalid("points", "abscissae must increase"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `log ĥ(a)`.
    pub fn log_hat(&self, a: f64) -> f64 {
        match self {
            RateFunctionSpec::Power { gamma } => gamma * a.ln(),
            RateFunctionSpec::Log | RateFunctionSpec::Constant => 0.0,
            RateFunctionSpec::Table { points } => {
                let k = points.partition_point(|p| p.0 <= a);
                let y = if k == 0 {
                    points[0].1
                } else if k == points.len() {
                    points[k - 1].1
                } else {
                    let ((x0, y0), (x1, y1)) = (points[k - 1], points[k]);
                    y0 + (y1 - y0) * (a - x0) / (x1 - x0)
                };
                y.ln()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleDistribution {
    pub support: Vec<Schedule>,
    pub probs: Vec<f64>,
    pub m_star: usize,
}

/// Precomputed maximum-size schedules of a graph.
#[derive(Clone, Debug)]
pub struct FastMix {
    n: usize,
    m_star: usize,
    support: Vec<Schedule>,
    members: Vec<Vec<usize>>,
}

impl FastMix {
    pub fn new(g: &InterferenceGraph) -> Result<Self> {
        let (m_star, support) = maximum_schedules(g)?;
        let members = support.iter().map(Schedule::members).collect();
        Ok(Self { n: g.n(), m_star, support, members })
    }

    pub fn m_star(&self) -> usize {
        self.m_star
    }

    pub fn support(&self) -> &[Schedule] {
        &self.support
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n {
            return Err(invalid("q", format!("expected {} entries", self.n)));
        }
        if let Some(i) = q.iter().position(|v| !(*v > 0.0)) {
            return Err(invalid("q", format!("boundary state: q_{} = {} is not positive", i + 1, q[i])));
        }
        Ok(())
    }

    /// `π(s; q) ∝ Π ĥ(q_i)^{s_i}` on `S*`, computed in the log domain.
    pub fn pi(&self, q: &[f64], h: &RateFunctionSpec) -> Result<ScheduleDistribution> {
        self.check_q(q)?;
        h.validate()?;
        let log_h: Vec<f64> = q.iter().map(|&a| h.log_hat(a)).collect();
        let logw: Vec<f64> =
            self.members.iter().map(|m| m.iter().map(|&i| log_h[i]).sum()).collect();
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        Ok(ScheduleDistribution {
            support: self.support.clone(),
            probs: w.iter().map(|v| v / total).collect(),
            m_star: self.m_star,
        })
    }

    /// `u_i(q) = Σ_{s ∈ S*} s_i π(s; q)`.
    pub fn service_fraction(&self, q: &[f64], h: &RateFunctionSpec) -> Result<Vec<f64>> {
        let pi = self.pi(q, h)?;
        let mut u = vec![0.0; self.n];
        for (m, p) in self.members.iter().zip(&pi.probs) {
            for &i in m {
                u[i] += p;
            }
        }
        Ok(u)
    }

    /// Explicit Euler for `dQ/dt = λ − μ·u(Q)`. A step that would push some
    /// queue below `τ = 1e-9·‖Q0‖₁` is halved, down to `dt·2^-20`; after that the
    /// run stops and reports the boundary time.
    pub fn integrate(
        &self,
        q0: &[f64],
        lambdas: &[f64],
        mus: &[f64],
        h: &RateFunctionSpec,
        horizon: f64,
        dt: f64,
    ) -> Result<OdeTrajectory> {
        self.check_q(q0)?;
        if lambdas.len() != self.n || mus.len() != self.n {
            return Err(invalid("lambdas", format!("expected {} rates", self.n)));
        }
        if !(dt > 0.0) || !(horizon > 0.0) {
            return Err(invalid("dt", "step and horizon must be positive"));
        }
        let tau = 1e-9 * q0.iter().sum::<f64>();
        let min_dt = dt * (-20f64).exp2();
        let mut t = 0.0;
        let mut q = q0.to_vec();
        let mut u = self.service_fraction(&q, h)?;
        let mut samples = vec![OdeSample { t, q: q.clone(), u: u.clone() }];
        let mut boundary = None;
        while t < horizon {
            let mut step = dt.min(horizon - t);
            let next = loop {
                let cand: Vec<f64> =
                    (0..self.n).map(|i| q[i] + step * (lambdas[i] - mus[i] * u[i])).collect();
                if cand.iter().all(|&v| v >= tau) {
                    break Some(cand);
                }
                if step <= min_dt {
                    break None;
                }
                step /= 2.0;
            };
            let Some(next) = next else {
                boundary = Some(t);
                break;
            };
            q = next;
            t += step;
            u = self.service_fraction(&q, h)?;
            samples.push(OdeSample { t, q: q.clone(), u: u.clone() });
        }
        Ok(OdeTrajectory { samples, boundary })
    }

    /// Largest `Σρ_i / Σu_i(q)` over interior grid points; the drift bound
    /// holds with `ε = 1 − ratio`.
    pub fn worst_drift_ratio(&self, rho: &[f64], h: &RateFunctionSpec, grid: &[Vec<f64>]) -> Result<f64> {
        let load: f64 = rho.iter().sum();
        let mut worst: f64 = 0.0;
        for q in grid {
            let u: f64 = self.service_fraction(q, h)?.iter().sum();
            worst = worst.max(load / u);
        }
        Ok(worst)
    }
}

pub fn pi_stationary(q: &[f64], h: &RateFunctionSpec, g: &InterferenceGraph) -> Result<ScheduleDistribution> {
    FastMix::new(g)?.pi(q, h)
}

pub fn service_fraction(q: &[f64], h: &RateFunctionSpec, g: &InterferenceGraph) -> Result<Vec<f64>> {
    FastMix::new(g)?.service_fraction(q, h)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdeSample {
    pub t: f64,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdeTrajectory {
    pub samples: Vec<OdeSample>,
    /// Time at which the run stopped at the boundary, if it did.
    pub boundary: Option<f64>,
}

/// Scalar rate shapes used by the mixing-time bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Constant { value: f64 },
    /// `x^p` (any real exponent).
    Power { exponent: f64 },
    /// `log(1+x)`.
    Log1p,
    /// `1/log(1+x)`.
    InverseLog1p,
}

impl ScalarFn {
    pub fn ln_at(&self, x: f64) -> f64 {
        match *self {
            ScalarFn::Constant { value } => value.ln(),
            ScalarFn::Power { exponent } => exponent * x.ln(),
            ScalarFn::Log1p => x.ln_1p().ln(),
            ScalarFn::InverseLog1p => -x.ln_1p().ln(),
        }
    }
}

/// `log(f(R)^{m*−1}·g(R)^{−m*})`.
pub fn log_mixing_time_growth(f: ScalarFn, g: ScalarFn, r: f64, m_star: usize) -> f64 {
    (m_star as f64 - 1.0) * f.ln_at(r) - m_star as f64 * g.ln_at(r)
}

pub fn mixing_time_growth(f: ScalarFn, g: ScalarFn, r: f64, m_star: usize) -> f64 {
    log_mixing_time_growth(f, g, r, m_star).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingVerdict {
    pub fast: bool,
    /// `(R, log(growth/R))` along `R = 2^30 … 2^40`.
    pub log_ratio: Vec<(f64, f64)>,
}

/// Fast mixing iff `growth/R` strictly decreases over the doublings
/// `2^30 … 2^40` and ends below 1.
pub fn classify_mixing(f: ScalarFn, g: ScalarFn, m_star: usize) -> MixingVerdict {
    let log_ratio: Vec<(f64, f64)> = (30..=40)
        .map(|k| {
            let r = (k as f64).exp2();
            (r, log_mixing_time_growth(f, g, r, m_star) - r.ln())
        })
        .collect();
    let decreasing = log_ratio.windows(2).all(|w| w[1].1 < w[0].1);
    let fast = decreasing && log_ratio.last().is_some_and(|&(_, v)| v < 0.0);
    MixingVerdict { fast, log_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> InterferenceGraph {
        InterferenceGraph::diamond(3, &[2]).unwrap().0
    }

    #[test]
    fn log_kind_is_uniform() {
        let pi = pi_stationary(&[0.3, 2.0, 1.0, 5.0, 0.2, 0.9], &RateFunctionSpec::Log, &diamond()).unwrap();
        assert!(pi.probs.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        let u = service_fraction(&[0.3, 2.0, 1.0, 5.0, 0.2, 0.9], &RateFunctionSpec::Log, &diamond()).unwrap();
        assert!(u.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn power_one_weights_products() {
        let pi = pi_stationary(&[2.0, 2.0, 1.0, 1.0, 1.0, 1.0], &RateFunctionSpec::Power { gamma: 1.0 }, &diamond())
            .unwrap();
        let want = [4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (p, w) in pi.probs.iter().zip(want) {
            assert!((p - w).abs() < 1e-15);
        }
    }

    #[test]
    fn single_maximum_schedule_is_deterministic() {
        let g = InterferenceGraph::from_edges(3, &[(0, 1)]).unwrap();
        let u = service_fraction(&[1.0, 2.0, 3.0], &RateFunctionSpec::Power { gamma: 2.0 }, &g).unwrap();
        // S* = {{1,3},{2,3}}: node 3 always served
        assert!((u[2] - 1.0).abs() < 1e-15);
        let g = InterferenceGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let u = service_fraction(&[1.0, 2.0, 3.0], &RateFunctionSpec::Power { gamma: 2.0 }, &g).unwrap();
        assert_eq!(u, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn boundary_rejected() {
        assert!(pi_stationary(&[0.0, 1.0, 1.0, 1.0, 1.0, 1.0], &RateFunctionSpec::Log, &diamond()).is_err());
    }

    #[test]
    fn broken_diamond_fractions_sum_to_m_star() {
        let g = InterferenceGraph::broken_diamond();
        let fm = FastMix::new(&g).unwrap();
        let u = fm.service_fraction(&[0.5, 1.5, 2.0, 0.1, 3.0, 0.7], &RateFunctionSpec::Power { gamma: 1.5 }).unwrap();
        assert!((u.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_is_stationary() {
        let g = diamond();
        let fm = FastMix::new(&g).unwrap();
        let q0 = [1.0; 6];
        let u0 = fm.service_fraction(&q0, &RateFunctionSpec::Log).unwrap();
        let traj = fm.integrate(&q0, &u0, &[1.0; 6], &RateFunctionSpec::Log, 5.0, 0.1).unwrap();
        let last = traj.samples.last().unwrap();
        assert!(last.q.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn subcritical_log_drift_decreases_total() {
        let g = diamond();
        let fm = FastMix::new(&g).unwrap();
        let lam = [0.1, 0.2, 0.15, 0.1, 0.05, 0.2];
        let traj = fm.integrate(&[1.0; 6], &lam, &[1.0; 6], &RateFunctionSpec::Log, 100.0, 0.01).unwrap();
        let eps = 1.0 - lam.iter().sum::<f64>() / 2.0;
        for w in traj.samples.windows(2) {
            let d: f64 = w[1].q.iter().sum::<f64>() - w[0].q.iter().sum::<f64>();
            let dt = w[1].t - w[0].t;
            assert!(d / dt <= -eps * lam.iter().sum::<f64>() + 1e-9);
        }
        assert!(traj.boundary.is_some());
    }

    #[test]
    fn euler_is_first_order() {
        let g = InterferenceGraph::from_edges(2, &[(0, 1)]).unwrap();
        let fm = FastMix::new(&g).unwrap();
        let h = RateFunctionSpec::Power { gamma: 1.0 };
        let run = |dt: f64| fm.integrate(&[1.0, 2.0], &[0.3, 0.3], &[1.0, 1.0], &h, 1.0, dt).unwrap();
        let end = |t: &OdeTrajectory| t.samples.last().unwrap().q[0];
        let reference = end(&run(0.025 / 4.0));
        let e1 = (end(&run(0.05)) - reference).abs();
        let e2 = (end(&run(0.025)) - reference).abs();
        let ratio = e1 / e2;
        assert!((1.6..2.6).contains(&ratio), "{ratio}");
    }

    #[test]
    fn mixing_classification() {
        let c = ScalarFn::Constant { value: 1.0 };
        assert!(classify_mixing(c, c, 1).fast);
        assert!(classify_mixing(c, ScalarFn::InverseLog1p, 3).fast);
        assert!(!classify_mixing(c, ScalarFn::Power { exponent: -1.5 }, 2).fast);
        let r = 1e6;
        let g = mixing_time_growth(c, ScalarFn::Power { exponent: -1.5 }, r, 2);
        assert!((g / r.powf(3.0) - 1.0).abs() < 1e-9);
    }
}
