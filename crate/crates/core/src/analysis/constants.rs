use serde::Serialize;

use crate::error::{invalid, Result};

/// Probability that a cycle pair ends with a substantial load increase.
pub const P_INCREASE: f64 = 1.0 / 12.0;

/// Broken-diamond load parameterization
/// `ρ_i = ρ·(κ1, κ2, κ3, κ3−α, κ6−α, κ6)` with `max{κ1,κ2} + κ3 + κ6 = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KappaAlpha {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa6: f64,
    pub alpha: f64,
    pub rho: f64,
}

impl KappaAlpha {
    pub fn loads(&self) -> [f64; 6] {
        let r = self.rho;
        [
            r * self.kappa1,
            r * self.kappa2,
            r * self.kappa3,
            r * (self.kappa3 - self.alpha),
            r * (self.kappa6 - self.alpha),
            r * self.kappa6,
        ]
    }

    /// Recovers `(κ, α, ρ)` from six arrival rates. `α` is taken as
    /// `min{κ3−κ4, κ6−κ5}` when the two gaps differ.
    pub fn from_lambdas(lambdas: &[f64]) -> Result<Self> {
        if lambdas.len() != 6 {
            return Err(invalid("lambdas", "the broken diamond has six nodes"));
        }
        let l = lambdas;
        let rho = l[0].max(l[1]) + l[2] + l[5];
        if !(rho > 0.0) {
            return Err(invalid("lambdas", "total load must be positive"));
        }
        let alpha = ((l[2] - l[3]).min(l[5] - l[4]) / rho).max(0.0);
        Ok(Self {
            kappa1: l[0] / rho,
            kappa2: l[1] / rho,
            kappa3: l[2] / rho,
            kappa6: l[5] / rho,
            alpha,
            rho,
        })
    }

    fn validate(&self) -> Result<()> {
        let k = [self.kappa1, self.kappa2, self.kappa3, self.kappa6];
        if k.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(invalid("kappa", "entries must be positive"));
        }
        let total = self.kappa1.max(self.kappa2) + self.kappa3 + self.kappa6;
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("kappa", format!("max(κ1,κ2) + κ3 + κ6 must be 1, got {total}")));
        }
        if !(self.alpha >= 0.0 && self.alpha < self.kappa3.min(self.kappa6)) {
            return Err(invalid("alpha", "need 0 ≤ α < min(κ3, κ6)"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid("rho", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsStatus {
    /// `θ > 0`: the cycle-pair bounds apply.
    Ok,
    /// `θ ≤ 0`: ρ is too small for the cycle machinery.
    ThetaNonPositive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstabilityConstants {
    pub params: KappaAlpha,
    pub loads: [f64; 6],
    pub rho0: f64,
    pub rho: f64,
    pub c_t: f64,
    pub c_l: f64,
    pub c_lt: f64,
    pub theta: f64,
    pub p: f64,
    pub epsilon: f64,
    pub beta_max: f64,
    pub beta_min: f64,
    pub delta_rho: f64,
    /// Limit of `δ(ρ)` as `ρ ↑ 1`.
    pub delta: f64,
    pub status: ConstantsStatus,
    /// Set when `α = 0`; the cycle-pair argument needs `α > 0`.
    pub alpha_zero: bool,
}

/// Lemma-style bounds of the broken-diamond instability argument, evaluated
/// as written. `α = 0` is accepted and flagged.
pub fn constants(params: &KappaAlpha) -> Result<InstabilityConstants> {
    params.validate()?;
    Ok(evaluate(params))
}

fn evaluate(params: &KappaAlpha) -> InstabilityConstants {
    let r = params.loads();
    let rho = params.rho;
    let rho0 = r[0].max(r[1]);
    let max45 = r[3].max(r[4]);
    let c_t = (1.0 / (1.0 - r[2] - r[5])) * (1.0 / (1.0 - rho0) + 1.0 / (1.0 - max45));
    let c_l = rho / (1.0 - max45);
    let c_lt = c_t * (2.0 + c_l);
    let theta = 1.0 - (1.0 - rho) * c_lt;
    let (epsilon, beta_max) = balance_bounds(&r);
    let kmin = params.kappa3.min(params.kappa6);
    let delta_rho = rho / (beta_max * (1.0 + beta_max) * (1.0 - rho * kmin + rho * params.alpha));
    let at_one = KappaAlpha { rho: 1.0, ..*params };
    let (_, beta_one) = balance_bounds(&at_one.loads());
    let delta = 1.0 / (beta_one * (1.0 + beta_one) * (1.0 + params.alpha - kmin));
    InstabilityConstants {
        params: *params,
        loads: r,
        rho0,
        rho,
        c_t,
        c_l,
        c_lt,
        theta,
        p: P_INCREASE,
        epsilon,
        beta_max,
        beta_min: 1.0 / beta_max,
        delta_rho,
        delta,
        status: if theta > 0.0 { ConstantsStatus::Ok } else { ConstantsStatus::ThetaNonPositive },
        alpha_zero: params.alpha == 0.0,
    }
}

fn balance_bounds(r: &[f64; 6]) -> (f64, f64) {
    let max45 = r[3].max(r[4]);
    let min45 = r[3].min(r[4]);
    let epsilon = r[1] / (2.0 * (r[1] + (r[2] + r[5]) * (1.0 - min45) / (1.0 - max45)));
    let beta_max = (r[2].max(r[5]) + (1.0 - r[1]) * (1.0 - epsilon) / epsilon) / min45;
    (epsilon, beta_max)
}

impl InstabilityConstants {
    /// `α_m = (1−p)θ^{−m} + p(θ+δ(ρ))^{−m}`; infinite when `θ ≤ 0`.
    pub fn alpha_m(&self, m: f64) -> f64 {
        if self.theta <= 0.0 {
            return f64::INFINITY;
        }
        (1.0 - self.p) * self.theta.powf(-m) + self.p * (self.theta + self.delta_rho).powf(-m)
    }

    /// Smallest ρ (to 1e-9) with `α_m(ρ) < 1` for the same `(κ, α)`, found by
    /// bisection; `None` if even `ρ = 1` fails.
    pub fn rho_star_hint(&self, m: f64) -> Option<f64> {
        let at = |rho: f64| evaluate(&KappaAlpha { rho, ..self.params }).alpha_m(m);
        if at(1.0) >= 1.0 {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if at(mid) < 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Human-readable caveats attached to reports.
    pub fn banners(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.alpha_zero {
            out.push("premise violated: alpha = 0 (the cycle-pair argument requires alpha > 0)");
        }
        if self.status == ConstantsStatus::ThetaNonPositive {
            out.push("theta <= 0: rho too small for the cycle-pair bounds");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sec6() -> KappaAlpha {
        KappaAlpha { kappa1: 0.4, kappa2: 0.4, kappa3: 0.4, kappa6: 0.2, alpha: 0.0, rho: 0.97 }
    }

    #[test]
    fn sec6_plug_in() {
        let c = constants(&sec6()).unwrap();
        assert!((c.rho0 - 0.388).abs() < 1e-12);
        // (1/0.418)·(1/0.612 + 1/0.612), by hand
        let hand = 3.267_973_856 / 0.418;
        assert!((c.c_t - hand).abs() < 1e-6, "{}", c.c_t);
        assert!((c.c_t - 7.820).abs() < 5e-3);
        assert!(c.alpha_zero);
        assert_eq!(c.status, ConstantsStatus::Ok);
        assert_eq!(c.banners().len(), 1);
        assert_eq!(c.beta_min * c.beta_max, 1.0);
    }

    #[test]
    fn composite_constants_follow_definitions() {
        let p = KappaAlpha { kappa1: 0.4, kappa2: 0.3, kappa3: 0.4, kappa6: 0.2, alpha: 0.05, rho: 0.99 };
        let c = constants(&p).unwrap();
        assert_eq!(c.c_lt, c.c_t * (2.0 + c.c_l));
        assert_eq!(c.theta, 1.0 - (1.0 - 0.99) * c.c_lt);
        assert_eq!(c.status, ConstantsStatus::Ok);
        assert!(c.delta_rho > 0.0 && c.delta_rho <= c.delta * 1.0001);
    }

    #[test]
    fn alpha_m_at_unit_load() {
        let p = KappaAlpha { kappa1: 0.4, kappa2: 0.4, kappa3: 0.4, kappa6: 0.2, alpha: 0.05, rho: 1.0 };
        let c = constants(&p).unwrap();
        assert_eq!(c.theta, 1.0);
        assert!((c.delta_rho - c.delta).abs() < 1e-12 * c.delta);
        for m in [1.5, 2.0, 5.0] {
            let want = (1.0 - 1.0 / 12.0) + (1.0 / 12.0) * (1.0 + c.delta).powf(-m);
            assert!((c.alpha_m(m) - want).abs() < 1e-15);
            assert!(c.alpha_m(m) < 1.0);
        }
        let star = c.rho_star_hint(2.0).unwrap();
        assert!(star < 1.0);
        let below = constants(&KappaAlpha { rho: star - 1e-6, ..p }).unwrap();
        assert!(below.alpha_m(2.0) >= 1.0);
    }

    #[test]
    fn small_load_reports_status() {
        let p = KappaAlpha { kappa1: 0.4, kappa2: 0.4, kappa3: 0.4, kappa6: 0.2, alpha: 0.05, rho: 0.5 };
        let c = constants(&p).unwrap();
        assert_eq!(c.status, ConstantsStatus::ThetaNonPositive);
        assert!(c.alpha_m(2.0).is_infinite());
    }

    #[test]
    fn degenerate_middle_loads() {
        // ρ4 = ρ5 = 0 (α = κ3 = κ6) is outside the validated range; evaluate directly.
        let p = KappaAlpha { kappa1: 0.5, kappa2: 0.5, kappa3: 0.25, kappa6: 0.25, alpha: 0.25, rho: 0.8 };
        let c = evaluate(&p);
        assert_eq!(c.c_l, 0.8);
        let want = (1.0 / (1.0 - 0.4)) * (1.0 / (1.0 - 0.4) + 1.0);
        assert!((c.c_t - want).abs() < 1e-12);
        assert!(constants(&p).is_err());
    }

    #[test]
    fn lambdas_round_trip() {
        let p = KappaAlpha { kappa1: 0.4, kappa2: 0.3, kappa3: 0.4, kappa6: 0.2, alpha: 0.05, rho: 0.9 };
        let q = KappaAlpha::from_lambdas(&p.loads()).unwrap();
        for (a, b) in [(p.kappa1, q.kappa1), (p.alpha, q.alpha), (p.rho, q.rho), (p.kappa6, q.kappa6)] {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_kappa() {
        let p = KappaAlpha { kappa1: 0.5, kappa2: 0.4, kappa3: 0.4, kappa6: 0.2, alpha: 0.0, rho: 0.9 };
        assert!(constants(&p).is_err());
    }
}
