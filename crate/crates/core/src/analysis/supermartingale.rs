use serde::Serialize;

use super::constants::InstabilityConstants;
use crate::error::{invalid, Error, Result};
use crate::stats::{bootstrap, linear_fit, mean, Interval, BOOTSTRAP_RESAMPLES};

/// Minimum number of pair transitions `L_k → L_{k+1}`.
pub const MIN_PAIRS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupermartingaleReport {
    pub pairs: usize,
    pub m: f64,
    /// Mean of `(L_{k+1}/L_k)^{−m}`, the empirical `E[L_{k+1}^{−m}]/L_k^{−m}`.
    pub ratio: f64,
    pub ci: Interval,
    pub alpha_m: f64,
    /// `ci.hi ≤ α_m`.
    pub pass: bool,
    /// `(T_k, L_k/T_k^{1/m})` over the last decade of `k`.
    pub growth: Vec<(f64, f64)>,
    /// Slope of `ln(L/T^{1/m})` against `ln T` over that decade.
    pub growth_slope: f64,
    /// Fraction of consecutive increases on a geometric grid of `T`.
    pub log_grid_increasing: f64,
    pub trend_increasing: bool,
    pub banners: Vec<String>,
}

/// Empirical check of `E[L_{k+1}^{−m} | L_k] ≤ α_m L_k^{−m}` (conditioning on
/// `L_k` only) and of the finite-horizon growth of `L(T)/T^{1/m}`.
pub fn supermartingale_diagnostic(
    t_k: &[f64],
    l_k: &[f64],
    m: f64,
    consts: &InstabilityConstants,
    seed: u64,
) -> Result<SupermartingaleReport> {
    if t_k.len() != l_k.len() {
        return Err(invalid("t_k", "T_k and L_k must have equal length"));
    }
    if !(m > 1.0) {
        return Err(invalid("m", "must exceed 1"));
    }
    let pairs = l_k.len().saturating_sub(1);
    if pairs < MIN_PAIRS {
        return Err(Error::Insufficient { what: "cycle pairs", needed: MIN_PAIRS, got: pairs });
    }
    let ratios: Vec<f64> = l_k.windows(2).map(|w| (w[1] / w[0]).powf(-m)).collect();
    let ratio = mean(&ratios);
    let ci = bootstrap(&ratios, BOOTSTRAP_RESAMPLES, 0.95, seed, mean);
    let alpha_m = consts.alpha_m(m);

    let from = l_k.len() - l_k.len() / 10 - 1;
    let growth: Vec<(f64, f64)> = t_k[from..]
        .iter()
        .zip(&l_k[from..])
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, &l)| (t, l / t.powf(1.0 / m)))
        .collect();
    let lx: Vec<f64> = growth.iter().map(|g| g.0.ln()).collect();
    let ly: Vec<f64> = growth.iter().map(|g| g.1.ln()).collect();
    let growth_slope = if growth.len() >= 2 { linear_fit(&lx, &ly).slope } else { f64::NAN };
    let log_grid_increasing = log_grid_fraction(&growth, 8);

    let mut banners: Vec<String> = consts.banners().into_iter().map(String::from).collect();
    banners.push("finite-horizon growth diagnostic; not a limit statement".into());
    Ok(SupermartingaleReport {
        pairs,
        m,
        ratio,
        ci,
        alpha_m,
        pass: ci.hi <= alpha_m,
        growth,
        growth_slope,
        log_grid_increasing,
        trend_increasing: growth_slope > 0.0,
        banners,
    })
}

/// Samples `points` geometrically spaced `T` values from the series (nearest
/// earlier record) and returns the fraction of steps that increase.
fn log_grid_fraction(series: &[(f64, f64)], points: usize) -> f64 {
    if series.len() < 2 || points < 2 {
        return f64::NAN;
    }
    let (a, b) = (series[0].0.ln(), series[series.len() - 1].0.ln());
    let values: Vec<f64> = (0..points)
        .map(|j| {
            let t = (a + (b - a) * j as f64 / (points - 1) as f64).exp();
            let idx = series.partition_point(|s| s.0 <= t * (1.0 + 1e-12)).max(1) - 1;
            series[idx].1
        })
        .collect();
    let ups = values.windows(2).filter(|w| w[1] > w[0]).count();
    ups as f64 / (points - 1) as f64
}
