//! Shipped experiment presets.

use crate::analysis::KappaAlpha;
use crate::config::{
    AnalysisSpec, DynamicsSpec, Engine, ExperimentConfig, FastmixSpec, FluidSpec, InitialSpec, ReleaseKind,
    TopologySpec,
};
use crate::error::{invalid, Result};

pub const PRESETS: &[&str] = &["paper-sec6", "diamond-stable", "duplicate-k"];

/// `κ = (0.4, 0.4, 0.4, 0.2)`, `α = 0`, `ρ = 0.97`.
pub fn sec6_params() -> KappaAlpha {
    KappaAlpha { kappa1: 0.4, kappa2: 0.4, kappa3: 0.4, kappa6: 0.2, alpha: 0.0, rho: 0.97 }
}

/// `(0.388, 0.388, 0.388, 0.388, 0.194, 0.194)`.
pub fn sec6_lambdas() -> Vec<f64> {
    sec6_params().loads().to_vec()
}

fn base(name: &str, engine: Engine, builtin: &str, lambda: Vec<f64>, horizon: f64, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        engine,
        topology: TopologySpec { builtin: Some(builtin.into()), ..Default::default() },
        dynamics: DynamicsSpec { lambda, gamma: 2.0, release: ReleaseKind::Power, mu: 1.0, nu: 1.0 },
        initial: InitialSpec::default(),
        horizon,
        r: 1.0,
        seeds,
        stride: None,
        fluid: FluidSpec::default(),
        fastmix: FastmixSpec::default(),
        analysis: AnalysisSpec::default(),
    }
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        // Broken diamond under γ = 2 back-off, all queues at 500.
        "paper-sec6" => {
            let mut c = base(name, Engine::Prelimit, "broken-diamond", sec6_lambdas(), 5e7, (1..=10).collect());
            c.initial.x = vec![500];
            c.r = 500.0;
            c
        }
        // Three-component diamond at ρ = 0.9, random unit-mass start.
        "diamond-stable" => base(name, Engine::Fluid, "diamond", vec![0.3], 100.0, (1..=100).collect()),
        // 2-duplicate of the broken diamond with γ = 1/2 > 1/3.
        "duplicate-k" => {
            let mut c = base(name, Engine::Prelimit, "broken-diamond", sec6_lambdas(), 2e7, (1..=4).collect());
            c.topology.duplicate = Some(2);
            c.dynamics.gamma = 0.5;
            c.initial.x = vec![500];
            c.r = 500.0;
            c
        }
        other => {
            return Err(invalid("preset", format!("unknown preset `{other}`; known: {}", PRESETS.join(", "))));
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
