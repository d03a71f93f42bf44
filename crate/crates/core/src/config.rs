//! Experiment configuration: one TOML file describes one experiment.

use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fastmix::RateFunctionSpec;
use crate::graph::{duplicate_graph, InterferenceGraph};
use crate::io::params_hash;
use crate::stochastic::{NodeDynamics, Release};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Prelimit,
    Fluid,
    Fastmix,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// `broken-diamond`, `diamond`, `complete-partite`, `complete`, `cycle`,
    /// `empty` or `star-of-cliques`.
    pub builtin: Option<String>,
    /// Graph file in the text format of [`InterferenceGraph::parse`].
    pub file: Option<PathBuf>,
    /// Component sizes for `diamond` (default `[2, 2, 2]`) and
    /// `complete-partite`.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Node count for `complete`, `cycle` and `empty`.
    pub n: Option<usize>,
    /// Replace the graph by its k-duplicate.
    pub duplicate: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReleaseKind {
    #[default]
    Power,
    Always,
    Capture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    /// One rate for every node, or one per base node.
    pub lambda: Vec<f64>,
    #[serde(default = "two")]
    pub gamma: f64,
    #[serde(default)]
    pub release: ReleaseKind,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub nu: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Pre-limit queues: one value for every node or one per base node.
    #[serde(default)]
    pub x: Vec<u64>,
    /// Fluid queues; empty draws `Q(0)` uniformly from the unit simplex.
    #[serde(default)]
    pub q: Vec<f64>,
    /// Initially active nodes, 1-based.
    #[serde(default)]
    pub active: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidSpec {
    #[serde(default = "half")]
    pub m2_to_m1: f64,
    #[serde(default = "half")]
    pub m3_to_m1: f64,
    #[serde(default)]
    pub allow_tie: bool,
    /// First period (1-based); the engine default when absent.
    pub start: Option<u8>,
    /// Stop after this many segments.
    pub segment_budget: Option<usize>,
}

impl Default for FluidSpec {
    fn default() -> Self {
        Self { m2_to_m1: 0.5, m3_to_m1: 0.5, allow_tie: false, start: None, segment_budget: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastmixSpec {
    #[serde(default = "unit_power")]
    pub h: RateFunctionSpec,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for FastmixSpec {
    fn default() -> Self {
        Self { h: unit_power(), dt: default_dt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "yes")]
    pub periods: bool,
    #[serde(default = "yes")]
    pub cycles: bool,
    #[serde(default = "two")]
    pub m: f64,
    /// Regression window in samples for pre-limit period detection.
    pub window: Option<usize>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self { periods: true, cycles: true, m: 2.0, window: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub engine: Engine,
    pub topology: TopologySpec,
    pub dynamics: DynamicsSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    /// Ticks for the pre-limit engine, scaled time otherwise.
    pub horizon: f64,
    /// Fluid scale `R`.
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "default_seeds", deserialize_with = "seeds_de")]
    pub seeds: Vec<u64>,
    /// Pre-limit recording stride in ticks.
    pub stride: Option<u64>,
    #[serde(default)]
    pub fluid: FluidSpec,
    #[serde(default)]
    pub fastmix: FastmixSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn default_dt() -> f64 {
    1e-3
}
fn unit_power() -> RateFunctionSpec {
    RateFunctionSpec::Power { gamma: 1.0 }
}
fn default_name() -> String {
    "experiment".into()
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn seeds_de<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        List(Vec<u64>),
        Text(String),
        One(u64),
    }
    match Raw::deserialize(d)? {
        Raw::List(v) => Ok(v),
        Raw::One(s) => Ok(vec![s]),
        Raw::Text(s) => parse_seeds(&s).map_err(serde::de::Error::custom),
    }
}

/// Parses `"7"`, `"1..100"` (inclusive), `"1..=100"` or `"1,4,9"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Parse(format!("cannot read seeds from `{text}`"));
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

/// A built graph together with what the engines need to know about it.
#[derive(Clone, Debug)]
pub struct BuiltTopology {
    pub graph: InterferenceGraph,
    /// Partite components, when the graph is a diamond.
    pub components: Option<Vec<Vec<usize>>>,
    pub broken_diamond: bool,
    /// Base node of every node when the graph is a k-duplicate.
    pub collection: Option<Vec<usize>>,
}

impl BuiltTopology {
    pub fn base_n(&self) -> usize {
        self.collection.as_ref().map_or(self.graph.n(), |c| c.iter().max().map_or(0, |m| m + 1))
    }

    fn base_of(&self, v: usize) -> usize {
        self.collection.as_ref().map_or(v, |c| c[v])
    }

    /// Expands a scalar or per-base-node list to one value per node.
    pub fn expand<T: Copy>(&self, values: &[T], field: &'static str) -> Result<Vec<T>> {
        let n = self.graph.n();
        match values.len() {
            1 => Ok(vec![values[0]; n]),
            len if len == n => Ok(values.to_vec()),
            len if len == self.base_n() => Ok((0..n).map(|v| values[self.base_of(v)]).collect()),
            len => Err(invalid(field, format!("expected 1, {} or {n} values, got {len}", self.base_n()))),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the configuration.
    pub fn hash(&self) -> String {
        params_hash(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "must not be empty"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive and finite"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid("r", "must be positive and finite"));
        }
        if self.dynamics.lambda.is_empty() {
            return Err(invalid("dynamics.lambda", "must not be empty"));
        }
        if self.dynamics.lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(invalid("dynamics.lambda", "rates must be finite and nonnegative"));
        }
        if self.stride == Some(0) {
            return Err(invalid("stride", "must be positive"));
        }
        if self.analysis.m <= 1.0 {
            return Err(invalid("analysis.m", "must exceed 1"));
        }
        let topo = self.build_topology()?;
        self.node_dynamics(&topo)?;
        if self.engine == Engine::Fluid && topo.components.is_none() && !topo.broken_diamond {
            return Err(invalid("topology", "the fluid engine supports diamond, complete-partite and broken-diamond"));
        }
        if let Some(&bad) = self.initial.active.iter().find(|&&a| a == 0 || a > topo.graph.n()) {
            return Err(invalid("initial.active", format!("node {bad} does not exist (nodes are 1-based)")));
        }
        Ok(())
    }

    pub fn build_topology(&self) -> Result<BuiltTopology> {
        let t = &self.topology;
        let (graph, components, broken) = match (&t.builtin, &t.file) {
            (Some(_), Some(_)) => return Err(invalid("topology", "give either builtin or file, not both")),
            (None, None) => return Err(invalid("topology", "needs builtin or file")),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid("topology.file", format!("{}: {e}", path.display())))?;
                (InterferenceGraph::parse(&text)?, None, false)
            }
            (Some(name), None) => {
                let n = || t.n.ok_or_else(|| invalid("topology.n", format!("`{name}` needs a node count")));
                match name.as_str() {
                    "broken-diamond" => (InterferenceGraph::broken_diamond(), None, true),
                    "diamond" => {
                        let sizes = if t.sizes.is_empty() { vec![2, 2, 2] } else { t.sizes.clone() };
                        let (g, c) = InterferenceGraph::complete_partite(&sizes)?;
                        (g, Some(c), false)
                    }
                    "complete-partite" => {
                        let (g, c) = InterferenceGraph::complete_partite(&t.sizes)?;
                        (g, Some(c), false)
                    }
                    "complete" => (InterferenceGraph::complete(n()?)?, None, false),
                    "cycle" => (InterferenceGraph::cycle(n()?)?, None, false),
                    "empty" => (InterferenceGraph::empty(n()?)?, None, false),
                    "star-of-cliques" => (InterferenceGraph::star_of_cliques(), None, false),
                    other => return Err(invalid("topology.builtin", format!("unknown topology `{other}`"))),
                }
            }
        };
        match t.duplicate {
            None => Ok(BuiltTopology { graph, components, broken_diamond: broken, collection: None }),
            Some(k) => {
                let base: Vec<usize> = (0..graph.n()).collect();
                let d = duplicate_graph(&graph, k, &base)?;
                Ok(BuiltTopology { graph: d.graph, components: None, broken_diamond: false, collection: Some(d.collection) })
            }
        }
    }

    pub fn node_dynamics(&self, topo: &BuiltTopology) -> Result<Vec<NodeDynamics>> {
        let d = &self.dynamics;
        let release = match d.release {
            ReleaseKind::Power if d.gamma.is_infinite() => Release::Capture,
            ReleaseKind::Power => Release::Power { gamma: d.gamma },
            ReleaseKind::Always => Release::Always,
            ReleaseKind::Capture => Release::Capture,
        };
        let lambdas = topo.expand(&d.lambda, "dynamics.lambda")?;
        let params: Vec<NodeDynamics> = lambdas
            .into_iter()
            .map(|l| NodeDynamics { mu: d.mu, nu: d.nu, ..NodeDynamics::new(l, 1.0).with_release(release) })
            .collect();
        params.iter().try_for_each(NodeDynamics::validate)?;
        Ok(params)
    }

    pub fn initial_x(&self, topo: &BuiltTopology) -> Result<Vec<u64>> {
        if self.initial.x.is_empty() {
            return Ok(vec![0; topo.graph.n()]);
        }
        topo.expand(&self.initial.x, "initial.x")
    }

    /// Configured fluid start, or a uniform draw from the unit simplex.
    pub fn initial_q(&self, topo: &BuiltTopology, seed: u64) -> Result<Vec<f64>> {
        if !self.initial.q.is_empty() {
            return topo.expand(&self.initial.q, "initial.q");
        }
        Ok(random_simplex(topo.graph.n(), seed))
    }
}

/// Uniform point on `{q ≥ 0, Σq = 1}` from normalised exponential draws.
pub fn random_simplex(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_51a9);
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}
