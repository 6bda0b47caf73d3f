//! JSON-facing configuration types and their conversion into runnable
//! objects.
//!
//! A scenario is a single JSON document with camelCase keys. Node numbers
//! are 1-based and arcs are written as `"from -> to"` strings, matching the
//! way the topologies are usually drawn. Initial conditions accept either a
//! fixed vector or `{"radius": r}` for a uniform draw from the cube
//! `[-r, r]^n`. Parsed configs serialize back to an equivalent document,
//! which is what makes the manifest's configuration echo re-parseable.

use consensus_observer::graph::DirectedGraph;
use consensus_observer::linalg::Matrix;
use consensus_observer::models;
use consensus_observer::sim::{
    Coupling, FollowerSetup, GainSpec, ObserverInit, Scenario, SimMode, VectorInit,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_dt() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    20.0
}

fn default_exponent() -> f64 {
    2.0
}

fn default_tau_scale() -> f64 {
    1.0
}

/// One simulation run: leader, communication graph, follower fleet,
/// observer initialization, gain design knobs, and the integration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ScenarioConfig {
    /// Leader model name: "vdp", "esslm", or "example1".
    pub leader: String,
    pub leader_init: VectorInitConfig,
    pub graph: GraphConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub followers: Vec<FollowerConfig>,
    pub observer_init: ObserverInitConfig,
    #[serde(default)]
    pub gain: GainConfig,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    pub mode: ModeConfig,
}

impl ScenarioConfig {
    /// Resolves names and builds the runnable scenario. Mistakes in the
    /// document (unknown models, malformed arcs, contradictory gain
    /// choices, an unreachable graph) all surface as configuration errors.
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let leader =
            models::leader_by_name(&self.leader).map_err(|e| CliError::Config(e.to_string()))?;
        let graph = self.graph.build()?;
        let mut followers = Vec::with_capacity(self.followers.len());
        for slot in &self.followers {
            let model = models::follower_by_name(&slot.model, slot.exponent)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let poles = slot
                .poles
                .as_ref()
                .map(|ps| ps.iter().map(|&p| Complex64::new(p, 0.0)).collect());
            followers.push(FollowerSetup {
                model,
                init: slot.init.build(),
                poles,
            });
        }
        Ok(Scenario {
            leader_init: self.leader_init.build(),
            graph,
            followers,
            observer_init: self.observer_init.build()?,
            gain: self.gain.build(leader.state_dim())?,
            leader,
            dt: self.dt,
            horizon: self.horizon,
            seed: self.seed,
            mode: self.mode.to_mode(),
        })
    }
}

/// Directed communication topology with 1-based labels: the arc "2 -> 3"
/// carries node 2's estimate to node 3, and `pinned` lists the nodes that
/// also read the leader's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct GraphConfig {
    pub nodes: usize,
    pub arcs: Vec<String>,
    pub pinned: Vec<usize>,
}

impl GraphConfig {
    pub fn build(&self) -> Result<DirectedGraph, CliError> {
        let mut arcs = Vec::with_capacity(self.arcs.len());
        for text in &self.arcs {
            arcs.push(parse_arc(text, self.nodes)?);
        }
        let pinned = self
            .pinned
            .iter()
            .map(|&p| to_index(p, self.nodes, "pinned node"))
            .collect::<Result<Vec<_>, _>>()?;
        DirectedGraph::from_arcs(self.nodes, &arcs, &pinned)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

fn to_index(label: usize, n: usize, what: &str) -> Result<usize, CliError> {
    if label == 0 || label > n {
        return Err(CliError::Config(format!(
            "{what} {label} is outside 1..={n}"
        )));
    }
    Ok(label - 1)
}

fn parse_arc(text: &str, n: usize) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Config(format!("arc '{text}' must look like \"1 -> 2\""));
    let (from, to) = text.split_once("->").ok_or_else(bad)?;
    let from: usize = from.trim().parse().map_err(|_| bad())?;
    let to: usize = to.trim().parse().map_err(|_| bad())?;
    Ok((
        to_index(from, n, "arc tail")?,
        to_index(to, n, "arc head")?,
    ))
}

/// An initial vector: fixed coordinates, or a seeded uniform draw from
/// `[-radius, radius]` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorInitConfig {
    Random { radius: f64 },
    Fixed(Vec<f64>),
}

impl VectorInitConfig {
    fn build(&self) -> VectorInit {
        match self {
            VectorInitConfig::Fixed(v) => VectorInit::Fixed(v.clone()),
            VectorInitConfig::Random { radius } => VectorInit::Random { radius: *radius },
        }
    }
}

/// Observer start: the string "exact" seeds every local copy on the
/// leader, `{"radius": r}` draws them, and a nested array gives one vector
/// per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObserverInitConfig {
    Random { radius: f64 },
    Keyword(String),
    PerNode(Vec<Vec<f64>>),
}

impl ObserverInitConfig {
    fn build(&self) -> Result<ObserverInit, CliError> {
        match self {
            ObserverInitConfig::Keyword(word) if word == "exact" => Ok(ObserverInit::Exact),
            ObserverInitConfig::Keyword(word) => Err(CliError::Config(format!(
                "observer init '{word}' is not recognized; use \"exact\", {{\"radius\": r}}, or one vector per node"
            ))),
            ObserverInitConfig::Random { radius } => Ok(ObserverInit::Random { radius: *radius }),
            ObserverInitConfig::PerNode(rows) => Ok(ObserverInit::PerNode(rows.clone())),
        }
    }
}

/// Observer gain design knobs. The Riccati weights default to identity and
/// `qScale`/`rScale` rescale them. The coupling gain comes either as
/// `cMultiplier` (times the graph's minimum admissible value) or as an
/// explicit `c`; setting both is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct GainConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_multiplier: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

impl GainConfig {
    pub(crate) fn build(&self, state_dim: usize) -> Result<GainSpec, CliError> {
        let coupling = match (self.c_multiplier, self.c) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "gain sets both cMultiplier and c; choose one".into(),
                ))
            }
            (Some(m), None) => Coupling::Multiplier(m),
            (None, Some(c)) => Coupling::Explicit(c),
            (None, None) => Coupling::Multiplier(1.0),
        };
        let scaled = |s: Option<f64>| s.map(|v| Matrix::identity(state_dim).scale(v));
        Ok(GainSpec {
            q: scaled(self.q_scale),
            r: scaled(self.r_scale),
            coupling,
            mu: self.mu.unwrap_or(1.0),
        })
    }
}

/// One follower slot. `exponent` only matters for the polynomial plant,
/// and `poles` (real, strictly negative) overrides the default tracking
/// poles for single-output plants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct FollowerConfig {
    /// Follower model name: "poly", "zero_dyn", or "esslm_follower".
    pub model: String,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    pub init: VectorInitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poles: Option<Vec<f64>>,
}

/// Which loop to run; mirrors the simulation engine's modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    ObserverOnly,
    DistributedControl,
    OracleControl,
    BaselineObserver,
}

impl ModeConfig {
    pub fn to_mode(self) -> SimMode {
        match self {
            ModeConfig::ObserverOnly => SimMode::ObserverOnly,
            ModeConfig::DistributedControl => SimMode::DistributedControl,
            ModeConfig::OracleControl => SimMode::OracleControl,
            ModeConfig::BaselineObserver => SimMode::BaselineObserver,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeConfig::ObserverOnly => "observer-only",
            ModeConfig::DistributedControl => "distributed-control",
            ModeConfig::OracleControl => "oracle-control",
            ModeConfig::BaselineObserver => "baseline-observer",
        }
    }
}

/// Standalone gain-design request: a model, a graph, the usual knobs, and
/// an optional per-output box over which the convergence certificate grids
/// the injection's slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct GainCmdConfig {
    pub model: String,
    pub graph: GraphConfig,
    #[serde(default)]
    pub gain: GainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_box: Option<Vec<(f64, f64)>>,
}

/// Geometry-check request. `tauScale` multiplies the model's registered
/// dual fields before checking, which is how a deliberately broken
/// normalization is exercised from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct GeometryConfig {
    pub model: String,
    #[serde(default = "default_tau_scale")]
    pub tau_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}
