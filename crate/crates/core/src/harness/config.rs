//! Experiment configuration: a JSON document describing the graph, the
//! runs to execute, and the analyses to perform on them.
//!
//! Agent labels in config files are 1-based, matching the graph file
//! format; they are converted to 0-based indices at the parsing boundary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::{GraphFile, WeightedDigraph};
use crate::harness::presets::{default_delta, default_horizon};
use crate::harness::HarnessError;
use crate::protocols::{Algorithm, M1NoiseConfig, PerturbationSignal, ProtocolSpec};

/// Where the experiment's graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphSource {
    /// Path to a JSON graph file, relative to the config file's directory.
    Path(String),
    /// Graph written directly into the config.
    Inline(GraphFile<f64>),
}

/// One protocol run. `delta` and `horizon` fall back to the graph's
/// defaults (45% of the stability bound; decay below 1e-8).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub label: String,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub horizon: Option<usize>,
    pub reference: Vec<f64>,
    /// Ignored (forced to the reference) for algorithms that start there.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    #[serde(default)]
    pub perturbation: Option<Vec<PerturbationSignal<f64>>>,
    #[serde(default)]
    pub noise: Option<M1NoiseConfig<f64>>,
}

impl RunConfig {
    /// Resolves defaults against the graph and builds the full run spec.
    pub fn to_spec(&self, g: &WeightedDigraph<f64>) -> Result<ProtocolSpec<f64>, HarnessError> {
        let n = g.node_count();
        let delta = match self.delta {
            Some(d) => d,
            None => default_delta(g)?,
        };
        let horizon = self.horizon.unwrap_or_else(|| default_horizon(delta));
        let reference = self.reference.clone();
        let x0 = self.x0.clone().unwrap_or_else(|| reference.clone());
        let v0 = self.v0.clone().unwrap_or_else(|| vec![0.0; n]);
        let spec = match self.algorithm {
            Algorithm::Alg1 => ProtocolSpec::alg1(delta, horizon, reference),
            Algorithm::Alg2 => ProtocolSpec::alg2_with_v0(delta, horizon, reference, x0, v0),
            Algorithm::Alg3 => ProtocolSpec::alg3(delta, horizon, reference, x0, v0),
            Algorithm::Alg2Perturbed => {
                let signals = self.perturbation.clone().ok_or_else(|| {
                    HarnessError::Config(format!(
                        "run '{}' needs perturbation signals",
                        self.label
                    ))
                })?;
                let mut spec =
                    ProtocolSpec::alg2_perturbed(delta, horizon, reference, x0, signals);
                spec.v0 = v0;
                spec
            }
            Algorithm::M1 => {
                let noise = self.noise.ok_or_else(|| {
                    HarnessError::Config(format!("run '{}' needs a noise config", self.label))
                })?;
                ProtocolSpec::m1(delta, horizon, reference, noise)
            }
        };
        Ok(spec)
    }
}

/// Which reconstruction attacks to attempt per target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct AttackSelection {
    #[serde(default)]
    pub recovery: bool,
    #[serde(default)]
    pub observer: bool,
}

/// Indistinguishability probing: one construction per (target, e) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndistConfig {
    /// Deviations to plant at the witness; each must be nonzero.
    pub e_grid: Vec<f64>,
}

/// Monte-Carlo batch settings; run m uses seed `base_seed + m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub runs: usize,
    pub base_seed: u64,
}

/// Root experiment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub runs: Vec<RunConfig>,
    /// 1-based label of the eavesdropping agent, if analyses are requested.
    #[serde(default)]
    pub adversary: Option<usize>,
    /// 1-based labels of the agents to attack/probe.
    #[serde(default)]
    pub targets: Vec<usize>,
    #[serde(default)]
    pub attacks: AttackSelection,
    #[serde(default)]
    pub indistinguishability: Option<IndistConfig>,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloConfig>,
    /// Output directory; overridable by CLI flag or environment.
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| {
            HarnessError::Config(format!(
                "config parse error at line {}, column {}: {}",
                e.line(),
                e.column(),
                e
            ))
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Loads the graph, resolving a relative path against `base_dir`.
    pub fn load_graph(&self, base_dir: &Path) -> Result<WeightedDigraph<f64>, HarnessError> {
        let file: GraphFile<f64> = match &self.graph {
            GraphSource::Inline(g) => g.clone(),
            GraphSource::Path(p) => {
                let path = base_dir.join(p);
                let text = fs::read_to_string(&path).map_err(|e| {
                    HarnessError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    HarnessError::Config(format!(
                        "graph parse error in {} at line {}, column {}: {}",
                        path.display(),
                        e.line(),
                        e.column(),
                        e
                    ))
                })?
            }
        };
        Ok(file.into_graph()?)
    }

    /// 0-based adversary index, validated against the graph.
    pub fn adversary_index(&self, n: usize) -> Result<Option<usize>, HarnessError> {
        match self.adversary {
            None => Ok(None),
            Some(label) => {
                if label == 0 || label > n {
                    return Err(HarnessError::Config(format!(
                        "adversary label {label} outside 1..={n}"
                    )));
                }
                Ok(Some(label - 1))
            }
        }
    }

    /// 0-based target indices, validated against the graph.
    pub fn target_indices(&self, n: usize) -> Result<Vec<usize>, HarnessError> {
        self.targets
            .iter()
            .map(|&label| {
                if label == 0 || label > n {
                    Err(HarnessError::Config(format!("target label {label} outside 1..={n}")))
                } else {
                    Ok(label - 1)
                }
            })
            .collect()
    }
}
