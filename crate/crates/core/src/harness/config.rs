//! Experiment configuration, loaded from TOML. Every key is optional and defaults to the
//! reference setup (8 services, 200 vehicles, 6 edge nodes, 600 time units).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, DEFAULT_TBR_THRESHOLD_MS};
use crate::compute::{profiles_from, ComputeConfig, ComputeModel, ServiceProfile};
use crate::critic::{DecisionPolicy, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::MetricOptions;
use crate::scenario::{grid_edge_nodes, Area, EdgeNode, ScenarioConfig};
use crate::solver::{InstancePolicy, ObjectiveVariant, SearchStrategy, SolverOptions};

pub const DRLD_LABEL: &str = "DRLD-SP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub area_width_m: f64,
    pub area_height_m: f64,
    /// One entry per edge node, laid out row-major on a centred grid.
    pub capacities: Vec<u32>,
    pub node_spacing_m: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let area = Area::default();
        NetworkConfig {
            area_width_m: area.width,
            area_height_m: area.height,
            capacities: vec![60, 70, 80, 90, 100, 100],
            node_spacing_m: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServicesConfig {
    pub resources: Vec<u32>,
    pub thresholds_ms: Vec<f64>,
}

impl Default for ServicesConfig {
    fn default() -> Self {
        ServicesConfig {
            resources: vec![10, 15, 20, 25, 30, 35, 40, 45],
            thresholds_ms: vec![10.0, 10.0, 10.0, 10.0, 12.0, 12.0, 12.0, 12.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub alphas: Vec<f64>,
    pub epsilon: f64,
    pub max_candidates: usize,
    pub variant: ObjectiveVariant,
    pub strict_mapping: bool,
    pub strategy: SearchStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            alphas: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            epsilon: o.epsilon,
            max_candidates: o.max_candidates,
            variant: o.variant,
            strict_mapping: o.strict_mapping,
            strategy: o.strategy,
        }
    }
}

impl SolverConfig {
    pub fn options(&self, alpha: f64) -> SolverOptions {
        SolverOptions {
            alpha,
            epsilon: self.epsilon,
            max_candidates: self.max_candidates,
            variant: self.variant,
            strict_mapping: self.strict_mapping,
            instances: InstancePolicy::OnDemand,
            strategy: self.strategy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Scheme labels: `DRLD-SP`, `SSP_min`, `SSP_max`, `AR_min`, `AR_max`, `TBR_min`, `TBR_max`.
    pub schemes: Vec<String>,
    pub seeds: Vec<u64>,
    pub policy: DecisionPolicy,
    pub tbr_threshold_ms: f64,
    pub metrics: MetricOptions,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            schemes: std::iter::once(DRLD_LABEL)
                .chain(BaselineKind::ALL.iter().map(|k| k.label()))
                .map(String::from)
                .collect(),
            seeds: vec![1, 2, 3, 4, 5],
            policy: DecisionPolicy::default(),
            tbr_threshold_ms: DEFAULT_TBR_THRESHOLD_MS,
            metrics: MetricOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeSpec {
    Drld,
    Baseline(BaselineKind),
}

impl SchemeSpec {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeSpec::Drld => DRLD_LABEL,
            SchemeSpec::Baseline(k) => k.label(),
        }
    }

    pub fn parse(label: &str, tbr_threshold_ms: f64) -> Result<Self> {
        if label.eq_ignore_ascii_case(DRLD_LABEL) {
            return Ok(SchemeSpec::Drld);
        }
        let mut kind: BaselineKind = label.parse().map_err(|_| {
            Error::config(format!(
                "unknown scheme {label:?}; expected one of {DRLD_LABEL}, {}",
                BaselineKind::ALL.map(|k| k.label()).join(", ")
            ))
        })?;
        kind.tbr_threshold_ms = tbr_threshold_ms;
        Ok(SchemeSpec::Baseline(kind))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub network: NetworkConfig,
    pub services: ServicesConfig,
    pub compute: ComputeConfig,
    pub solver: SolverConfig,
    pub train: TrainConfig,
    pub evaluation: EvaluationConfig,
    /// Default output directory of `evaluate`.
    pub output_dir: Option<PathBuf>,
}

/// Everything derived from the configuration that stays fixed across runs.
#[derive(Debug, Clone)]
pub struct Environment {
    pub area: Area,
    pub nodes: Vec<EdgeNode>,
    pub profiles: Vec<ServiceProfile>,
    pub model: ComputeModel,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].bytes().filter(|&b| b == b'\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()
            .map_err(|e| Error::config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("invalid configuration: "))))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn area(&self) -> Result<Area> {
        Area::new(self.network.area_width_m, self.network.area_height_m)
    }

    pub fn environment(&self) -> Result<Environment> {
        let area = self.area()?;
        let nodes = grid_edge_nodes(&area, &self.network.capacities, self.network.node_spacing_m)?;
        let profiles = profiles_from(&self.services.resources, &self.services.thresholds_ms)?;
        let model = ComputeModel::new(self.compute.clone(), area)?;
        Ok(Environment {
            area,
            nodes,
            profiles,
            model,
        })
    }

    pub fn schemes(&self) -> Result<Vec<SchemeSpec>> {
        self.evaluation
            .schemes
            .iter()
            .map(|s| SchemeSpec::parse(s, self.evaluation.tbr_threshold_ms))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.services.resources.len() != self.scenario.service_count {
            return Err(Error::config(format!(
                "services.resources lists {} services but scenario.service_count is {}",
                self.services.resources.len(),
                self.scenario.service_count
            )));
        }
        self.environment()?;
        if self.solver.alphas.is_empty() {
            return Err(Error::config("solver.alphas must not be empty"));
        }
        for &a in &self.solver.alphas {
            self.solver.options(a).validate()?;
        }
        self.train.validate()?;
        if self.evaluation.seeds.is_empty() {
            return Err(Error::config("evaluation.seeds must not be empty"));
        }
        if let DecisionPolicy::Sticky { q_margin } = self.evaluation.policy {
            if !(q_margin >= 0.0) {
                return Err(Error::config(format!("evaluation.policy.q_margin must be non-negative, got {q_margin}")));
            }
        }
        self.schemes()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_setup() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let env = cfg.environment().unwrap();
        assert_eq!(env.nodes.len(), 6);
        assert_eq!(env.profiles.len(), 8);
        assert_eq!(cfg.schemes().unwrap().len(), 7);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = ExperimentConfig::from_toml("[scenario]\nseed = 7\n[solver]\nalphas = [0.5]\n").unwrap();
        assert_eq!(cfg.scenario.seed, 7);
        assert_eq!(cfg.scenario.vehicle_count, 200);
        assert_eq!(cfg.solver.alphas, vec![0.5]);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("[solver]\nalphas = [1.5]\n").is_err());
        assert!(ExperimentConfig::from_toml("[evaluation]\nseeds = []\n").is_err());
        assert!(ExperimentConfig::from_toml("[evaluation]\nschemes = [\"SSP_mid\"]\n").is_err());
        assert!(ExperimentConfig::from_toml("[services]\nresources = [10]\nthresholds_ms = [10.0]\n").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
    }
}
