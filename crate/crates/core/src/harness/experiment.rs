//! Training and evaluation runs over seeds, objective weights and schemes.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{Environment, ExperimentConfig, SchemeSpec};
use crate::baselines::{self, BaselineInputs};
use crate::critic::{run_drld, train, Agent, Checkpoint, CriticNetwork, FeatureEncoder, TrainingLog, TrainingSetup};
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricRow, MetricsReport, RowId, RunTrace};
use crate::scenario::{generate_scenario, ScenarioConfig, StateObservation};

/// The generated scenario for one seed.
pub fn scenario_for_seed(config: &ExperimentConfig, env: &Environment, seed: u64) -> Result<Vec<StateObservation>> {
    let sc = ScenarioConfig {
        seed,
        ..config.scenario.clone()
    };
    generate_scenario(&sc, &env.area)
}

pub fn encoder_for(config: &ExperimentConfig, env: &Environment) -> FeatureEncoder {
    FeatureEncoder::new(env.profiles.len(), env.nodes.len(), config.scenario.vehicle_count, env.area)
}

pub fn run_training(
    config: &ExperimentConfig,
    env: &Environment,
    observations: &[StateObservation],
) -> Result<(Checkpoint, TrainingLog)> {
    let encoder = encoder_for(config, env);
    let setup = TrainingSetup {
        observations,
        nodes: &env.nodes,
        profiles: &env.profiles,
        model: &env.model,
        encoder: encoder.clone(),
        solver: config.solver.options(config.solver.alphas[0]),
    };
    let (net, log) = train(&setup, &config.train)?;
    Ok((Checkpoint::new(&net, &encoder, &config.train), log))
}

pub const TRAINING_LOG_HEADER: &str = "episode,alpha,mean_loss,updates,skipped_updates,mean_reward_ms,transitions";

/// One row per episode; `mean_loss` is empty for episodes without an update.
pub fn training_log_csv(log: &TrainingLog) -> String {
    let mut out = String::from(TRAINING_LOG_HEADER);
    out.push('\n');
    for e in &log.episodes {
        let loss = e.mean_loss.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.episode, e.alpha, loss, e.updates, e.skipped_updates, e.mean_reward_ms, e.transitions
        );
    }
    out
}

/// One (scheme, alpha, seed) evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub scheme: SchemeSpec,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    /// `None` when the scheme could not produce a feasible run.
    pub report: Option<MetricsReport>,
    pub trace: Option<RunTrace>,
    pub note: Option<String>,
}

impl CellOutcome {
    pub fn rows(&self) -> Vec<MetricRow> {
        let label = self.cell.scheme.label();
        match &self.report {
            Some(r) => r.rows(label, self.cell.alpha, self.cell.seed),
            None => vec![MetricRow {
                scheme: label.to_string(),
                alpha: self.cell.alpha,
                seed: self.cell.seed,
                metric: Metric::FeasibleFraction,
                id: RowId::All,
                t: None,
                value: 0.0,
            }],
        }
    }
}

pub struct Evaluation<'a> {
    pub config: &'a ExperimentConfig,
    pub env: &'a Environment,
    /// `(seed, observations)` per scenario.
    pub scenarios: &'a [(u64, Vec<StateObservation>)],
    pub checkpoint: Option<&'a Checkpoint>,
    /// Keep per-tick traces in the outcomes.
    pub keep_traces: bool,
}

impl Evaluation<'_> {
    pub fn cells(&self, schemes: &[SchemeSpec], alphas: &[f64]) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &scheme in schemes {
            for &alpha in alphas {
                for (seed, _) in self.scenarios {
                    cells.push(Cell {
                        scheme,
                        alpha,
                        seed: *seed,
                    });
                }
            }
        }
        cells
    }

    fn check_checkpoint(&self, schemes: &[SchemeSpec]) -> Result<Option<CriticNetwork>> {
        if !schemes.iter().any(|s| matches!(s, SchemeSpec::Drld)) {
            return Ok(None);
        }
        let ck = self
            .checkpoint
            .ok_or_else(|| Error::config("evaluating DRLD-SP requires a critic checkpoint"))?;
        if ck.encoder.service_count != self.env.profiles.len() || ck.encoder.node_count != self.env.nodes.len() {
            return Err(Error::config(format!(
                "checkpoint was trained for {} services on {} nodes, configuration has {} on {}",
                ck.encoder.service_count,
                ck.encoder.node_count,
                self.env.profiles.len(),
                self.env.nodes.len()
            )));
        }
        Ok(Some(ck.network()))
    }

    /// Run every cell. Cells execute in parallel; outcomes come back in cell order.
    pub fn run(&self, schemes: &[SchemeSpec], alphas: &[f64]) -> Result<Vec<CellOutcome>> {
        let network = self.check_checkpoint(schemes)?;
        let cells = self.cells(schemes, alphas);
        cells
            .par_iter()
            .map(|&cell| self.run_cell(cell, network.as_ref()))
            .collect()
    }

    fn run_cell(&self, cell: Cell, network: Option<&CriticNetwork>) -> Result<CellOutcome> {
        let (_, observations) = self
            .scenarios
            .iter()
            .find(|(s, _)| *s == cell.seed)
            .expect("cells are built from the scenario list");
        let env = self.env;
        let options = self.config.solver.options(cell.alpha);
        let result = match cell.scheme {
            SchemeSpec::Drld => {
                let ck = self.checkpoint.expect("checked above");
                let agent = Agent {
                    network: network.expect("checked above"),
                    encoder: &ck.encoder,
                };
                run_drld(
                    &agent,
                    observations,
                    &env.nodes,
                    &env.profiles,
                    &env.model,
                    &options,
                    self.config.evaluation.policy,
                )
            }
            SchemeSpec::Baseline(kind) => baselines::run(
                kind,
                &BaselineInputs {
                    observations,
                    nodes: &env.nodes,
                    profiles: &env.profiles,
                    model: &env.model,
                    solver: &options,
                },
            ),
        };
        match result {
            Ok(trace) => {
                let report = MetricsReport::from_trace(
                    &trace,
                    &env.profiles,
                    env.model.capacity(),
                    self.config.evaluation.metrics,
                );
                Ok(CellOutcome {
                    cell,
                    report: Some(report),
                    trace: self.keep_traces.then_some(trace),
                    note: None,
                })
            }
            Err(Error::Infeasible(msg)) => Ok(CellOutcome {
                cell,
                report: None,
                trace: None,
                note: Some(msg),
            }),
            Err(e) => Err(e),
        }
    }
}

/// All rows of a set of outcomes in canonical order.
pub fn collect_rows(outcomes: &[CellOutcome]) -> Vec<MetricRow> {
    let mut rows: Vec<MetricRow> = outcomes.iter().flat_map(CellOutcome::rows).collect();
    rows.sort_by(MetricRow::cmp_order);
    rows
}
