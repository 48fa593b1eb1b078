//! Comparison schemes: a one-time static placement (SSP), always-reoptimize (AR) and
//! threshold-based reoptimization (TBR), each with one (`min`) or two (`max`) instances
//! deployed per service at all times.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compute::{ComputeModel, ServiceProfile};
use crate::error::{Error, Result};
use crate::metrics::{RunTrace, TraceStep};
use crate::scenario::{EdgeNode, StateObservation};
use crate::solver::{service_delays, InstancePolicy, PlacementMatrix, PlacementProblem, SolverOptions, SolverReport};

pub const DEFAULT_TBR_THRESHOLD_MS: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Ssp,
    Ar,
    Tbr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstanceMode {
    Min,
    Max,
}

impl InstanceMode {
    pub fn instances(self) -> u32 {
        match self {
            InstanceMode::Min => 1,
            InstanceMode::Max => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineKind {
    pub scheme: Scheme,
    pub mode: InstanceMode,
    /// Delay (ms) above which TBR re-solves. Ignored by the other schemes.
    pub tbr_threshold_ms: f64,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::new(Scheme::Ssp, InstanceMode::Min),
        BaselineKind::new(Scheme::Ssp, InstanceMode::Max),
        BaselineKind::new(Scheme::Ar, InstanceMode::Min),
        BaselineKind::new(Scheme::Ar, InstanceMode::Max),
        BaselineKind::new(Scheme::Tbr, InstanceMode::Min),
        BaselineKind::new(Scheme::Tbr, InstanceMode::Max),
    ];

    pub const fn new(scheme: Scheme, mode: InstanceMode) -> Self {
        BaselineKind {
            scheme,
            mode,
            tbr_threshold_ms: DEFAULT_TBR_THRESHOLD_MS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scheme == Scheme::Tbr && !(self.tbr_threshold_ms > 0.0) {
            return Err(Error::config(format!(
                "TBR threshold must be positive, got {}",
                self.tbr_threshold_ms
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        match (self.scheme, self.mode) {
            (Scheme::Ssp, InstanceMode::Min) => "SSP_min",
            (Scheme::Ssp, InstanceMode::Max) => "SSP_max",
            (Scheme::Ar, InstanceMode::Min) => "AR_min",
            (Scheme::Ar, InstanceMode::Max) => "AR_max",
            (Scheme::Tbr, InstanceMode::Min) => "TBR_min",
            (Scheme::Tbr, InstanceMode::Max) => "TBR_max",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown baseline scheme {s:?}")))
    }
}

/// Shared inputs of a baseline run.
#[derive(Debug, Clone, Copy)]
pub struct BaselineInputs<'a> {
    pub observations: &'a [StateObservation],
    pub nodes: &'a [EdgeNode],
    pub profiles: &'a [ServiceProfile],
    pub model: &'a ComputeModel,
    /// Objective settings; the instance policy is overridden by the scheme's mode.
    pub solver: &'a SolverOptions,
}

impl BaselineInputs<'_> {
    fn solve(&self, obs: &StateObservation, mode: InstanceMode) -> Result<SolverReport> {
        let options = SolverOptions {
            instances: InstancePolicy::Forced(mode.instances()),
            ..self.solver.clone()
        };
        let problem = PlacementProblem::new(obs, self.nodes, self.profiles, self.model, &options)?;
        Ok(problem.solve(0.0, 1, options.strategy))
    }

    fn record(&self, obs: &StateObservation, placement: &PlacementMatrix, resolved: bool, feasible: bool) -> Result<TraceStep> {
        TraceStep::record(obs, placement.clone(), resolved, feasible, self.nodes, self.profiles, self.model)
    }

    fn first_demand(&self) -> Result<usize> {
        self.observations
            .iter()
            .position(|o| !o.is_empty())
            .ok_or_else(|| Error::Domain("scenario has no requests to place".into()))
    }
}

pub fn run(kind: BaselineKind, inputs: &BaselineInputs<'_>) -> Result<RunTrace> {
    kind.validate()?;
    match kind.scheme {
        Scheme::Ssp => run_ssp(inputs, kind.mode),
        Scheme::Ar => run_ar(inputs, kind.mode),
        Scheme::Tbr => run_tbr(inputs, kind.mode, kind.tbr_threshold_ms),
    }
}

/// Solve once at the first tick with demand and hold that placement for the whole run.
pub fn run_ssp(inputs: &BaselineInputs<'_>, mode: InstanceMode) -> Result<RunTrace> {
    let first = inputs.first_demand()?;
    let report = inputs.solve(&inputs.observations[first], mode)?;
    if !report.feasible {
        return Err(Error::Infeasible(format!(
            "static placement at t={} violates {:?}",
            inputs.observations[first].time, report.violations
        )));
    }
    let mut trace = RunTrace::default();
    for (i, obs) in inputs.observations.iter().enumerate() {
        trace.steps.push(inputs.record(obs, &report.optimal, i == first, true)?);
    }
    Ok(trace)
}

/// Re-solve at every tick with demand and adopt the result.
pub fn run_ar(inputs: &BaselineInputs<'_>, mode: InstanceMode) -> Result<RunTrace> {
    let first = inputs.first_demand()?;
    let initial = inputs.solve(&inputs.observations[first], mode)?;
    let (mut held, mut feasible) = (initial.optimal, initial.feasible);
    let mut trace = RunTrace::default();
    for (i, obs) in inputs.observations.iter().enumerate() {
        let resolved = i >= first && !obs.is_empty();
        if resolved && i > first {
            let report = inputs.solve(obs, mode)?;
            held = report.optimal;
            feasible = report.feasible;
        }
        trace.steps.push(inputs.record(obs, &held, resolved, feasible)?);
    }
    Ok(trace)
}

/// Hold the placement until some service's realized delay exceeds `threshold_ms`, then
/// re-solve.
pub fn run_tbr(inputs: &BaselineInputs<'_>, mode: InstanceMode, threshold_ms: f64) -> Result<RunTrace> {
    let first = inputs.first_demand()?;
    let initial = inputs.solve(&inputs.observations[first], mode)?;
    let (mut held, mut feasible) = (initial.optimal, initial.feasible);
    let mut trace = RunTrace::default();
    for (i, obs) in inputs.observations.iter().enumerate() {
        let mut resolved = i == first;
        if i > first && !obs.is_empty() {
            let delays = service_delays(&held, obs, inputs.nodes, inputs.model)?;
            if delays.iter().flatten().any(|d| d.total_ms > threshold_ms) {
                let report = inputs.solve(obs, mode)?;
                held = report.optimal;
                feasible = report.feasible;
                resolved = true;
            }
        }
        trace.steps.push(inputs.record(obs, &held, resolved, feasible)?);
    }
    Ok(trace)
}
