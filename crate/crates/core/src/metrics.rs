//! Evaluation metrics over per-tick placement traces, and their long-format rows.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::compute::{ComputeModel, DelayBreakdown, ServiceProfile};
use crate::error::{Error, Result};
use crate::scenario::{EdgeNode, StateObservation};
use crate::solver::{service_delays, PlacementMatrix};

/// What one scheme did at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub time: u32,
    /// λ_s per service.
    pub demands: Vec<usize>,
    pub placement: PlacementMatrix,
    /// Realized delay per service; `None` without demand.
    pub delays: Vec<Option<DelayBreakdown>>,
    /// φ_e per node.
    pub usages: Vec<f64>,
    /// The scheme ran its optimizer at this tick.
    pub resolved: bool,
    /// The adopted placement satisfied every constraint.
    pub feasible: bool,
}

impl TraceStep {
    pub fn record(
        obs: &StateObservation,
        placement: PlacementMatrix,
        resolved: bool,
        feasible: bool,
        nodes: &[EdgeNode],
        profiles: &[ServiceProfile],
        model: &ComputeModel,
    ) -> Result<Self> {
        let delays = service_delays(&placement, obs, nodes, model)?;
        let usages = placement.usages(profiles, nodes);
        Ok(TraceStep {
            time: obs.time,
            demands: obs.demands(),
            placement,
            delays,
            usages,
            resolved,
            feasible,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub steps: Vec<TraceStep>,
    /// Set when the scheme could not continue (e.g. an infeasible static placement).
    pub aborted: Option<String>,
}

impl RunTrace {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn resolve_count(&self) -> usize {
        self.steps.iter().filter(|s| s.resolved).count()
    }
}

/// Jain's index `(Σx)² / (n·Σx²)`. All-zero input counts as perfectly balanced.
pub fn jain_fairness(usages: &[f64]) -> f64 {
    assert!(!usages.is_empty(), "fairness of an empty node set");
    let sum: f64 = usages.iter().sum();
    let sq: f64 = usages.iter().map(|u| u * u).sum();
    if sq == 0.0 {
        return 1.0;
    }
    sum * sum / (usages.len() as f64 * sq)
}

/// ζ: share of demand the deployed capacity can serve without queueing.
pub fn satisfaction(demand: usize, capacity: u64) -> f64 {
    if demand as u64 <= capacity {
        1.0
    } else {
        capacity as f64 / demand as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdleConvention {
    /// Ticks with neither instances nor demand are left out of the average.
    #[default]
    Exclude,
    AsZero,
    AsOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatisfactionMode {
    /// Compare demand with the deployed capacity `I_s · C`.
    #[default]
    Deployed,
    /// Compare demand with a single instance's capacity `C`.
    SingleInstance,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub idle_utilization: IdleConvention,
    pub satisfaction: SatisfactionMode,
}

/// Time-averaged `λ_s(t) / (I_s(t) · C)`. `None` when no tick contributes.
pub fn instance_utilization(trace: &RunTrace, service: usize, capacity: u32, idle: IdleConvention) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for step in &trace.steps {
        let lambda = step.demands[service] as f64;
        let deployed = step.placement.assignment[service].map_or(0, |_| step.placement.instances[service]);
        let u = match (deployed, lambda > 0.0) {
            (0, false) => match idle {
                IdleConvention::Exclude => continue,
                IdleConvention::AsZero => 0.0,
                IdleConvention::AsOne => 1.0,
            },
            // Served from the cloud; no edge instance is utilized.
            (0, true) => 0.0,
            (i, _) => lambda / (i as f64 * capacity as f64),
        };
        sum += u;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Ticks at which the optimizer ran and moved at least one service to a different node.
pub fn replacement_cost(trace: &RunTrace) -> usize {
    trace
        .steps
        .windows(2)
        .filter(|w| w[1].resolved && w[1].placement.migrations_from(&w[0].placement) > 0)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizon: usize,
    /// Mean delay per service over ticks with demand.
    pub delay_per_service: Vec<Option<f64>>,
    /// Demand-weighted mean delay over all requests.
    pub delay_overall: f64,
    pub usage_per_node: Vec<f64>,
    pub usage_overall: f64,
    pub fairness_series: Vec<f64>,
    pub fairness_mean: f64,
    pub utilization_per_service: Vec<Option<f64>>,
    pub utilization_overall: Option<f64>,
    /// `[tick][service]`
    pub satisfaction_series: Vec<Vec<f64>>,
    pub satisfaction_per_service: Vec<f64>,
    pub satisfaction_overall: f64,
    pub instances_per_service: Vec<f64>,
    pub instances_overall: f64,
    pub replacement_cost: usize,
    pub resolve_count: usize,
    /// Fraction of ticks with demand at which every demanded service met its threshold.
    pub delay_compliance: f64,
    pub feasible_fraction: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

impl MetricsReport {
    pub fn from_trace(trace: &RunTrace, profiles: &[ServiceProfile], capacity: u32, options: MetricOptions) -> Self {
        let s_count = profiles.len();
        let e_count = trace.steps.first().map_or(0, |s| s.usages.len());
        let steps = &trace.steps;

        let delay_per_service: Vec<Option<f64>> = (0..s_count)
            .map(|s| mean(steps.iter().filter_map(|st| st.delays[s].map(|d| d.total_ms))))
            .collect();
        let (mut weighted, mut requests) = (0.0, 0usize);
        for st in steps {
            for (s, d) in st.delays.iter().enumerate() {
                if let Some(d) = d {
                    weighted += st.demands[s] as f64 * d.total_ms;
                    requests += st.demands[s];
                }
            }
        }
        let delay_overall = if requests == 0 { 0.0 } else { weighted / requests as f64 };

        let usage_per_node: Vec<f64> = (0..e_count)
            .map(|e| mean(steps.iter().map(|st| st.usages[e])).unwrap_or(0.0))
            .collect();
        let usage_overall = mean(usage_per_node.iter().copied()).unwrap_or(0.0);

        let fairness_series: Vec<f64> = steps.iter().map(|st| jain_fairness(&st.usages)).collect();
        let fairness_mean = mean(fairness_series.iter().copied()).unwrap_or(1.0);

        let utilization_per_service: Vec<Option<f64>> = (0..s_count)
            .map(|s| instance_utilization(trace, s, capacity, options.idle_utilization))
            .collect();
        let utilization_overall = mean(utilization_per_service.iter().flatten().copied());

        let satisfaction_series: Vec<Vec<f64>> = steps
            .iter()
            .map(|st| {
                (0..s_count)
                    .map(|s| {
                        let deployed = st.placement.assignment[s].map_or(0, |_| st.placement.instances[s]);
                        let cap = match options.satisfaction {
                            SatisfactionMode::Deployed => deployed as u64 * capacity as u64,
                            SatisfactionMode::SingleInstance => capacity as u64,
                        };
                        satisfaction(st.demands[s], cap)
                    })
                    .collect()
            })
            .collect();
        let satisfaction_per_service: Vec<f64> = (0..s_count)
            .map(|s| mean(satisfaction_series.iter().map(|row| row[s])).unwrap_or(1.0))
            .collect();
        let satisfaction_overall = mean(satisfaction_per_service.iter().copied()).unwrap_or(1.0);

        let instances_per_service: Vec<f64> = (0..s_count)
            .map(|s| {
                mean(steps.iter().map(|st| {
                    st.placement.assignment[s].map_or(0, |_| st.placement.instances[s]) as f64
                }))
                .unwrap_or(0.0)
            })
            .collect();
        let instances_overall = mean(instances_per_service.iter().copied()).unwrap_or(0.0);

        let demanded: Vec<&TraceStep> = steps.iter().filter(|st| st.demands.iter().any(|&l| l > 0)).collect();
        let compliant = demanded
            .iter()
            .filter(|st| {
                st.delays
                    .iter()
                    .zip(profiles)
                    .all(|(d, p)| d.is_none_or(|d| d.total_ms <= p.delay_threshold_ms))
            })
            .count();
        let delay_compliance = if demanded.is_empty() {
            1.0
        } else {
            compliant as f64 / demanded.len() as f64
        };
        let feasible_fraction = mean(steps.iter().map(|st| if st.feasible { 1.0 } else { 0.0 })).unwrap_or(1.0);

        MetricsReport {
            horizon: steps.len(),
            delay_per_service,
            delay_overall,
            usage_per_node,
            usage_overall,
            fairness_series,
            fairness_mean,
            utilization_per_service,
            utilization_overall,
            satisfaction_series,
            satisfaction_per_service,
            satisfaction_overall,
            instances_per_service,
            instances_overall,
            replacement_cost: replacement_cost(trace),
            resolve_count: trace.resolve_count(),
            delay_compliance,
            feasible_fraction,
        }
    }

    /// Long-format rows for this report, in canonical order.
    pub fn rows(&self, scheme: &str, alpha: f64, seed: u64) -> Vec<MetricRow> {
        let mut rows = Vec::new();
        let mut push = |metric: Metric, id: RowId, t: Option<u32>, value: f64| {
            rows.push(MetricRow {
                scheme: scheme.to_string(),
                alpha,
                seed,
                metric,
                id,
                t,
                value,
            })
        };
        push(Metric::AvgDelay, RowId::All, None, self.delay_overall);
        for (s, v) in self.delay_per_service.iter().enumerate() {
            if let Some(v) = v {
                push(Metric::AvgDelay, RowId::Service(s), None, *v);
            }
        }
        push(Metric::ResourceUsage, RowId::All, None, self.usage_overall);
        for (e, v) in self.usage_per_node.iter().enumerate() {
            push(Metric::ResourceUsage, RowId::Node(e), None, *v);
        }
        push(Metric::Fairness, RowId::All, None, self.fairness_mean);
        for (i, v) in self.fairness_series.iter().enumerate() {
            push(Metric::Fairness, RowId::All, Some(i as u32 + 1), *v);
        }
        if let Some(v) = self.utilization_overall {
            push(Metric::InstanceUtilization, RowId::All, None, v);
        }
        for (s, v) in self.utilization_per_service.iter().enumerate() {
            if let Some(v) = v {
                push(Metric::InstanceUtilization, RowId::Service(s), None, *v);
            }
        }
        push(Metric::Satisfaction, RowId::All, None, self.satisfaction_overall);
        for (s, v) in self.satisfaction_per_service.iter().enumerate() {
            push(Metric::Satisfaction, RowId::Service(s), None, *v);
            for (i, row) in self.satisfaction_series.iter().enumerate() {
                push(Metric::Satisfaction, RowId::Service(s), Some(i as u32 + 1), row[s]);
            }
        }
        push(Metric::AvgInstances, RowId::All, None, self.instances_overall);
        for (s, v) in self.instances_per_service.iter().enumerate() {
            push(Metric::AvgInstances, RowId::Service(s), None, *v);
        }
        push(Metric::ReplacementCost, RowId::All, None, self.replacement_cost as f64);
        push(Metric::ResolveCount, RowId::All, None, self.resolve_count as f64);
        push(Metric::DelayCompliance, RowId::All, None, self.delay_compliance);
        push(Metric::FeasibleFraction, RowId::All, None, self.feasible_fraction);
        rows.sort_by(MetricRow::cmp_order);
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    AvgDelay,
    ResourceUsage,
    Fairness,
    InstanceUtilization,
    Satisfaction,
    AvgInstances,
    ReplacementCost,
    ResolveCount,
    DelayCompliance,
    FeasibleFraction,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::AvgDelay,
        Metric::ResourceUsage,
        Metric::Fairness,
        Metric::InstanceUtilization,
        Metric::Satisfaction,
        Metric::AvgInstances,
        Metric::ReplacementCost,
        Metric::ResolveCount,
        Metric::DelayCompliance,
        Metric::FeasibleFraction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::AvgDelay => "avg_delay_ms",
            Metric::ResourceUsage => "resource_usage",
            Metric::Fairness => "fairness",
            Metric::InstanceUtilization => "instance_utilization",
            Metric::Satisfaction => "satisfaction",
            Metric::AvgInstances => "avg_instances",
            Metric::ReplacementCost => "replacement_cost",
            Metric::ResolveCount => "resolve_count",
            Metric::DelayCompliance => "delay_compliance",
            Metric::FeasibleFraction => "feasible_fraction",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The `service_or_node` column: `all`, `s<id>` or `e<id>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowId {
    All,
    Service(usize),
    Node(usize),
}

impl RowId {
    pub fn parse(s: &str) -> Option<RowId> {
        if s == "all" {
            return Some(RowId::All);
        }
        let (kind, num) = s.split_at_checked(1)?;
        let n: usize = num.parse().ok()?;
        match kind {
            "s" => Some(RowId::Service(n)),
            "e" => Some(RowId::Node(n)),
            _ => None,
        }
    }
}

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowId::All => f.write_str("all"),
            RowId::Service(s) => write!(f, "s{s}"),
            RowId::Node(e) => write!(f, "e{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scheme: String,
    pub alpha: f64,
    pub seed: u64,
    pub metric: Metric,
    pub id: RowId,
    /// `None` for horizon-aggregated rows.
    pub t: Option<u32>,
    pub value: f64,
}

/// Canonical scheme order used for sorting rows; unknown labels sort after these, by name.
pub const SCHEME_ORDER: [&str; 7] = ["DRLD-SP", "SSP_min", "SSP_max", "AR_min", "AR_max", "TBR_min", "TBR_max"];

fn scheme_rank(s: &str) -> (usize, &str) {
    (SCHEME_ORDER.iter().position(|&k| k == s).unwrap_or(SCHEME_ORDER.len()), s)
}

impl MetricRow {
    pub fn cmp_order(a: &MetricRow, b: &MetricRow) -> Ordering {
        scheme_rank(&a.scheme)
            .cmp(&scheme_rank(&b.scheme))
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.seed.cmp(&b.seed))
            .then(a.metric.cmp(&b.metric))
            .then(a.id.cmp(&b.id))
            .then(a.t.cmp(&b.t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub alpha: f64,
    pub metric: Metric,
    pub id: RowId,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

/// Mean and min–max envelope across seeds of every horizon-aggregated row, grouped by
/// scheme, alpha, metric and id.
pub fn summarize_rows(rows: &[MetricRow]) -> Vec<SummaryRow> {
    type Key = ((usize, String), u64, Metric, RowId);
    let mut groups: BTreeMap<Key, (f64, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.t.is_none()) {
        let (rank, name) = scheme_rank(&r.scheme);
        let key = ((rank, name.to_string()), r.alpha.to_bits(), r.metric, r.id);
        groups.entry(key).or_insert_with(|| (r.alpha, Vec::new())).1.push(r.value);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|(((_, scheme), _, metric, id), (alpha, values))| SummaryRow {
            scheme,
            alpha,
            metric,
            id,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            runs: values.len(),
        })
        .collect();
    out.sort_by(|a, b| {
        scheme_rank(&a.scheme)
            .cmp(&scheme_rank(&b.scheme))
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.metric.cmp(&b.metric))
            .then(a.id.cmp(&b.id))
    });
    out
}

/// A report labelled with the run it came from.
#[derive(Debug, Clone)]
pub struct LabelledReport {
    pub scheme: String,
    pub alpha: f64,
    pub seed: u64,
    pub report: MetricsReport,
}

/// Summaries across seeds and alphas. All reports must cover the same horizon.
pub fn summarize(reports: &[LabelledReport]) -> Result<Vec<SummaryRow>> {
    let Some(first) = reports.first() else {
        return Err(Error::Domain("nothing to summarize".into()));
    };
    if let Some(bad) = reports.iter().find(|r| r.report.horizon != first.report.horizon) {
        return Err(Error::Domain(format!(
            "mixed horizons: {} ({}, seed {}) vs {} ({}, seed {})",
            first.report.horizon, first.scheme, first.seed, bad.report.horizon, bad.scheme, bad.seed
        )));
    }
    let rows: Vec<MetricRow> = reports
        .iter()
        .flat_map(|r| r.report.rows(&r.scheme, r.alpha, r.seed))
        .collect();
    Ok(summarize_rows(&rows))
}
