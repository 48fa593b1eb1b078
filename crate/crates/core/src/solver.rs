//! Exact minmax service placement.
//!
//! Every service with demand is assigned to exactly one edge node, carrying all of its
//! instances there. The objective trades edge resource usage against normalized service
//! delay with a weight `alpha`:
//!
//! ```text
//! value = max over (s, e) of  alpha * U + (1 - alpha) * d_hat(s, e) * x(s, e)
//! ```
//!
//! where `U` is the sum of per-node usage ratios ([`ObjectiveVariant::SumUsage`], default)
//! or, in [`ObjectiveVariant::PerNodeMax`], the usage of the node in the pair. Placements
//! must keep every service under its delay threshold and every node under its capacity;
//! covering every node with at least one service is a soft preference unless
//! `strict_mapping` is set.
//!
//! The search is a best-first branch-and-bound over services in descending resource
//! footprint. Lower bounds add, for each unassigned service, its cheapest usage ratio and
//! its smallest reachable delay. Small instances are enumerated outright. Ties are broken
//! toward covering more nodes, then toward the lexicographically smallest assignment.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::compute::{ComputeModel, DelayBreakdown, ServiceProfile};
use crate::error::{Error, Result};
use crate::scenario::{EdgeNode, Point, StateObservation};

/// Instance counts below this many full assignments are enumerated instead of searched.
pub const ENUMERATION_LIMIT: u64 = 7776;

const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveVariant {
    /// Resource term is the sum of usage ratios over all nodes.
    #[default]
    SumUsage,
    /// Resource term is the usage of the node in each (service, node) pair.
    PerNodeMax,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstancePolicy {
    /// `ceil(λ_s / C)` instances for every service with demand; idle services are withdrawn.
    #[default]
    OnDemand,
    /// The same count for every service, deployed whether or not it has demand.
    Forced(u32),
    /// Explicit per-service counts; services with a zero count are not placed.
    Explicit(Vec<u32>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Enumerate below [`ENUMERATION_LIMIT`] assignments, branch-and-bound above.
    #[default]
    Auto,
    BranchAndBound,
    Enumerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub alpha: f64,
    /// Relative optimality gap admitted into the candidate list.
    pub epsilon: f64,
    /// Maximum number of candidates returned.
    pub max_candidates: usize,
    pub variant: ObjectiveVariant,
    pub strict_mapping: bool,
    #[serde(skip)]
    pub instances: InstancePolicy,
    #[serde(skip)]
    pub strategy: SearchStrategy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            alpha: 0.6,
            epsilon: 0.05,
            max_candidates: 16,
            variant: ObjectiveVariant::SumUsage,
            strict_mapping: false,
            instances: InstancePolicy::OnDemand,
            strategy: SearchStrategy::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_alpha(alpha: f64) -> Self {
        SolverOptions {
            alpha,
            ..SolverOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::config(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if self.max_candidates == 0 {
            return Err(Error::config("candidate limit must be at least 1"));
        }
        Ok(())
    }
}

/// One-hot service-to-node assignment plus the instance count of each service.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlacementMatrix {
    /// Indexed by service id.
    pub assignment: Vec<Option<usize>>,
    /// Indexed by service id.
    pub instances: Vec<u32>,
}

impl PlacementMatrix {
    pub fn empty(service_count: usize) -> Self {
        PlacementMatrix {
            assignment: vec![None; service_count],
            instances: vec![0; service_count],
        }
    }

    pub fn service_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn node_of(&self, service: usize) -> Option<usize> {
        self.assignment[service]
    }

    /// x_e^s
    pub fn x(&self, service: usize, node: usize) -> bool {
        self.assignment[service] == Some(node)
    }

    pub fn services_on(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, e)| **e == Some(node))
            .map(|(s, _)| s)
    }

    /// Number of distinct nodes hosting at least one service.
    pub fn coverage(&self) -> usize {
        let mut used: Vec<usize> = self.assignment.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        used.len()
    }

    /// Services hosted at both placements but on different nodes.
    pub fn migrations_from(&self, previous: &PlacementMatrix) -> usize {
        self.assignment
            .iter()
            .zip(&previous.assignment)
            .filter(|(a, b)| matches!((a, b), (Some(x), Some(y)) if x != y))
            .count()
    }

    /// Resource units consumed on each node.
    pub fn node_loads(&self, profiles: &[ServiceProfile], node_count: usize) -> Vec<u64> {
        let mut loads = vec![0u64; node_count];
        for (s, e) in self.assignment.iter().enumerate() {
            if let Some(e) = e {
                loads[*e] += self.instances[s] as u64 * profiles[s].resource_demand as u64;
            }
        }
        loads
    }

    /// φ_e for every node.
    pub fn usages(&self, profiles: &[ServiceProfile], nodes: &[EdgeNode]) -> Vec<f64> {
        self.node_loads(profiles, nodes.len())
            .iter()
            .zip(nodes)
            .map(|(&load, n)| load as f64 / n.capacity as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementObjective {
    pub value: f64,
    /// Sum of usages (or the largest node usage in the per-node variant).
    pub resource_term: f64,
    /// Largest normalized delay over placed services.
    pub delay_term: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub placement: PlacementMatrix,
    pub objective: PlacementObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// No node keeps the service under its threshold (best achievable delay reported).
    DelayThreshold { service: usize, delay_ms: f64, threshold_ms: f64 },
    Capacity { node: usize, load: u64, capacity: u32 },
    /// Strict mapping requested but some nodes host nothing.
    Mapping { uncovered: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub optimal: PlacementMatrix,
    pub objective: PlacementObjective,
    /// Ascending by objective, then coverage (descending), then assignment.
    pub candidates: Vec<Candidate>,
    pub nodes_explored: u64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Per-(service, node) delays and footprints for one observation.
#[derive(Debug, Clone)]
pub struct PlacementProblem<'a> {
    nodes: &'a [EdgeNode],
    profiles: &'a [ServiceProfile],
    alpha: f64,
    variant: ObjectiveVariant,
    strict_mapping: bool,
    instances: Vec<u32>,
    /// Service ids that must be assigned.
    placed: Vec<usize>,
    footprint: Vec<u64>,
    /// `[service][node]`, empty rows for services without demand.
    delay: Vec<Vec<DelayBreakdown>>,
    norm_delay: Vec<Vec<f64>>,
}

impl<'a> PlacementProblem<'a> {
    pub fn new(
        observation: &StateObservation,
        nodes: &'a [EdgeNode],
        profiles: &'a [ServiceProfile],
        model: &ComputeModel,
        options: &SolverOptions,
    ) -> Result<Self> {
        options.validate()?;
        if nodes.is_empty() {
            return Err(Error::config("placement needs at least one edge node"));
        }
        let s_count = profiles.len();
        if observation.service_count() != s_count {
            return Err(Error::Validation(format!(
                "observation has {} services, profiles describe {s_count}",
                observation.service_count()
            )));
        }

        let demands = observation.demands();
        let instances: Vec<u32> = match &options.instances {
            InstancePolicy::OnDemand => demands.iter().map(|&l| model.instances_required(l)).collect(),
            InstancePolicy::Forced(n) => vec![*n; s_count],
            InstancePolicy::Explicit(v) => {
                if v.len() != s_count {
                    return Err(Error::Validation(format!(
                        "explicit instance list has {} entries for {s_count} services",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        let placed: Vec<usize> = (0..s_count).filter(|&s| instances[s] > 0).collect();
        let footprint = (0..s_count)
            .map(|s| instances[s] as u64 * profiles[s].resource_demand as u64)
            .collect();

        let mut delay = vec![Vec::new(); s_count];
        let mut norm_delay = vec![Vec::new(); s_count];
        for &s in &placed {
            let locs: Vec<Point> = observation.locations(s).collect();
            for node in nodes {
                let d = model.total_delay(&locs, node.position, instances[s])?;
                norm_delay[s].push(model.normalized_delay(d.total_ms));
                delay[s].push(d);
            }
        }

        Ok(PlacementProblem {
            nodes,
            profiles,
            alpha: options.alpha,
            variant: options.variant,
            strict_mapping: options.strict_mapping,
            instances,
            placed,
            footprint,
            delay,
            norm_delay,
        })
    }

    pub fn instances(&self) -> &[u32] {
        &self.instances
    }

    pub fn placed_services(&self) -> &[usize] {
        &self.placed
    }

    fn delay_ok(&self, s: usize, e: usize) -> bool {
        self.delay[s][e].total_ms <= self.profiles[s].delay_threshold_ms
    }

    /// Objective of a full assignment. This is the single source of objective values:
    /// search leaves and [`evaluate`] both go through it.
    pub fn objective_of(&self, assignment: &[Option<usize>]) -> PlacementObjective {
        let n = self.nodes.len();
        let mut loads = vec![0u64; n];
        let mut node_delay = vec![0.0f64; n];
        let mut max_delay = 0.0f64;
        for &s in &self.placed {
            if let Some(e) = assignment[s] {
                loads[e] += self.footprint[s];
                let d = self.norm_delay[s][e];
                node_delay[e] = node_delay[e].max(d);
                max_delay = max_delay.max(d);
            }
        }
        let usages: Vec<f64> = loads
            .iter()
            .zip(self.nodes)
            .map(|(&l, node)| l as f64 / node.capacity as f64)
            .collect();
        let a = self.alpha;
        match self.variant {
            ObjectiveVariant::SumUsage => {
                // Sorted summation makes the value independent of which equal-capacity node
                // holds which load.
                let mut sorted = usages.clone();
                sorted.sort_by(f64::total_cmp);
                let sum: f64 = sorted.iter().sum();
                PlacementObjective {
                    value: a * sum + (1.0 - a) * max_delay,
                    resource_term: sum,
                    delay_term: max_delay,
                    alpha: a,
                }
            }
            ObjectiveVariant::PerNodeMax => {
                let value = usages
                    .iter()
                    .zip(&node_delay)
                    .map(|(&u, &d)| a * u + (1.0 - a) * d)
                    .fold(0.0, f64::max);
                PlacementObjective {
                    value,
                    resource_term: usages.iter().copied().fold(0.0, f64::max),
                    delay_term: max_delay,
                    alpha: a,
                }
            }
        }
    }

    /// Constraint violations of a full assignment; empty when feasible.
    pub fn violations(&self, assignment: &[Option<usize>]) -> Vec<Violation> {
        let mut out = Vec::new();
        for &s in &self.placed {
            if let Some(e) = assignment[s] {
                if !self.delay_ok(s, e) {
                    out.push(Violation::DelayThreshold {
                        service: s,
                        delay_ms: self.delay[s][e].total_ms,
                        threshold_ms: self.profiles[s].delay_threshold_ms,
                    });
                }
            }
        }
        let mut loads = vec![0u64; self.nodes.len()];
        for &s in &self.placed {
            if let Some(e) = assignment[s] {
                loads[e] += self.footprint[s];
            }
        }
        for (e, node) in self.nodes.iter().enumerate() {
            if loads[e] > node.capacity as u64 {
                out.push(Violation::Capacity {
                    node: e,
                    load: loads[e],
                    capacity: node.capacity,
                });
            }
        }
        if self.strict_mapping {
            let uncovered = loads.iter().filter(|&&l| l == 0).count();
            if uncovered > 0 {
                out.push(Violation::Mapping { uncovered });
            }
        }
        out
    }

    fn to_matrix(&self, assignment: Vec<Option<usize>>) -> PlacementMatrix {
        PlacementMatrix {
            assignment,
            instances: self.instances.clone(),
        }
    }

    fn node_allowed(&self, relax_delay: bool) -> Vec<Vec<usize>> {
        self.profiles
            .iter()
            .enumerate()
            .map(|(s, _)| {
                if self.instances[s] == 0 {
                    return Vec::new();
                }
                let all: Vec<usize> = (0..self.nodes.len()).collect();
                if relax_delay {
                    return all;
                }
                let ok: Vec<usize> = all.iter().copied().filter(|&e| self.delay_ok(s, e)).collect();
                // A service no node can serve in time keeps every node; the violation is reported.
                if ok.is_empty() { all } else { ok }
            })
            .collect()
    }

    /// Solve to optimality and collect up to `max_candidates` placements within
    /// `(1 + epsilon)` of the optimum.
    pub fn solve(&self, epsilon: f64, max_candidates: usize, strategy: SearchStrategy) -> SolverReport {
        let phases = [
            (false, true, self.strict_mapping),
            (false, true, false),
            (true, true, false),
            (true, false, false),
        ];
        let mut explored = 0;
        for (i, &(relax_delay, capacity_hard, strict)) in phases.iter().enumerate() {
            if i > 0 && phases[..i].contains(&phases[i]) {
                continue;
            }
            let search = Search::new(self, relax_delay, capacity_hard, strict);
            let best = search.run(Limit::Best, 1, strategy);
            explored += best.explored;
            let Some(opt) = best.leaves.into_iter().next() else {
                continue;
            };
            let leaves = if max_candidates > 1 {
                let cap = (1.0 + epsilon) * opt.objective.value;
                let found = search.run(Limit::Cap { overflow: opt.overflow, value: cap }, max_candidates, strategy);
                explored += found.explored;
                found.leaves
            } else {
                vec![opt]
            };
            let candidates: Vec<Candidate> = leaves
                .into_iter()
                .map(|l| Candidate {
                    placement: self.to_matrix(l.assignment),
                    objective: l.objective,
                })
                .collect();
            let optimal = candidates[0].clone();
            let violations = self.violations(&optimal.placement.assignment);
            return SolverReport {
                feasible: violations.is_empty(),
                violations,
                optimal: optimal.placement,
                objective: optimal.objective,
                candidates,
                nodes_explored: explored,
            };
        }
        unreachable!("the capacity-relaxed phase always yields an assignment")
    }
}

#[derive(Debug, Clone)]
struct Leaf {
    overflow: f64,
    objective: PlacementObjective,
    coverage: usize,
    assignment: Vec<Option<usize>>,
}

impl Leaf {
    fn cmp_key(&self, other: &Leaf) -> Ordering {
        self.overflow
            .total_cmp(&other.overflow)
            .then(self.objective.value.total_cmp(&other.objective.value))
            .then(other.coverage.cmp(&self.coverage))
            .then_with(|| self.assignment.cmp(&other.assignment))
    }
}

#[derive(Debug, Clone, Copy)]
enum Limit {
    /// Keep the best `k` leaves.
    Best,
    /// Keep the best `k` leaves no worse than the given overflow and value.
    Cap { overflow: f64, value: f64 },
}

struct Found {
    leaves: Vec<Leaf>,
    explored: u64,
}

/// Sorted, bounded set of the best leaves seen so far.
struct Collector {
    k: usize,
    limit: Limit,
    leaves: Vec<Leaf>,
}

impl Collector {
    fn offer(&mut self, leaf: Leaf) {
        if let Limit::Cap { overflow, value } = self.limit {
            if leaf.overflow > overflow || leaf.objective.value > value {
                return;
            }
        }
        if self.leaves.len() == self.k && leaf.cmp_key(self.leaves.last().unwrap()) != Ordering::Less {
            return;
        }
        let pos = self.leaves.partition_point(|l| l.cmp_key(&leaf) == Ordering::Less);
        self.leaves.insert(pos, leaf);
        self.leaves.truncate(self.k);
    }

    /// Partial solutions whose bound exceeds this cannot improve the collection.
    fn cutoff(&self) -> (f64, f64) {
        let cap = match self.limit {
            Limit::Cap { overflow, value } => (overflow, value),
            Limit::Best => (f64::INFINITY, f64::INFINITY),
        };
        if self.leaves.len() < self.k {
            return cap;
        }
        let worst = self.leaves.last().unwrap();
        let w = (worst.overflow, worst.objective.value);
        if w.0 < cap.0 || (w.0 == cap.0 && w.1 < cap.1) {
            w
        } else {
            cap
        }
    }

    fn prunes(&self, overflow: f64, value: f64) -> bool {
        let (co, cv) = self.cutoff();
        overflow > co + PRUNE_TOL || (overflow >= co - PRUNE_TOL && value > cv + PRUNE_TOL)
    }
}

#[derive(Debug, Clone)]
struct Partial {
    overflow: f64,
    bound: f64,
    depth: usize,
    seq: u64,
    /// Node per branching position.
    path: Vec<usize>,
    loads: Vec<u64>,
    node_delay: Vec<f64>,
    sum_usage: f64,
    max_delay: f64,
}

impl PartialEq for Partial {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Partial {}
impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Partial {
    /// Reversed so the max-heap pops the smallest bound, deepest first, oldest first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .overflow
            .total_cmp(&self.overflow)
            .then(other.bound.total_cmp(&self.bound))
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Search<'p, 'a> {
    p: &'p PlacementProblem<'a>,
    /// Services in branching order (largest footprint first, then id).
    order: Vec<usize>,
    allowed: Vec<Vec<usize>>,
    suffix_usage: Vec<f64>,
    suffix_delay: Vec<f64>,
    capacity_hard: bool,
    strict: bool,
}

impl<'p, 'a> Search<'p, 'a> {
    fn new(p: &'p PlacementProblem<'a>, relax_delay: bool, capacity_hard: bool, strict: bool) -> Self {
        let mut order = p.placed.clone();
        order.sort_by(|&a, &b| p.footprint[b].cmp(&p.footprint[a]).then(a.cmp(&b)));
        let allowed_by_service = p.node_allowed(relax_delay);
        let allowed: Vec<Vec<usize>> = order.iter().map(|&s| allowed_by_service[s].clone()).collect();

        let m = order.len();
        let mut suffix_usage = vec![0.0; m + 1];
        let mut suffix_delay = vec![0.0f64; m + 1];
        for i in (0..m).rev() {
            let s = order[i];
            let min_u = allowed[i]
                .iter()
                .map(|&e| p.footprint[s] as f64 / p.nodes[e].capacity as f64)
                .fold(f64::INFINITY, f64::min);
            let min_d = allowed[i].iter().map(|&e| p.norm_delay[s][e]).fold(f64::INFINITY, f64::min);
            suffix_usage[i] = suffix_usage[i + 1] + min_u;
            suffix_delay[i] = suffix_delay[i + 1].max(min_d);
        }
        Search {
            p,
            order,
            allowed,
            suffix_usage,
            suffix_delay,
            capacity_hard,
            strict,
        }
    }

    fn run(&self, limit: Limit, k: usize, strategy: SearchStrategy) -> Found {
        let mut collector = Collector {
            k,
            limit,
            leaves: Vec::with_capacity(k + 1),
        };
        let total: u64 = self
            .allowed
            .iter()
            .map(|a| a.len() as u64)
            .try_fold(1u64, |acc, n| acc.checked_mul(n))
            .unwrap_or(u64::MAX);
        let enumerate = match strategy {
            SearchStrategy::Enumerate => true,
            SearchStrategy::BranchAndBound => false,
            SearchStrategy::Auto => total < ENUMERATION_LIMIT,
        };
        let explored = if enumerate {
            self.enumerate(&mut collector)
        } else {
            self.branch_and_bound(&mut collector)
        };
        Found {
            leaves: collector.leaves,
            explored,
        }
    }

    fn assignment_of(&self, path: &[usize]) -> Vec<Option<usize>> {
        let mut a = vec![None; self.p.instances.len()];
        for (i, &e) in path.iter().enumerate() {
            a[self.order[i]] = Some(e);
        }
        a
    }

    fn leaf(&self, path: &[usize], loads: &[u64]) -> Option<Leaf> {
        let coverage = loads.iter().filter(|&&l| l > 0).count();
        if self.strict && coverage < self.p.nodes.len() {
            return None;
        }
        let overflow = self.overflow(loads);
        if self.capacity_hard && overflow > 0.0 {
            return None;
        }
        let assignment = self.assignment_of(path);
        Some(Leaf {
            overflow,
            objective: self.p.objective_of(&assignment),
            coverage,
            assignment,
        })
    }

    fn overflow(&self, loads: &[u64]) -> f64 {
        loads
            .iter()
            .zip(self.p.nodes)
            .map(|(&l, n)| l.saturating_sub(n.capacity as u64) as f64 / n.capacity as f64)
            .sum()
    }

    fn enumerate(&self, collector: &mut Collector) -> u64 {
        let m = self.order.len();
        let mut digits = vec![0usize; m];
        let mut explored = 0;
        loop {
            explored += 1;
            let path: Vec<usize> = digits.iter().enumerate().map(|(i, &d)| self.allowed[i][d]).collect();
            let mut loads = vec![0u64; self.p.nodes.len()];
            for (i, &e) in path.iter().enumerate() {
                loads[e] += self.p.footprint[self.order[i]];
            }
            if let Some(leaf) = self.leaf(&path, &loads) {
                collector.offer(leaf);
            }
            // Odometer increment, last position fastest.
            let mut i = m;
            loop {
                if i == 0 {
                    return explored;
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < self.allowed[i].len() {
                    break;
                }
                digits[i] = 0;
            }
        }
    }

    fn branch_and_bound(&self, collector: &mut Collector) -> u64 {
        let n = self.p.nodes.len();
        let m = self.order.len();
        let root = Partial {
            overflow: 0.0,
            bound: 0.0,
            depth: 0,
            seq: 0,
            path: Vec::with_capacity(m),
            loads: vec![0; n],
            node_delay: vec![0.0; n],
            sum_usage: 0.0,
            max_delay: 0.0,
        };
        if m == 0 {
            if let Some(leaf) = self.leaf(&[], &root.loads) {
                collector.offer(leaf);
            }
            return 1;
        }
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        let mut explored = 0u64;
        heap.push(root);
        while let Some(node) = heap.pop() {
            if collector.prunes(node.overflow, node.bound) {
                break;
            }
            explored += 1;
            let i = node.depth;
            let s = self.order[i];
            for &e in &self.allowed[i] {
                let Some(child) = self.child(&node, s, e, &mut seq) else {
                    continue;
                };
                if child.depth == m {
                    if let Some(leaf) = self.leaf(&child.path, &child.loads) {
                        collector.offer(leaf);
                    }
                } else if !collector.prunes(child.overflow, child.bound) {
                    heap.push(child);
                }
            }
        }
        explored
    }

    fn child(&self, parent: &Partial, s: usize, e: usize, seq: &mut u64) -> Option<Partial> {
        let p = self.p;
        let cap = p.nodes[e].capacity as u64;
        let fp = p.footprint[s];
        if self.capacity_hard && parent.loads[e] + fp > cap {
            return None;
        }
        let depth = parent.depth + 1;
        let m = self.order.len();
        let mut loads = parent.loads.clone();
        loads[e] += fp;
        let mut node_delay = parent.node_delay.clone();
        let d = p.norm_delay[s][e];
        node_delay[e] = node_delay[e].max(d);
        let max_delay = parent.max_delay.max(d);
        let sum_usage = parent.sum_usage + fp as f64 / cap as f64;

        if self.strict {
            let uncovered = loads.iter().filter(|&&l| l == 0).count();
            if uncovered > m - depth {
                return None;
            }
        }

        let a = p.alpha;
        let bound = match p.variant {
            ObjectiveVariant::SumUsage => {
                a * (sum_usage + self.suffix_usage[depth]) + (1.0 - a) * max_delay.max(self.suffix_delay[depth])
            }
            ObjectiveVariant::PerNodeMax => {
                let mut b = loads
                    .iter()
                    .zip(&node_delay)
                    .zip(p.nodes)
                    .map(|((&l, &nd), node)| a * l as f64 / node.capacity as f64 + (1.0 - a) * nd)
                    .fold(0.0, f64::max);
                for j in depth..m {
                    let sj = self.order[j];
                    let best = self.allowed[j]
                        .iter()
                        .filter(|&&f| !self.capacity_hard || loads[f] + p.footprint[sj] <= p.nodes[f].capacity as u64)
                        .map(|&f| {
                            let u = (loads[f] + p.footprint[sj]) as f64 / p.nodes[f].capacity as f64;
                            a * u + (1.0 - a) * node_delay[f].max(p.norm_delay[sj][f])
                        })
                        .fold(f64::INFINITY, f64::min);
                    b = b.max(best);
                }
                b
            }
        };
        if !bound.is_finite() {
            return None;
        }
        if self.capacity_hard {
            // Every remaining service still needs some node with room for it.
            for j in depth..m {
                let sj = self.order[j];
                let fits = self.allowed[j]
                    .iter()
                    .any(|&f| loads[f] + p.footprint[sj] <= p.nodes[f].capacity as u64);
                if !fits {
                    return None;
                }
            }
        }

        let mut path = parent.path.clone();
        path.push(e);
        *seq += 1;
        Some(Partial {
            overflow: if self.capacity_hard { 0.0 } else { self.overflow(&loads) },
            bound,
            depth,
            seq: *seq,
            path,
            loads,
            node_delay,
            sum_usage,
            max_delay,
        })
    }
}

/// Solve the placement for one observation.
pub fn solve(
    observation: &StateObservation,
    nodes: &[EdgeNode],
    profiles: &[ServiceProfile],
    model: &ComputeModel,
    options: &SolverOptions,
) -> Result<SolverReport> {
    let problem = PlacementProblem::new(observation, nodes, profiles, model, options)?;
    Ok(problem.solve(options.epsilon, options.max_candidates, options.strategy))
}

/// Ranked placements within `(1 + epsilon)` of the optimum, at most `k` of them.
pub fn enumerate_candidates(
    observation: &StateObservation,
    nodes: &[EdgeNode],
    profiles: &[ServiceProfile],
    model: &ComputeModel,
    options: &SolverOptions,
    epsilon: f64,
    k: usize,
) -> Result<Vec<Candidate>> {
    if k == 0 {
        return Err(Error::config("candidate limit must be at least 1"));
    }
    let problem = PlacementProblem::new(observation, nodes, profiles, model, options)?;
    Ok(problem.solve(epsilon, k, options.strategy).candidates)
}

/// Objective of an existing placement under the default (sum-usage) variant.
pub fn evaluate(
    placement: &PlacementMatrix,
    observation: &StateObservation,
    nodes: &[EdgeNode],
    profiles: &[ServiceProfile],
    model: &ComputeModel,
    alpha: f64,
) -> Result<PlacementObjective> {
    evaluate_with(placement, observation, nodes, profiles, model, alpha, ObjectiveVariant::SumUsage)
}

pub fn evaluate_with(
    placement: &PlacementMatrix,
    observation: &StateObservation,
    nodes: &[EdgeNode],
    profiles: &[ServiceProfile],
    model: &ComputeModel,
    alpha: f64,
    variant: ObjectiveVariant,
) -> Result<PlacementObjective> {
    let options = SolverOptions {
        alpha,
        variant,
        instances: InstancePolicy::Explicit(placement.instances.clone()),
        ..SolverOptions::default()
    };
    let problem = PlacementProblem::new(observation, nodes, profiles, model, &options)?;
    Ok(problem.objective_of(&placement.assignment))
}

/// Realized delay of every service under `placement`. `None` for services without demand;
/// demanded services with no placed instance are served from the cloud.
pub fn service_delays(
    placement: &PlacementMatrix,
    observation: &StateObservation,
    nodes: &[EdgeNode],
    model: &ComputeModel,
) -> Result<Vec<Option<DelayBreakdown>>> {
    (0..observation.service_count())
        .map(|s| {
            if observation.demand(s) == 0 {
                return Ok(None);
            }
            let locs: Vec<Point> = observation.locations(s).collect();
            let d = match placement.assignment.get(s).copied().flatten() {
                Some(e) => model.total_delay(&locs, nodes[e].position, placement.instances[s])?,
                None => DelayBreakdown::cloud(model.config.cloud_fallback_delay_ms),
            };
            Ok(Some(d))
        })
        .collect()
}
