//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use edgeplace::compute::{ComputeConfig, ComputeModel, ServiceProfile};
use edgeplace::critic::CriticNetwork;
use edgeplace::scenario::{Area, EdgeNode, Point, ServiceRequest, StateObservation};
use edgeplace::solver::{ObjectiveVariant, PlacementProblem, SearchStrategy, SolverOptions};

pub struct Instance {
    pub nodes: Vec<EdgeNode>,
    pub profiles: Vec<ServiceProfile>,
    pub obs: StateObservation,
    pub model: ComputeModel,
    pub options: SolverOptions,
}

/// 1–4 nodes, 1–5 services, up to 35 requests per service, random weights and thresholds.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let area = Area::default();
    let e_count = rng.random_range(1..=4);
    let s_count = rng.random_range(1..=5);
    let nodes = (0..e_count)
        .map(|id| EdgeNode {
            id,
            position: Point::new(rng.random_range(0.0..area.width), rng.random_range(0.0..area.height)),
            capacity: rng.random_range(30..=120),
        })
        .collect();
    let profiles = (0..s_count)
        .map(|id| ServiceProfile {
            id,
            resource_demand: rng.random_range(5..=45),
            delay_threshold_ms: rng.random_range(4.0..14.0),
        })
        .collect();
    let mut requests = Vec::new();
    let mut vehicle = 0;
    for s in 0..s_count {
        for _ in 0..rng.random_range(0..=35) {
            requests.push(ServiceRequest {
                vehicle,
                location: Point::new(rng.random_range(0.0..area.width), rng.random_range(0.0..area.height)),
                time: 1,
                service: s,
            });
            vehicle += 1;
        }
    }
    let options = SolverOptions {
        alpha: rng.random_range(0.0..=1.0),
        variant: if rng.random_bool(0.5) {
            ObjectiveVariant::SumUsage
        } else {
            ObjectiveVariant::PerNodeMax
        },
        strict_mapping: rng.random_bool(0.2),
        strategy: SearchStrategy::BranchAndBound,
        ..SolverOptions::default()
    };
    Instance {
        nodes,
        profiles,
        obs: StateObservation::from_requests(1, s_count, &requests),
        model: ComputeModel::new(ComputeConfig::default(), area).unwrap(),
        options,
    }
}

/// Every full assignment of the placed services, in lexicographic order.
pub fn all_assignments(services: usize, placed: &[usize], nodes: usize) -> Vec<Vec<Option<usize>>> {
    let mut out = vec![vec![None; services]];
    for &s in placed {
        out = out
            .into_iter()
            .flat_map(|a| {
                (0..nodes).map(move |e| {
                    let mut b = a.clone();
                    b[s] = Some(e);
                    b
                })
            })
            .collect();
    }
    out
}

/// Objective recomputed from first principles: mean-distance propagation, the M/D/1 overflow
/// wait, usage ratios and the minmax combination.
pub fn reference_objective(inst: &Instance, instances: &[u32], assignment: &[Option<usize>]) -> f64 {
    let cfg = &inst.model.config;
    let d_max = cfg.distance_delay_ms_per_km * inst.model.area.diagonal_km() + cfg.saturation_delay_cap_ms;
    let n = inst.nodes.len();
    let mut load = vec![0.0; n];
    let mut node_delay = vec![0.0f64; n];
    for (s, e) in assignment.iter().enumerate() {
        let Some(e) = *e else { continue };
        load[e] += (instances[s] * inst.profiles[s].resource_demand) as f64;
        let locs: Vec<Point> = inst.obs.locations(s).collect();
        if locs.is_empty() {
            continue;
        }
        let prop = cfg.distance_delay_ms_per_km
            * locs.iter().map(|p| p.distance(inst.nodes[e].position)).sum::<f64>()
            / locs.len() as f64
            / 1000.0;
        let mu = instances[s] as f64 * cfg.instance_capacity as f64;
        let over = (locs.len() as f64 - mu).max(0.0);
        let wait = if over == 0.0 {
            0.0
        } else if over >= mu {
            cfg.saturation_delay_cap_ms
        } else {
            (over / (2.0 * mu * (mu - over)) * cfg.queue_time_scale_ms).min(cfg.saturation_delay_cap_ms)
        };
        node_delay[e] = node_delay[e].max(((prop + wait) / d_max).min(1.0));
    }
    let usage: Vec<f64> = load.iter().zip(&inst.nodes).map(|(l, node)| l / node.capacity as f64).collect();
    let a = inst.options.alpha;
    match inst.options.variant {
        ObjectiveVariant::SumUsage => {
            a * usage.iter().sum::<f64>() + (1.0 - a) * node_delay.iter().copied().fold(0.0, f64::max)
        }
        ObjectiveVariant::PerNodeMax => usage
            .iter()
            .zip(&node_delay)
            .map(|(u, d)| a * u + (1.0 - a) * d)
            .fold(0.0, f64::max),
    }
}

#[derive(Debug, Default)]
pub struct BruteForceTally {
    pub feasible: usize,
    pub infeasible: usize,
}

/// Solve `count` random instances with branch-and-bound and compare against exhaustive
/// enumeration with zero tolerance.
pub fn solver_vs_brute_force(seed: u64, count: usize) -> Result<BruteForceTally, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = BruteForceTally::default();
    for i in 0..count {
        let inst = random_instance(&mut rng);
        let problem = PlacementProblem::new(&inst.obs, &inst.nodes, &inst.profiles, &inst.model, &inst.options)
            .map_err(|e| e.to_string())?;
        let report = problem.solve(inst.options.epsilon, inst.options.max_candidates, inst.options.strategy);
        let brute = all_assignments(inst.profiles.len(), problem.placed_services(), inst.nodes.len())
            .into_iter()
            .filter(|a| problem.violations(a).is_empty())
            .map(|a| problem.objective_of(&a).value)
            .min_by(f64::total_cmp);
        match brute {
            Some(best) => {
                tally.feasible += 1;
                if !report.feasible {
                    return Err(format!("instance {i}: solver missed a feasible placement"));
                }
                if report.objective.value != best {
                    return Err(format!("instance {i}: solver {} vs enumeration {best}", report.objective.value));
                }
                if !problem.violations(&report.optimal.assignment).is_empty() {
                    return Err(format!("instance {i}: optimum violates constraints"));
                }
                let reference = reference_objective(&inst, problem.instances(), &report.optimal.assignment);
                if (reference - best).abs() > 1e-12 {
                    return Err(format!("instance {i}: objective {best} vs first-principles {reference}"));
                }
            }
            None => {
                tally.infeasible += 1;
                if report.feasible || report.violations.is_empty() {
                    return Err(format!("instance {i}: infeasible instance reported feasible"));
                }
            }
        }
        if report.candidates.first().map(|c| c.objective.value) != Some(report.objective.value) {
            return Err(format!("instance {i}: optimum is not the first candidate"));
        }
    }
    Ok(tally)
}

pub const MU: f64 = 15.0;

/// Mean waiting time (in time units) of `arrivals` Poisson arrivals at rate `lambda` into a
/// single deterministic server of rate [`MU`], via the Lindley recursion, plus the wait of
/// the last arrival. The first tenth of the arrivals is discarded as warm-up.
pub fn simulate_md1(lambda: f64, arrivals: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(lambda).unwrap();
    let service = 1.0 / MU;
    let warmup = arrivals / 10;
    let (mut wait, mut sum, mut last) = (0.0f64, 0.0, 0.0);
    for n in 0..arrivals {
        if n > 0 {
            wait = (wait + service - gap.sample(&mut rng)).max(0.0);
        }
        if n >= warmup {
            sum += wait;
        }
        last = wait;
    }
    (sum / (arrivals - warmup) as f64, last)
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_ABS_FLOOR: f64 = 1e-7;

pub fn random_batch(rng: &mut ChaCha8Rng, width: usize, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let inputs = (0..n)
        .map(|_| (0..width).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let targets = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    (inputs, targets)
}

/// Compare analytic gradients of the listed parameters with central differences.
pub fn finite_difference_check(
    net: &mut CriticNetwork,
    inputs: &[Vec<f64>],
    targets: &[f64],
    params: impl Iterator<Item = usize>,
) -> Result<(), String> {
    let analytic = net.loss_and_gradients(inputs, targets).1.flat();
    if analytic.len() != net.parameter_count() {
        return Err("gradient layout does not match the parameter count".into());
    }
    for i in params {
        let w = net.param(i);
        net.set_param(i, w + FD_STEP);
        let up = net.loss_and_gradients(inputs, targets).0;
        net.set_param(i, w - FD_STEP);
        let down = net.loss_and_gradients(inputs, targets).0;
        net.set_param(i, w);
        let numeric = (up - down) / (2.0 * FD_STEP);
        let err = (analytic[i] - numeric).abs();
        let scale = analytic[i].abs().max(numeric.abs());
        if !(err <= FD_ABS_FLOOR || err <= FD_REL_TOL * scale) {
            return Err(format!("parameter {i}: analytic {} vs numeric {numeric}", analytic[i]));
        }
    }
    Ok(())
}

/// `count` fixtures: small networks checked on every parameter, plus one default-width
/// network in every ten checked on a random sample of 400 parameters.
pub fn gradient_fixtures(seed: u64, count: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in 0..count {
        if f % 10 == 9 {
            let sizes = CriticNetwork::default_sizes(rng.random_range(20..=90));
            let mut net = CriticNetwork::random(&sizes, &mut rng);
            let (inputs, targets) = random_batch(&mut rng, sizes[0], 16);
            let n = net.parameter_count();
            let sample: Vec<usize> = (0..400).map(|_| rng.random_range(0..n)).collect();
            finite_difference_check(&mut net, &inputs, &targets, sample.into_iter())
                .map_err(|e| format!("fixture {f} {sizes:?}: {e}"))?;
        } else {
            let sizes = [
                rng.random_range(2..=12),
                rng.random_range(2..=16),
                rng.random_range(2..=8),
                rng.random_range(1..=6),
                1,
            ];
            let mut net = CriticNetwork::random(&sizes, &mut rng);
            let rows = rng.random_range(1..=8);
            let (inputs, targets) = random_batch(&mut rng, sizes[0], rows);
            let n = net.parameter_count();
            finite_difference_check(&mut net, &inputs, &targets, 0..n).map_err(|e| format!("fixture {f} {sizes:?}: {e}"))?;
        }
    }
    Ok(())
}
