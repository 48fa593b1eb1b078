//! Properties of the default 600-tick scenario that the baselines and figures rely on.

use edgeplace::baselines::{self, BaselineInputs, BaselineKind, InstanceMode, Scheme};
use edgeplace::harness::{scenario_for_seed, ExperimentConfig};
use edgeplace::metrics::{MetricOptions, MetricsReport};

#[test]
fn default_scenario_stays_within_two_instances() {
    let cfg = ExperimentConfig::default();
    let env = cfg.environment().unwrap();
    let obs = scenario_for_seed(&cfg, &env, 1).unwrap();
    assert_eq!(obs.len(), 600);
    let max = obs.iter().flat_map(|o| o.demands()).max().unwrap();
    assert!(max <= 30, "peak demand {max}");
    assert!(obs.iter().all(|o| !o.is_empty()));
}

#[test]
fn always_reoptimize_solves_every_tick() {
    let cfg = ExperimentConfig::default();
    let env = cfg.environment().unwrap();
    let obs = scenario_for_seed(&cfg, &env, 1).unwrap();
    let solver = cfg.solver.options(0.6);
    let inputs = BaselineInputs {
        observations: &obs,
        nodes: &env.nodes,
        profiles: &env.profiles,
        model: &env.model,
        solver: &solver,
    };
    let ar = baselines::run(BaselineKind::new(Scheme::Ar, InstanceMode::Min), &inputs).unwrap();
    assert_eq!(ar.resolve_count(), 600);

    let ssp = baselines::run(BaselineKind::new(Scheme::Ssp, InstanceMode::Min), &inputs).unwrap();
    assert_eq!(ssp.resolve_count(), 1);
    let report = MetricsReport::from_trace(&ssp, &env.profiles, env.model.capacity(), MetricOptions::default());
    // A single instance per service cannot keep up once demand passes 15.
    for (t, step) in ssp.steps.iter().enumerate() {
        for (s, &l) in step.demands.iter().enumerate() {
            assert_eq!(report.satisfaction_series[t][s] < 1.0, l > 15);
        }
    }
}
