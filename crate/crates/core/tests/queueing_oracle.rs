//! Closed-form queueing delay against a discrete-event M/D/1 simulation.

mod common;

use common::{simulate_md1, MU};
use edgeplace::compute::{ComputeConfig, ComputeModel, QueueDelay};
use edgeplace::scenario::Area;

fn model() -> ComputeModel {
    ComputeModel::new(ComputeConfig::default(), Area::default()).unwrap()
}

#[test]
fn closed_form_matches_simulation() {
    let m = model();
    for (i, overflow) in [3usize, 5, 10].into_iter().enumerate() {
        let QueueDelay::Edge { ms, saturated } = m.queue_delay(overflow + MU as usize, 1) else {
            panic!("edge delay expected");
        };
        assert!(!saturated);
        let closed = ms / m.config.queue_time_scale_ms;
        let (simulated, _) = simulate_md1(overflow as f64, 400_000, 11 + i as u64);
        let rel = (simulated - closed).abs() / closed;
        assert!(rel < 0.05, "lambda' = {overflow}: closed {closed:.6}, simulated {simulated:.6}, rel {rel:.4}");
    }
}

#[test]
fn saturated_queue_grows_without_bound() {
    let m = model();
    let QueueDelay::Edge { ms, saturated } = m.queue_delay(35, 1) else {
        panic!("edge delay expected");
    };
    assert!(saturated);
    assert_eq!(ms, m.config.saturation_delay_cap_ms);
    // λ' = 20 > μ = 15: the backlog grows linearly with the number of arrivals.
    let (_, short) = simulate_md1(20.0, 10_000, 5);
    let (_, long) = simulate_md1(20.0, 100_000, 5);
    assert!(long > 5.0 * short && long > 100.0, "short {short}, long {long}");
}

#[test]
fn instance_sizing_is_ceiling_of_demand_over_capacity() {
    let m = model();
    for lambda in 0..=60usize {
        let expected = (lambda as f64 / 15.0).ceil() as u32;
        assert_eq!(m.instances_required(lambda), expected, "lambda {lambda}");
        if lambda > 0 {
            assert_eq!(
                m.queue_delay(lambda, expected),
                QueueDelay::Edge {
                    ms: 0.0,
                    saturated: false
                },
                "sized instances never queue (lambda {lambda})"
            );
        }
    }
}

#[test]
fn closed_form_spot_values() {
    let m = model();
    // λ = 20, one instance: λ' = 5, W = 5 / (2·15·10) time units.
    let QueueDelay::Edge { ms, .. } = m.queue_delay(20, 1) else {
        panic!()
    };
    assert!((ms - 100.0 / 60.0).abs() < 1e-12);
    assert_eq!(m.queue_delay(10, 0), QueueDelay::CloudFallback);
    assert_eq!(
        m.queue_delay(0, 0),
        QueueDelay::Edge {
            ms: 0.0,
            saturated: false
        }
    );
}
