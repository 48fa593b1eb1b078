//! Encoding of observations and placements for the critic, and the reward/target pair it
//! is trained on.

use serde::{Deserialize, Serialize};

use crate::compute::{ComputeModel, ServiceProfile};
use crate::error::Result;
use crate::scenario::{Area, EdgeNode, StateObservation};
use crate::solver::{service_delays, PlacementMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub service_count: usize,
    pub node_count: usize,
    /// |V|, used to scale demand and instance counts.
    pub vehicle_norm: f64,
    pub area: Area,
}

impl FeatureEncoder {
    pub fn new(service_count: usize, node_count: usize, vehicle_count: usize, area: Area) -> Self {
        FeatureEncoder {
            service_count,
            node_count,
            vehicle_norm: vehicle_count.max(1) as f64,
            area,
        }
    }

    pub fn state_dim(&self) -> usize {
        3 * self.service_count
    }

    pub fn action_dim(&self) -> usize {
        self.service_count * self.node_count + self.service_count
    }

    /// State, action and the reward slot.
    pub fn input_dim(&self) -> usize {
        self.state_dim() + self.action_dim() + 1
    }

    /// Per service: (λ_s / |V|, centroid x / width, centroid y / height), zeros when idle.
    pub fn encode_state(&self, obs: &StateObservation) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim()];
        for (s, list) in obs.per_service.iter().enumerate().take(self.service_count) {
            if list.is_empty() {
                continue;
            }
            let n = list.len() as f64;
            let (sx, sy) = list
                .iter()
                .fold((0.0, 0.0), |(x, y), v| (x + v.location.x, y + v.location.y));
            out[3 * s] = n / self.vehicle_norm;
            out[3 * s + 1] = sx / n / self.area.width;
            out[3 * s + 2] = sy / n / self.area.height;
        }
        out
    }

    /// One-hot x_e^s flattened service-major, followed by I_s / |V| per service.
    pub fn encode_action(&self, placement: &PlacementMatrix) -> Vec<f64> {
        let (s_count, e_count) = (self.service_count, self.node_count);
        let mut out = vec![0.0; self.action_dim()];
        for (s, node) in placement.assignment.iter().enumerate().take(s_count) {
            if let Some(e) = node {
                out[s * e_count + e] = 1.0;
            }
            out[s_count * e_count + s] = placement.instances[s] as f64 / self.vehicle_norm;
        }
        out
    }
}

/// Expected per-vehicle service delay (ms): the demand-weighted mean of each service's
/// total delay, with unplaced demand served from the cloud. Zero without demand.
pub fn reward(
    obs: &StateObservation,
    placement: &PlacementMatrix,
    nodes: &[EdgeNode],
    model: &ComputeModel,
) -> Result<f64> {
    let delays = service_delays(placement, obs, nodes, model)?;
    let (mut weighted, mut total) = (0.0, 0usize);
    for (s, d) in delays.iter().enumerate() {
        if let Some(d) = d {
            let lambda = obs.demand(s);
            weighted += lambda as f64 * d.total_ms;
            total += lambda;
        }
    }
    Ok(if total == 0 { 0.0 } else { weighted / total as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Smallest D_s among services with demand.
    #[default]
    Strictest,
    /// Demand-weighted mean of D_s.
    DemandWeighted,
}

/// The delay threshold a whole-observation reward is compared against.
pub fn reward_threshold(obs: &StateObservation, profiles: &[ServiceProfile], rule: ThresholdRule) -> f64 {
    let demanded = profiles.iter().filter(|p| obs.demand(p.id) > 0);
    let strictest_overall = || profiles.iter().map(|p| p.delay_threshold_ms).fold(f64::INFINITY, f64::min);
    match rule {
        ThresholdRule::Strictest => {
            let v = demanded.map(|p| p.delay_threshold_ms).fold(f64::INFINITY, f64::min);
            if v.is_finite() { v } else { strictest_overall() }
        }
        ThresholdRule::DemandWeighted => {
            let (mut sum, mut n) = (0.0, 0usize);
            for p in demanded {
                sum += obs.demand(p.id) as f64 * p.delay_threshold_ms;
                n += obs.demand(p.id);
            }
            if n == 0 { strictest_overall() } else { sum / n as f64 }
        }
    }
}

/// Training target: the population standard deviation of `{threshold, reward}` when the
/// reward beats the threshold, zero otherwise.
pub fn target_value(reward_ms: f64, threshold_ms: f64) -> f64 {
    if reward_ms < threshold_ms {
        (threshold_ms - reward_ms).abs() / 2.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::ComputeConfig;
    use crate::scenario::{Point, VehicleAt};

    fn encoder() -> FeatureEncoder {
        FeatureEncoder::new(8, 6, 200, Area::default())
    }

    #[test]
    fn empty_observation_encodes_to_zeros() {
        let v = encoder().encode_state(&StateObservation::empty(1, 8));
        assert_eq!(v, vec![0.0; 24]);
    }

    #[test]
    fn single_request_at_center() {
        let mut obs = StateObservation::empty(1, 8);
        obs.per_service[0].push(VehicleAt {
            vehicle: 3,
            location: Area::default().center(),
        });
        let v = encoder().encode_state(&obs);
        assert_eq!(&v[..3], &[1.0 / 200.0, 0.5, 0.5]);
        assert!(v[3..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn action_one_hot_layout() {
        let enc = encoder();
        assert_eq!(enc.encode_action(&PlacementMatrix::empty(8)), vec![0.0; 56]);
        let mut p = PlacementMatrix::empty(8);
        p.assignment[0] = Some(2);
        p.instances[0] = 1;
        let v = enc.encode_action(&p);
        assert_eq!(v[2], 1.0);
        assert_eq!(v[48], 1.0 / 200.0);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 2);
    }

    #[test]
    fn target_value_cases() {
        assert_eq!(target_value(6.0, 10.0), 2.0);
        assert_eq!(target_value(10.0, 10.0), 0.0);
        assert_eq!(target_value(12.0, 10.0), 0.0);
    }

    #[test]
    fn reward_is_demand_weighted() {
        let model = ComputeModel::new(
            ComputeConfig {
                distance_delay_ms_per_km: 1.0,
                ..ComputeConfig::default()
            },
            Area::default(),
        )
        .unwrap();
        let nodes = [EdgeNode {
            id: 0,
            position: Point::new(0.0, 0.0),
            capacity: 1000,
        }];
        let mut obs = StateObservation::empty(1, 2);
        for v in 0..10 {
            obs.per_service[0].push(VehicleAt {
                vehicle: v,
                location: Point::new(2000.0, 0.0),
            });
        }
        for v in 10..40 {
            obs.per_service[1].push(VehicleAt {
                vehicle: v,
                location: Point::new(0.0, 4000.0),
            });
        }
        let placement = PlacementMatrix {
            assignment: vec![Some(0), Some(0)],
            instances: vec![1, 2],
        };
        let r = reward(&obs, &placement, &nodes, &model).unwrap();
        assert!((r - 3.5).abs() < 1e-12, "{r}");

        let uncovered = PlacementMatrix {
            assignment: vec![Some(0), None],
            instances: vec![1, 0],
        };
        let r = reward(&obs, &uncovered, &nodes, &model).unwrap();
        assert!((r - (10.0 * 2.0 + 30.0 * 50.0) / 40.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_rules() {
        let profiles = crate::compute::profiles_from(&[10, 20], &[10.0, 12.0]).unwrap();
        let mut obs = StateObservation::empty(1, 2);
        obs.per_service[1].push(VehicleAt {
            vehicle: 0,
            location: Point::new(0.0, 0.0),
        });
        assert_eq!(reward_threshold(&obs, &profiles, ThresholdRule::Strictest), 12.0);
        obs.per_service[0].push(VehicleAt {
            vehicle: 1,
            location: Point::new(0.0, 0.0),
        });
        assert_eq!(reward_threshold(&obs, &profiles, ThresholdRule::Strictest), 10.0);
        assert_eq!(reward_threshold(&obs, &profiles, ThresholdRule::DemandWeighted), 11.0);
    }
}
