//! Delay and resource model of an edge site.
//!
//! Service delay is propagation plus M/D/1 waiting time. Propagation is the mean
//! vehicle-to-node distance times a per-kilometre coefficient; waiting time follows the
//! closed-form M/D/1 mean wait for the overflow beyond deployed capacity, expressed in time
//! units and scaled to milliseconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Area, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceProfile {
    pub id: usize,
    /// R_s, resource units per instance.
    pub resource_demand: u32,
    /// D_s in milliseconds.
    pub delay_threshold_ms: f64,
}

impl ServiceProfile {
    pub fn validate(&self) -> Result<()> {
        if self.resource_demand == 0 {
            return Err(Error::config(format!("service {}: resource demand must be positive", self.id)));
        }
        if !(self.delay_threshold_ms > 0.0) {
            return Err(Error::config(format!("service {}: delay threshold must be positive", self.id)));
        }
        Ok(())
    }
}

/// Build profiles from parallel resource/threshold lists, ids assigned in order.
pub fn profiles_from(resources: &[u32], thresholds_ms: &[f64]) -> Result<Vec<ServiceProfile>> {
    if resources.len() != thresholds_ms.len() {
        return Err(Error::config(format!(
            "{} resource demands but {} delay thresholds",
            resources.len(),
            thresholds_ms.len()
        )));
    }
    let profiles: Vec<ServiceProfile> = resources
        .iter()
        .zip(thresholds_ms)
        .enumerate()
        .map(|(id, (&resource_demand, &delay_threshold_ms))| ServiceProfile {
            id,
            resource_demand,
            delay_threshold_ms,
        })
        .collect();
    profiles.iter().try_for_each(ServiceProfile::validate)?;
    Ok(profiles)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeConfig {
    /// Vehicles one instance serves per time unit.
    pub instance_capacity: u32,
    /// Propagation delay per kilometre of vehicle-to-node distance.
    pub distance_delay_ms_per_km: f64,
    /// Milliseconds per queueing time unit.
    pub queue_time_scale_ms: f64,
    /// Delay reported when the overflow queue is unstable.
    pub saturation_delay_cap_ms: f64,
    /// Delay of a request that no edge instance serves.
    pub cloud_fallback_delay_ms: f64,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        ComputeConfig {
            instance_capacity: 15,
            distance_delay_ms_per_km: 3.0,
            queue_time_scale_ms: 100.0,
            saturation_delay_cap_ms: 100.0,
            cloud_fallback_delay_ms: 50.0,
        }
    }
}

impl ComputeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.instance_capacity == 0 {
            return Err(Error::config("per-instance capacity must be positive"));
        }
        for (name, v) in [
            ("distance delay coefficient", self.distance_delay_ms_per_km),
            ("queue time scale", self.queue_time_scale_ms),
            ("saturation delay cap", self.saturation_delay_cap_ms),
            ("cloud fallback delay", self.cloud_fallback_delay_ms),
        ] {
            if !positive(v) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub propagation_ms: f64,
    pub queueing_ms: f64,
    pub total_ms: f64,
    /// Overflow queue is unstable; the queueing term is the configured cap.
    pub saturated: bool,
    /// No edge instance deployed; the whole delay is the cloud fallback.
    pub cloud: bool,
}

impl DelayBreakdown {
    fn edge(propagation_ms: f64, queueing_ms: f64, saturated: bool) -> Self {
        DelayBreakdown {
            propagation_ms,
            queueing_ms,
            total_ms: propagation_ms + queueing_ms,
            saturated,
            cloud: false,
        }
    }

    pub fn cloud(fallback_ms: f64) -> Self {
        DelayBreakdown {
            propagation_ms: fallback_ms,
            queueing_ms: 0.0,
            total_ms: fallback_ms,
            saturated: false,
            cloud: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueueDelay {
    Edge { ms: f64, saturated: bool },
    /// Demand with no deployed instance; the caller substitutes the cloud delay.
    CloudFallback,
}

/// The computing model bound to a simulation area (needed for delay normalization).
#[derive(Debug, Clone, PartialEq)]
pub struct ComputeModel {
    pub config: ComputeConfig,
    pub area: Area,
}

impl ComputeModel {
    pub fn new(config: ComputeConfig, area: Area) -> Result<Self> {
        config.validate()?;
        area.validate()?;
        Ok(ComputeModel { config, area })
    }

    pub fn capacity(&self) -> u32 {
        self.config.instance_capacity
    }

    /// On-demand sizing: `ceil(λ / C)`, zero when there is no demand.
    pub fn instances_required(&self, demand: usize) -> u32 {
        demand.div_ceil(self.config.instance_capacity as usize) as u32
    }

    /// Mean M/D/1 waiting time of the overflow beyond `instances · C`.
    pub fn queue_delay(&self, demand: usize, instances: u32) -> QueueDelay {
        if demand == 0 {
            return QueueDelay::Edge { ms: 0.0, saturated: false };
        }
        if instances == 0 {
            return QueueDelay::CloudFallback;
        }
        let mu = instances as f64 * self.config.instance_capacity as f64;
        let lambda = demand as f64;
        if lambda <= mu {
            return QueueDelay::Edge { ms: 0.0, saturated: false };
        }
        let overflow = lambda - mu;
        if overflow >= mu {
            return QueueDelay::Edge {
                ms: self.config.saturation_delay_cap_ms,
                saturated: true,
            };
        }
        let wait_units = overflow / (2.0 * mu * (mu - overflow));
        QueueDelay::Edge {
            ms: (wait_units * self.config.queue_time_scale_ms).min(self.config.saturation_delay_cap_ms),
            saturated: false,
        }
    }

    /// Mean propagation delay from the vehicles at `locations` to a node at `node`.
    pub fn propagation_delay<I>(&self, locations: I, node: Point) -> Result<f64>
    where
        I: IntoIterator<Item = Point>,
    {
        let (mut sum, mut n) = (0.0, 0usize);
        for p in locations {
            sum += p.distance(node);
            n += 1;
        }
        if n == 0 {
            return Err(Error::Domain("propagation delay needs at least one vehicle".into()));
        }
        Ok(self.config.distance_delay_ms_per_km * (sum / n as f64) / 1000.0)
    }

    /// Total delay seen by `demand` vehicles at `locations` served by `instances` instances at `node`.
    ///
    /// With no demand the breakdown is all zeros. With demand but no instances the request
    /// is served from the cloud.
    pub fn total_delay(&self, locations: &[Point], node: Point, instances: u32) -> Result<DelayBreakdown> {
        if locations.is_empty() {
            return Ok(DelayBreakdown::edge(0.0, 0.0, false));
        }
        match self.queue_delay(locations.len(), instances) {
            QueueDelay::CloudFallback => Ok(DelayBreakdown::cloud(self.config.cloud_fallback_delay_ms)),
            QueueDelay::Edge { ms, saturated } => {
                let prop = self.propagation_delay(locations.iter().copied(), node)?;
                Ok(DelayBreakdown::edge(prop, ms, saturated))
            }
        }
    }

    /// Largest delay the model can produce inside the area: full-diagonal propagation plus
    /// a saturated queue.
    pub fn max_delay_ms(&self) -> f64 {
        self.config.distance_delay_ms_per_km * self.area.diagonal_km() + self.config.saturation_delay_cap_ms
    }

    pub fn normalized_delay(&self, delay_ms: f64) -> f64 {
        (delay_ms / self.max_delay_ms()).clamp(0.0, 1.0)
    }
}

/// φ_e: resources consumed by `(instances, resource_demand)` pairs over the node capacity.
pub fn resource_usage<I>(placed: I, capacity: u32) -> f64
where
    I: IntoIterator<Item = (u32, u32)>,
{
    let load: u64 = placed.into_iter().map(|(i, r)| i as u64 * r as u64).sum();
    load as f64 / capacity as f64
}
