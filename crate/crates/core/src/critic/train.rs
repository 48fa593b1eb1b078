//! Critic training: the actor proposes placements, the replay memory collects their
//! rewards, and the network is periodically fit to the threshold targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::Agent;
use super::features::{reward, reward_threshold, target_value, FeatureEncoder, ThresholdRule};
use super::network::CriticNetwork;
use super::replay::{ReplayMemory, Transition};
use crate::compute::{ComputeModel, ServiceProfile};
use crate::error::{Error, Result};
use crate::scenario::{EdgeNode, StateObservation};
use crate::solver::{enumerate_candidates, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Fit the network every this many steps.
    pub update_period: usize,
    pub replay_capacity: usize,
    pub seed: u64,
    /// Probability of acting on a random candidate instead of the critic's choice.
    pub exploration: f64,
    pub threshold_rule: ThresholdRule,
    /// Objective weights cycled across episodes.
    pub alphas: Vec<f64>,
    /// Fixed `(offset, scale)` of the reward input slot in ms. When unset, the slot is
    /// standardized by the mean and standard deviation of the rewards in the replay memory
    /// at the first update.
    pub reward_normalization: Option<(f64, f64)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 100,
            episodes: 500,
            steps_per_episode: 20,
            update_period: 5,
            replay_capacity: 10_000,
            seed: 1,
            exploration: 0.1,
            threshold_rule: ThresholdRule::Strictest,
            alphas: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            reward_normalization: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("episodes", self.episodes),
            ("steps_per_episode", self.steps_per_episode),
            ("update_period", self.update_period),
            ("replay_capacity", self.replay_capacity),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("train.{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "train.learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.exploration) {
            return Err(Error::config(format!(
                "train.exploration must lie in [0, 1], got {}",
                self.exploration
            )));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::config("train.alphas must be a non-empty list of values in [0, 1]"));
        }
        if let Some((offset, scale)) = self.reward_normalization {
            if !(scale > 0.0 && scale.is_finite() && offset.is_finite()) {
                return Err(Error::config(format!(
                    "train.reward_normalization needs a finite offset and positive scale, got ({offset}, {scale})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub alpha: f64,
    /// Mean batch loss over this episode's updates; `None` if none ran.
    pub mean_loss: Option<f64>,
    pub updates: usize,
    /// Updates skipped because the replay memory held fewer transitions than a batch.
    pub skipped_updates: usize,
    pub mean_reward_ms: f64,
    pub transitions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainingLog {
    pub fn total_updates(&self) -> usize {
        self.episodes.iter().map(|e| e.updates).sum()
    }

    /// Mean episode loss over the first and last `fraction` of the episodes that trained.
    pub fn loss_deciles(&self, fraction: f64) -> Option<(f64, f64)> {
        let losses: Vec<f64> = self.episodes.iter().filter_map(|e| e.mean_loss).collect();
        if losses.is_empty() {
            return None;
        }
        let n = ((losses.len() as f64 * fraction).ceil() as usize).clamp(1, losses.len());
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        Some((mean(&losses[..n]), mean(&losses[losses.len() - n..])))
    }
}

/// Mean and standard deviation of the stored rewards; the deviation is floored so a
/// constant reward still yields a usable scale.
pub fn reward_statistics(replay: &ReplayMemory) -> (f64, f64) {
    let n = replay.len().max(1) as f64;
    let mean = replay.iter().map(|t| t.reward).sum::<f64>() / n;
    let var = replay.iter().map(|t| (t.reward - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt().max(1e-3))
}

pub struct TrainingSetup<'a> {
    pub observations: &'a [StateObservation],
    pub nodes: &'a [EdgeNode],
    pub profiles: &'a [ServiceProfile],
    pub model: &'a ComputeModel,
    pub encoder: FeatureEncoder,
    /// Template for the actor; `alpha` is replaced per episode.
    pub solver: SolverOptions,
}

/// Train a fresh critic. Episodes start at a random tick and wrap around the horizon.
pub fn train(setup: &TrainingSetup<'_>, config: &TrainConfig) -> Result<(CriticNetwork, TrainingLog)> {
    config.validate()?;
    if setup.observations.is_empty() {
        return Err(Error::config("training needs a scenario with at least one tick"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = CriticNetwork::random(&CriticNetwork::default_sizes(setup.encoder.input_dim()), &mut rng);
    if let Some((offset, scale)) = config.reward_normalization {
        net.reward_offset = offset;
        net.reward_scale = scale;
    }
    let log = train_network(&mut net, setup, config, &mut rng)?;
    Ok((net, log))
}

/// Continue training `net` in place. Reward standardization, if not configured, happens at
/// the first update only when `net` still has the identity normalization.
pub fn train_network<R: Rng>(
    net: &mut CriticNetwork,
    setup: &TrainingSetup<'_>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<TrainingLog> {
    config.validate()?;
    let horizon = setup.observations.len();
    let mut replay = ReplayMemory::new(config.replay_capacity);
    let mut log = TrainingLog::default();
    let mut normalize = config.reward_normalization.is_none() && net.reward_offset == 0.0 && net.reward_scale == 1.0;

    for episode in 0..config.episodes {
        let alpha = config.alphas[episode % config.alphas.len()];
        let options = SolverOptions {
            alpha,
            ..setup.solver.clone()
        };
        let start = rng.random_range(0..horizon);
        let (mut losses, mut skipped, mut reward_sum) = (Vec::new(), 0usize, 0.0);

        for step in 0..config.steps_per_episode {
            let obs = &setup.observations[(start + step) % horizon];
            let candidates = enumerate_candidates(
                obs,
                setup.nodes,
                setup.profiles,
                setup.model,
                &options,
                options.epsilon,
                options.max_candidates,
            )?;
            let state = setup.encoder.encode_state(obs);
            let chosen = if rng.random_bool(config.exploration) {
                rng.random_range(0..candidates.len())
            } else {
                let agent = Agent {
                    network: net,
                    encoder: &setup.encoder,
                };
                agent.best_index(&state, obs, &candidates, setup.nodes, setup.model)?
            };
            let placement = &candidates[chosen].placement;
            let r = reward(obs, placement, setup.nodes, setup.model)?;
            reward_sum += r;
            replay.push(Transition {
                state,
                action: setup.encoder.encode_action(placement),
                reward: r,
                threshold: reward_threshold(obs, setup.profiles, config.threshold_rule),
            });

            if (step + 1) % config.update_period == 0 {
                if normalize && replay.len() >= config.batch_size {
                    (net.reward_offset, net.reward_scale) = reward_statistics(&replay);
                    normalize = false;
                }
                match replay.sample(config.batch_size, rng) {
                    Some(batch) => {
                        let inputs: Vec<Vec<f64>> = batch
                            .iter()
                            .map(|t| net.assemble_input(&t.state, &t.action, t.reward))
                            .collect();
                        let targets: Vec<f64> = batch.iter().map(|t| target_value(t.reward, t.threshold)).collect();
                        let loss = net.train_step(&inputs, &targets, config.learning_rate).map_err(|e| match e {
                            Error::Divergence(msg) => {
                                Error::Divergence(format!("episode {}, step {}: {msg}", episode + 1, step + 1))
                            }
                            other => other,
                        })?;
                        losses.push(loss);
                    }
                    None => skipped += 1,
                }
            }
        }

        log.episodes.push(EpisodeLog {
            episode: episode + 1,
            alpha,
            mean_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            updates: losses.len(),
            skipped_updates: skipped,
            mean_reward_ms: reward_sum / config.steps_per_episode as f64,
            transitions: replay.len(),
        });
    }
    Ok(log)
}
