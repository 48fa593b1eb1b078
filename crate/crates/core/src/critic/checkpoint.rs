//! JSON checkpoints of a trained critic.
//!
//! ```json
//! {
//!   "format": "edgeplace-critic",
//!   "version": 1,
//!   "layer_sizes": [81, 256, 64, 32, 1],
//!   "reward_offset": 1.97,
//!   "reward_scale": 0.09,
//!   "layers": [{"inputs": 81, "outputs": 256, "weights": [...], "biases": [...]}, ...],
//!   "encoder": {...},
//!   "seed": 1,
//!   "train": {...}
//! }
//! ```
//!
//! Weights are row-major (`outputs x inputs`). Floats are written with shortest
//! round-trip formatting, so `load(save(x)) == x` bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::FeatureEncoder;
use super::network::{CriticNetwork, Dense};
use super::train::TrainConfig;
use crate::error::{Error, Result};

pub const FORMAT: &str = "edgeplace-critic";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub reward_offset: f64,
    pub reward_scale: f64,
    pub layers: Vec<Dense>,
    pub encoder: FeatureEncoder,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Checkpoint {
    pub fn new(network: &CriticNetwork, encoder: &FeatureEncoder, train: &TrainConfig) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            layer_sizes: network.layer_sizes(),
            reward_offset: network.reward_offset,
            reward_scale: network.reward_scale,
            layers: network.layers.clone(),
            encoder: encoder.clone(),
            seed: train.seed,
            train: train.clone(),
        }
    }

    pub fn network(&self) -> CriticNetwork {
        CriticNetwork {
            layers: self.layers.clone(),
            reward_offset: self.reward_offset,
            reward_scale: self.reward_scale,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.format != FORMAT {
            return Err(format!("format is {:?}, expected {FORMAT:?}", self.format));
        }
        if self.version != VERSION {
            return Err(format!("unsupported version {}", self.version));
        }
        if self.layers.is_empty() || self.layer_sizes.len() != self.layers.len() + 1 {
            return Err("layer_sizes does not match the layer list".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.inputs != self.layer_sizes[i] || l.outputs != self.layer_sizes[i + 1] {
                return Err(format!("layer {i} shape disagrees with layer_sizes"));
            }
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(format!("layer {i} has the wrong number of parameters"));
            }
            if !l.weights.iter().chain(&l.biases).all(|v| v.is_finite()) {
                return Err(format!("layer {i} holds non-finite parameters"));
            }
        }
        if *self.layer_sizes.last().unwrap() != 1 {
            return Err("network must end in a single output".into());
        }
        if self.layer_sizes[0] != self.encoder.input_dim() {
            return Err(format!(
                "network input width {} does not match the encoder's {}",
                self.layer_sizes[0],
                self.encoder.input_dim()
            ));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite() && self.reward_offset.is_finite()) {
            return Err("reward normalization must be finite with a positive scale".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        ck.validate()
            .map_err(|m| Error::Validation(format!("{}: {m}", path.display())))?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Area;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_identity() {
        let enc = FeatureEncoder::new(2, 3, 10, Area::default());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut net = CriticNetwork::random(&[enc.input_dim(), 7, 1], &mut rng);
        net.reward_offset = 1.5;
        net.reward_scale = 0.3;
        let ck = Checkpoint::new(&net, &enc, &TrainConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.network(), net);
        assert_eq!(back.to_json(), ck.to_json());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let enc = FeatureEncoder::new(2, 3, 10, Area::default());
        let net = CriticNetwork::zeros(&[enc.input_dim(), 1]);
        let mut ck = Checkpoint::new(&net, &enc, &TrainConfig::default());
        ck.layers[0].biases.push(0.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        ck.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Validation(_))));
    }
}
