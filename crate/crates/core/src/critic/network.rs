//! Fully connected value network: tanh hidden layers, linear scalar output, trained by
//! plain SGD on mean squared error.
//!
//! Weights are stored row-major (`outputs x inputs`). Shape mismatches are programmer
//! errors and panic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIDDEN_SIZES: [usize; 3] = [256, 64, 32];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(|(row, b)| {
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticNetwork {
    pub layers: Vec<Dense>,
    /// The reward slot of the input holds `(reward_ms - reward_offset) / reward_scale`.
    pub reward_offset: f64,
    pub reward_scale: f64,
}

/// Gradients with the same layout as [`CriticNetwork::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &CriticNetwork) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// Flattened in the same order as [`CriticNetwork::param`].
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

impl CriticNetwork {
    /// `sizes` runs from input width to the scalar output, e.g. `[81, 256, 64, 32, 1]`.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && *sizes.last().unwrap() == 1, "network must end in one output");
        CriticNetwork {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            reward_offset: 0.0,
            reward_scale: 1.0,
        }
    }

    /// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn random<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    /// Input width followed by the default hidden widths and the scalar output.
    pub fn default_sizes(input_dim: usize) -> Vec<usize> {
        std::iter::once(input_dim).chain(HIDDEN_SIZES).chain(std::iter::once(1)).collect()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    /// Concatenate state, action and the standardized reward into one input vector.
    pub fn assemble_input(&self, state: &[f64], action: &[f64], reward_ms: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(state.len() + action.len() + 1);
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        x.push((reward_ms - self.reward_offset) / self.reward_scale);
        x
    }

    pub fn q_value(&self, state: &[f64], action: &[f64], reward_ms: f64) -> f64 {
        self.forward(&self.assemble_input(state, action, reward_ms))
    }

    pub fn forward(&self, input: &[f64]) -> f64 {
        self.activations(input).last().unwrap()[0]
    }

    /// Post-activation outputs of every layer, input first.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(
            input.len(),
            self.input_dim(),
            "critic input has {} features, network expects {}",
            input.len(),
            self.input_dim()
        );
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.affine(acts.last().unwrap(), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared error over the batch and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Gradients) {
        assert_eq!(inputs.len(), targets.len());
        assert!(!inputs.is_empty(), "empty batch");
        let n = inputs.len() as f64;
        let last = self.layers.len() - 1;
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        for (x, &y) in inputs.iter().zip(targets) {
            let acts = self.activations(x);
            let q = acts[last + 1][0];
            let residual = q - y;
            loss += residual * residual;

            let mut delta = vec![2.0 * residual / n];
            for i in (0..=last).rev() {
                let layer = &self.layers[i];
                let a_in = &acts[i];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &mut grads.weights[i][o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(a_in).for_each(|(g, a)| *g += d * a);
                    grads.biases[i][o] += d;
                }
                if i == 0 {
                    break;
                }
                // Back through the weights, then through tanh of the previous layer.
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
                prev.iter_mut().zip(a_in).for_each(|(p, a)| *p *= 1.0 - a * a);
                delta = prev;
            }
        }
        (loss / n, grads)
    }

    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for ((layer, gw), gb) in self.layers.iter_mut().zip(&grads.weights).zip(&grads.biases) {
            layer.weights.iter_mut().zip(gw).for_each(|(w, g)| *w -= learning_rate * g);
            layer.biases.iter_mut().zip(gb).for_each(|(b, g)| *b -= learning_rate * g);
        }
    }

    /// One SGD step on the batch; returns the pre-update loss.
    pub fn train_step(&mut self, inputs: &[Vec<f64>], targets: &[f64], learning_rate: f64) -> Result<f64> {
        let (loss, grads) = self.loss_and_gradients(inputs, targets);
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite batch loss {loss} over {} samples (lr {learning_rate})",
                inputs.len()
            )));
        }
        self.apply_gradients(&grads, learning_rate);
        if !self.is_finite() {
            return Err(Error::Divergence("parameters became non-finite after update".into()));
        }
        Ok(loss)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn locate(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if index < layer.weights.len() {
                return &mut layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return &mut layer.biases[index];
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter by flat index: each layer's weights, then its biases.
    pub fn param(&self, mut index: usize) -> f64 {
        for layer in &self.layers {
            if index < layer.weights.len() {
                return layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return layer.biases[index];
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        *self.locate(index) = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = CriticNetwork::zeros(&[4, 8, 3, 1]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]), 0.0);
    }

    #[test]
    fn output_bias_passes_through() {
        let mut net = CriticNetwork::zeros(&[4, 8, 3, 1]);
        net.layers[2].biases[0] = 1.75;
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]), 1.75);
    }

    #[test]
    fn exact_fit_leaves_parameters_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = CriticNetwork::random(&[3, 5, 1], &mut rng);
        let inputs = vec![vec![0.1, 0.2, 0.3], vec![-0.5, 0.0, 0.9]];
        let targets: Vec<f64> = inputs.iter().map(|x| net.forward(x)).collect();
        let before = net.clone();
        let loss = net.train_step(&inputs, &targets, 0.01).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn single_weight_step_matches_closed_form() {
        let mut net = CriticNetwork::zeros(&[1, 1]);
        net.layers[0].weights[0] = 0.7;
        let (x, y, lr) = (2.0, 3.0, 0.01);
        let q = 0.7 * x;
        net.train_step(&[vec![x]], &[y], lr).unwrap();
        assert!((net.layers[0].weights[0] - (0.7 - lr * 2.0 * (q - y) * x)).abs() < 1e-15);
    }

    #[test]
    fn diverging_loss_is_an_error() {
        let mut net = CriticNetwork::zeros(&[1, 1]);
        let r = net.train_step(&[vec![1.0]], &[f64::NAN], 0.01);
        assert!(matches!(r, Err(Error::Divergence(_))));
    }

    #[test]
    #[should_panic(expected = "critic input")]
    fn dimension_mismatch_panics() {
        CriticNetwork::zeros(&[3, 1]).forward(&[1.0]);
    }

    #[test]
    fn flat_parameter_indexing_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = CriticNetwork::random(&[2, 3, 1], &mut rng);
        assert_eq!(net.parameter_count(), 2 * 3 + 3 + 3 + 1);
        net.set_param(7, 42.0);
        assert_eq!(net.param(7), 42.0);
        assert_eq!(net.layers[0].biases[1], 42.0);
    }
}
