//! Multi-layer perceptron with hand-derived backpropagation.
//!
//! Hidden layers are fully connected with ReLU activations; the output layer
//! is a single linear unit. Parameters live in one flat vector, laid out per
//! layer as the weight matrix (row-major, out x in) followed by the biases.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::trainer::GradientNet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `[input, hidden.., 1]`
    pub layer_sizes: Vec<usize>,
    pub params: Vec<f64>,
}

fn layer_param_len(sizes: &[usize]) -> usize {
    sizes
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum::<usize>()
}

impl MlpModel {
    /// Zero-initialized network: `n_layers` hidden layers of `layer_size`.
    pub fn new(input_size: usize, n_layers: usize, layer_size: usize) -> Self {
        let mut layer_sizes = vec![input_size];
        layer_sizes.extend(std::iter::repeat(layer_size).take(n_layers));
        layer_sizes.push(1);
        let params = vec![0.0; layer_param_len(&layer_sizes)];
        Self {
            layer_sizes,
            params,
        }
    }

    /// Weights drawn uniformly from (-1/sqrt(fan_in), +1/sqrt(fan_in)),
    /// biases zero.
    pub fn init_weights<R: Rng>(&mut self, rng: &mut R) {
        let mut offset = 0;
        for w in self.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                self.params[offset] = rng.random_range(-bound..bound);
                offset += 1;
            }
            for _ in 0..fan_out {
                self.params[offset] = 0.0;
                offset += 1;
            }
        }
    }

    fn forward_traced(&self, input: &[f64]) -> (Vec<Vec<f64>>, f64) {
        let n_layers = self.layer_sizes.len() - 1;
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut current = input.to_vec();
        let mut offset = 0;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let mut next = vec![0.0; fan_out];
            for (o, item) in next.iter_mut().enumerate() {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let mut z = biases[o];
                for (wv, xv) in row.iter().zip(&current) {
                    z += wv * xv;
                }
                *item = if l + 1 < n_layers { z.max(0.0) } else { z };
            }
            activations.push(next.clone());
            current = next;
        }
        let out = current[0];
        (activations, out)
    }
}

impl GradientNet for MlpModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn predict_window(&self, window: &[Vec<f64>]) -> f64 {
        let flat: Vec<f64> = window.iter().flatten().copied().collect();
        self.forward_traced(&flat).1
    }

    fn batch_loss_grad(&self, batch: &[(&[Vec<f64>], f64)], grad: &mut [f64]) -> f64 {
        let n_layers = self.layer_sizes.len() - 1;
        let batch_n = batch.len() as f64;
        let mut loss = 0.0;

        // Per-layer parameter offsets.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut acc = 0;
        for w in self.layer_sizes.windows(2) {
            offsets.push(acc);
            acc += w[0] * w[1] + w[1];
        }

        for (window, target) in batch {
            let input: Vec<f64> = window.iter().flatten().copied().collect();
            let (activations, out) = self.forward_traced(&input);
            let err = out - target;
            loss += err * err / batch_n;

            // delta for the current layer's outputs, starting at the head.
            let mut delta = vec![2.0 * err / batch_n];
            for l in (0..n_layers).rev() {
                let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
                let offset = offsets[l];
                let below: &[f64] = if l == 0 { &input } else { &activations[l - 1] };
                {
                    let (gw, gb) = grad[offset..offset + fan_in * fan_out + fan_out]
                        .split_at_mut(fan_in * fan_out);
                    for o in 0..fan_out {
                        let d = delta[o];
                        gb[o] += d;
                        let row = &mut gw[o * fan_in..(o + 1) * fan_in];
                        for (g, x) in row.iter_mut().zip(below) {
                            *g += d * x;
                        }
                    }
                }
                if l == 0 {
                    break;
                }
                let weights = &self.params[offset..offset + fan_in * fan_out];
                let mut next_delta = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let d = delta[o];
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    for (nd, wv) in next_delta.iter_mut().zip(row) {
                        *nd += d * wv;
                    }
                }
                // ReLU derivative: active where the activation is positive.
                for (nd, a) in next_delta.iter_mut().zip(&activations[l - 1]) {
                    if *a <= 0.0 {
                        *nd = 0.0;
                    }
                }
                delta = next_delta;
            }
        }
        loss
    }
}
