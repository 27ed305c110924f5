//! Small fully-connected network: sigmoid hidden layers, one linear output.

use rand::Rng;

use crate::error::{Error, Result};

/// Multilayer perceptron with all parameters in one flat vector.
///
/// For layer `k` (inputs `n_in`, outputs `n_out`) the parameter block is
/// `n_out × n_in` weights in row-major order followed by `n_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MlpNetwork {
    /// Random initialization, weights uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Argument(format!("bad layer sizes {layer_sizes:?}")));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(Error::Argument("network output must be scalar".into()));
        }
        let mut params = Vec::with_capacity(Self::count_params(layer_sizes));
        for w in layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            for _ in 0..n_in * n_out {
                params.push(rng.random_range(-bound..bound));
            }
            for _ in 0..n_out {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    fn count_params(layer_sizes: &[usize]) -> usize {
        layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn forward_activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.layer_sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        let mut offset = 0;
        for (k, w) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let prev = &acts[k];
            let last = k + 1 == n_layers;
            let out: Vec<f64> = (0..n_out)
                .map(|j| {
                    let row = &weights[j * n_in..(j + 1) * n_in];
                    let z = biases[j] + row.iter().zip(prev).map(|(w, x)| w * x).sum::<f64>();
                    if last {
                        z
                    } else {
                        sigmoid(z)
                    }
                })
                .collect();
            acts.push(out);
            offset += n_in * n_out + n_out;
        }
        acts
    }

    /// Network output for one input vector.
    pub fn forward(&self, input: &[f64]) -> f64 {
        debug_assert_eq!(input.len(), self.input_dim());
        self.forward_activations(input).last().unwrap()[0]
    }

    /// Add `d_out · ∂output/∂θ` to `grad` and return the output.
    pub fn accumulate_gradient(&self, input: &[f64], d_out: f64, grad: &mut [f64]) -> f64 {
        let acts = self.forward_activations(input);
        let n_layers = self.layer_sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.layer_sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        // delta holds ∂L/∂z for the current layer
        let mut delta = vec![d_out];
        for k in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[k], self.layer_sizes[k + 1]);
            let base = offsets[k];
            let prev = &acts[k];
            for j in 0..n_out {
                let row = base + j * n_in;
                for i in 0..n_in {
                    grad[row + i] += delta[j] * prev[i];
                }
                grad[base + n_in * n_out + j] += delta[j];
            }
            if k > 0 {
                let weights = &self.params[base..base + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|j| weights[j * n_in + i] * delta[j]).sum();
                        let a = prev[i];
                        back * a * (1.0 - a)
                    })
                    .collect();
            }
        }
        acts[n_layers][0]
    }
}
