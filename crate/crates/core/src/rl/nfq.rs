//! Neural fitted Q iteration in cost space.
//!
//! Each outer iteration rebuilds the regression targets
//! `cost + γ · min_a Q_k(s', a)` from the current network over the whole
//! stored experience set, then fits the network to them with full-batch
//! Rprop. Rewards enter as `cost = −reward`.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

use super::mlp::MlpNetwork;
use super::rprop::{RpropParams, RpropState};

/// One stored transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: usize,
    pub action: usize,
    pub cost: f64,
    pub next_state: usize,
    /// No bootstrap from `next_state` when set (episode ended).
    pub terminal: bool,
}

impl Experience {
    pub fn new(state: usize, action: usize, cost: f64, next_state: usize) -> Self {
        Self {
            state,
            action,
            cost,
            next_state,
            terminal: false,
        }
    }

    pub fn from_reward(state: usize, action: usize, reward: f64, next_state: usize) -> Self {
        Self::new(state, action, -reward, next_state)
    }
}

/// Maps a discrete state to a real feature vector.
pub trait FeatureEncoder: Sync {
    fn num_states(&self) -> usize;
    fn dim(&self) -> usize;
    fn encode(&self, state: usize, out: &mut [f64]);
}

/// One-hot state features; suitable for small state spaces.
#[derive(Debug, Clone, Copy)]
pub struct OneHotEncoder(pub usize);

impl FeatureEncoder for OneHotEncoder {
    fn num_states(&self) -> usize {
        self.0
    }

    fn dim(&self) -> usize {
        self.0
    }

    fn encode(&self, state: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        out[state] = 1.0;
    }
}

/// Mixed-radix digits of the state index, each scaled to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct RadixEncoder {
    radices: Vec<usize>,
}

impl RadixEncoder {
    pub fn new(radices: Vec<usize>) -> Self {
        assert!(radices.iter().all(|r| *r > 0));
        Self { radices }
    }
}

impl FeatureEncoder for RadixEncoder {
    fn num_states(&self) -> usize {
        self.radices.iter().product()
    }

    fn dim(&self) -> usize {
        self.radices.len()
    }

    fn encode(&self, state: usize, out: &mut [f64]) {
        let mut rest = state;
        for (k, r) in self.radices.iter().enumerate() {
            let digit = rest % r;
            rest /= r;
            out[k] = if *r > 1 {
                digit as f64 / (*r - 1) as f64
            } else {
                0.0
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NfqConfig {
    pub gamma: f64,
    /// Outer iterations `N`.
    pub iterations: usize,
    /// Rprop epochs per outer iteration.
    pub inner_epochs: usize,
    pub hidden: Vec<usize>,
}

impl Default for NfqConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            iterations: 20,
            inner_epochs: 200,
            hidden: vec![20, 20],
        }
    }
}

impl NfqConfig {
    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut sizes = vec![input_dim];
        sizes.extend(&self.hidden);
        sizes.push(1);
        sizes
    }
}

/// Network input for a (state, action) pair: state features followed by a
/// one-hot action.
pub fn encode_input(
    encoder: &dyn FeatureEncoder,
    num_actions: usize,
    state: usize,
    action: usize,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.resize(encoder.dim() + num_actions, 0.0);
    encoder.encode(state, &mut out[..encoder.dim()]);
    out[encoder.dim() + action] = 1.0;
}

/// Approximate cost-to-go `Q(s, ·)` for every action.
pub fn q_costs(
    net: &MlpNetwork,
    encoder: &dyn FeatureEncoder,
    num_actions: usize,
    state: usize,
) -> Vec<f64> {
    let mut buf = Vec::new();
    (0..num_actions)
        .map(|a| {
            encode_input(encoder, num_actions, state, a, &mut buf);
            net.forward(&buf)
        })
        .collect()
}

/// Action with the smallest predicted cost, lowest index on ties.
pub fn greedy_cost_action(
    net: &MlpNetwork,
    encoder: &dyn FeatureEncoder,
    num_actions: usize,
    state: usize,
) -> usize {
    let costs = q_costs(net, encoder, num_actions, state);
    let mut best = 0;
    for a in 1..num_actions {
        if costs[a] < costs[best] {
            best = a;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct NfqOutcome {
    pub net: MlpNetwork,
    /// Batch error `Σ (Q_k(s_i,a_i) − target_i)²` measured against each
    /// iteration's targets before that iteration's fit.
    pub batch_errors: Vec<f64>,
    /// Batch error after each iteration's fit.
    pub fitted_errors: Vec<f64>,
}

/// Run `cfg.iterations` outer NFQ iterations starting from `net`.
pub fn nfq_train(
    experiences: &[Experience],
    net: MlpNetwork,
    encoder: &dyn FeatureEncoder,
    num_actions: usize,
    cfg: &NfqConfig,
) -> Result<NfqOutcome> {
    if experiences.is_empty() {
        return Err(Error::Argument("empty experience set".into()));
    }
    if net.input_dim() != encoder.dim() + num_actions {
        return Err(Error::Argument(format!(
            "network input {} does not match encoder {} + actions {}",
            net.input_dim(),
            encoder.dim(),
            num_actions
        )));
    }
    for e in experiences {
        check_index("state", e.state, encoder.num_states())?;
        check_index("next state", e.next_state, encoder.num_states())?;
        check_index("action", e.action, num_actions)?;
    }

    let inputs: Vec<Vec<f64>> = experiences
        .iter()
        .map(|e| {
            let mut buf = Vec::new();
            encode_input(encoder, num_actions, e.state, e.action, &mut buf);
            buf
        })
        .collect();

    let mut net = net;
    let mut batch_errors = Vec::with_capacity(cfg.iterations);
    let mut fitted_errors = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let targets: Vec<f64> = experiences
            .iter()
            .map(|e| {
                if e.terminal || cfg.gamma == 0.0 {
                    e.cost
                } else {
                    let next = q_costs(&net, encoder, num_actions, e.next_state);
                    e.cost + cfg.gamma * next.iter().cloned().fold(f64::INFINITY, f64::min)
                }
            })
            .collect();
        batch_errors.push(batch_error(&net, &inputs, &targets));

        let mut rprop = RpropState::new(net.num_params(), RpropParams::default());
        let mut grad = vec![0.0; net.num_params()];
        for _ in 0..cfg.inner_epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (x, t) in inputs.iter().zip(&targets) {
                let y = net.forward(x);
                net.accumulate_gradient(x, 2.0 * (y - t), &mut grad);
            }
            rprop.step(net.params_mut(), &grad)?;
        }
        fitted_errors.push(batch_error(&net, &inputs, &targets));
    }
    Ok(NfqOutcome {
        net,
        batch_errors,
        fitted_errors,
    })
}

fn batch_error(net: &MlpNetwork, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
    inputs
        .iter()
        .zip(targets)
        .map(|(x, t)| (net.forward(x) - t).powi(2))
        .sum()
}
