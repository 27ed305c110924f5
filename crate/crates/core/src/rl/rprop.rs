//! Resilient backpropagation (sign-based batch updates with adaptive
//! per-weight step sizes).

use crate::error::{Error, Result};

use super::mlp::MlpNetwork;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpropParams {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub step_init: f64,
}

impl Default for RpropParams {
    fn default() -> Self {
        Self {
            eta_plus: 1.2,
            eta_minus: 0.5,
            step_min: 1e-6,
            step_max: 50.0,
            step_init: 0.1,
        }
    }
}

/// Per-weight step sizes and the previous gradient.
#[derive(Debug, Clone)]
pub struct RpropState {
    params: RpropParams,
    steps: Vec<f64>,
    prev_grad: Vec<f64>,
}

impl RpropState {
    pub fn new(num_params: usize, params: RpropParams) -> Self {
        Self {
            params,
            steps: vec![params.step_init; num_params],
            prev_grad: vec![0.0; num_params],
        }
    }

    pub fn for_network(net: &MlpNetwork) -> Self {
        Self::new(net.num_params(), RpropParams::default())
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Update `weights` in place from the full-batch gradient.
    pub fn step(&mut self, weights: &mut [f64], grad: &[f64]) -> Result<()> {
        if weights.len() != self.steps.len() || grad.len() != self.steps.len() {
            return Err(Error::Argument(format!(
                "gradient shape {} does not match {} parameters",
                grad.len(),
                self.steps.len()
            )));
        }
        let p = self.params;
        for i in 0..weights.len() {
            let g = grad[i];
            let agreement = g * self.prev_grad[i];
            if agreement > 0.0 {
                self.steps[i] = (self.steps[i] * p.eta_plus).min(p.step_max);
            } else if agreement < 0.0 {
                self.steps[i] = (self.steps[i] * p.eta_minus).max(p.step_min);
            }
            if g > 0.0 {
                weights[i] -= self.steps[i];
            } else if g < 0.0 {
                weights[i] += self.steps[i];
            }
            self.prev_grad[i] = g;
        }
        Ok(())
    }
}

/// One Rprop batch step on a network.
pub fn rprop_batch_step(
    net: &mut MlpNetwork,
    state: &mut RpropState,
    gradients: &[f64],
) -> Result<()> {
    state.step(net.params_mut(), gradients)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut w = vec![0.3, -0.7];
        let mut st = RpropState::new(2, RpropParams::default());
        st.step(&mut w, &[0.0, 0.0]).unwrap();
        assert_eq!(w, vec![0.3, -0.7]);
    }

    #[test]
    fn step_grows_on_agreement() {
        let mut w = vec![1.0];
        let mut st = RpropState::new(1, RpropParams::default());
        st.step(&mut w, &[2.0]).unwrap();
        assert!((w[0] - 0.9).abs() < 1e-15);
        st.step(&mut w, &[0.5]).unwrap();
        assert!((st.steps()[0] - 0.12).abs() < 1e-15);
        assert!((w[0] - 0.78).abs() < 1e-12);
    }

    #[test]
    fn step_shrinks_on_flip() {
        let mut w = vec![0.0];
        let mut st = RpropState::new(1, RpropParams::default());
        st.step(&mut w, &[1.0]).unwrap();
        st.step(&mut w, &[-1.0]).unwrap();
        assert!((st.steps()[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn step_bounds_hold() {
        let mut w = vec![0.0];
        let mut st = RpropState::new(1, RpropParams::default());
        for _ in 0..200 {
            st.step(&mut w, &[1.0]).unwrap();
        }
        assert_eq!(st.steps()[0], 50.0);
        for k in 0..200 {
            let g = if k % 2 == 0 { 1.0 } else { -1.0 };
            st.step(&mut w, &[g]).unwrap();
        }
        assert_eq!(st.steps()[0], 1e-6);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut w = vec![0.0; 3];
        let mut st = RpropState::new(3, RpropParams::default());
        assert!(matches!(st.step(&mut w, &[1.0]), Err(Error::Argument(_))));
    }
}
