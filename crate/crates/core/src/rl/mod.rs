//! Reinforcement-learning backends over a common discrete state/action
//! interface.
//!
//! - [`learner`]: the tabular [`LearnerState`] with the Q-learning update,
//!   the eager eligibility-trace update of the average-reward POMDP learner
//!   and its policy-improvement step.
//! - [`jaakkola`]: an equivalent lazily-evaluated version of the same learner,
//!   fast enough for state spaces with hundreds of thousands of states.
//! - [`mlp`], [`rprop`], [`nfq`]: neural fitted Q iteration.

pub mod jaakkola;
pub mod learner;
pub mod mlp;
pub mod nfq;
pub mod policy;
pub mod rprop;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use jaakkola::JaakkolaLearner;
pub use learner::{
    jaakkola_improve, jaakkola_update, local_max_reached, op_count_sweep, q_update, LearnerState,
};
pub use mlp::MlpNetwork;
pub use nfq::{nfq_train, Experience, FeatureEncoder, NfqConfig, NfqOutcome};
pub use policy::{apply_floor, sample_action, StochasticPolicy};
pub use rprop::{rprop_batch_step, RpropParams, RpropState};

/// Discount schedule `γ_t` for the eligibility traces of the
/// average-reward learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaSchedule {
    /// `γ_t = 1 − 1/(1 + t/τ)`; rises monotonically from 0 towards 1.
    Harmonic { tau: f64 },
    /// Fixed `γ`, mainly for tests.
    Constant { gamma: f64 },
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule::Harmonic { tau: 1000.0 }
    }
}

impl GammaSchedule {
    /// Value at step `t` (1-based count of learner updates).
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            GammaSchedule::Harmonic { tau } => {
                let x = t as f64 / tau;
                1.0 - 1.0 / (1.0 + x)
            }
            GammaSchedule::Constant { gamma } => gamma,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            GammaSchedule::Harmonic { tau } if tau > 0.0 && tau.is_finite() => Ok(()),
            GammaSchedule::Constant { gamma } if (0.0..1.0).contains(&gamma) => Ok(()),
            other => Err(Error::Config(format!("invalid gamma schedule {other:?}"))),
        }
    }
}

/// Hyper-parameters shared by the learning backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    /// Q-learning step size, in (0, 1].
    pub alpha: f64,
    /// Q-learning / NFQ discount, in [0, 1].
    pub gamma: f64,
    /// Policy update rate of the average-reward learner, in [0, 1].
    pub epsilon: f64,
    pub gamma_schedule: GammaSchedule,
    /// Minimum probability kept on every action after an improvement step.
    pub exploration_floor: f64,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: 0.05,
            gamma_schedule: GammaSchedule::default(),
            exploration_floor: 0.01,
            episodes: 500,
            seed: 0,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0,1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0,1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon {} outside [0,1]", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.exploration_floor) {
            return Err(Error::Config(format!(
                "exploration floor {} outside [0,1)",
                self.exploration_floor
            )));
        }
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be positive".into()));
        }
        self.gamma_schedule.validate()
    }
}
