//! Dense tabular learner state and the eager update rules.
//!
//! Tables are row-major and indexed by `s * num_actions + a`. The eager
//! average-reward update touches every cell on every step; it is the
//! reference against which [`super::JaakkolaLearner`] is checked, and its
//! operation counter is the instrumented side of the complexity check.

use crate::error::{check_index, Error, Result};

use super::policy::{apply_floor, argmax_set, StochasticPolicy};
use super::LearningConfig;

/// Operations charged for the visited state-action pair, its state-level
/// trace and its state value.
pub const OPS_VISITED_PAIR: u64 = 24;
/// Operations charged per non-visited action of the visited state.
pub const OPS_SIBLING_ACTION: u64 = 4;
/// Operations charged per action of every non-visited state (pair trace,
/// pair value, plus the state trace and state value amortized per action).
pub const OPS_OTHER_STATE_ACTION: u64 = 8;
/// Operations charged per policy cell in an improvement sweep.
pub const OPS_POLICY_CELL: u64 = 4;

/// Q/V tables, eligibility traces and visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    num_states: usize,
    num_actions: usize,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub beta_sa: Vec<f64>,
    pub beta_s: Vec<f64>,
    pub count_sa: Vec<u64>,
    pub count_s: Vec<u64>,
    /// Running mean of every reward seen so far.
    pub avg_reward: f64,
    /// Number of rewards folded into `avg_reward`; also the step index `t`.
    pub steps: u64,
    pub op_counter: u64,
}

impl LearnerState {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        assert!(num_states > 0 && num_actions > 0, "empty learner table");
        let cells = num_states * num_actions;
        Self {
            num_states,
            num_actions,
            q: vec![0.0; cells],
            v: vec![0.0; num_states],
            beta_sa: vec![0.0; cells],
            beta_s: vec![0.0; num_states],
            count_sa: vec![0; cells],
            count_s: vec![0; num_states],
            avg_reward: 0.0,
            steps: 0,
            op_counter: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn idx(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.num_actions..(s + 1) * self.num_actions]
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        check_index("state", s, self.num_states)?;
        check_index("action", a, self.num_actions)
    }

    /// Fold a reward into the running mean; returns the advantage
    /// `R_t − R` measured against the mean *before* this reward.
    pub(crate) fn observe_reward(&mut self, reward: f64) -> f64 {
        let delta = reward - self.avg_reward;
        self.steps += 1;
        self.avg_reward += delta / self.steps as f64;
        delta
    }
}

/// One-step Q-learning:
/// `Q[s][a] += α (r + γ max_a' Q[s'][a'] − Q[s][a])`.
pub fn q_update(
    learner: &mut LearnerState,
    s: usize,
    a: usize,
    reward: f64,
    s_next: usize,
    cfg: &LearningConfig,
) -> Result<()> {
    q_update_with_step(learner, s, a, reward, Some(s_next), cfg.alpha, cfg.gamma)
}

/// Q-learning update with an explicit step size; `s_next = None` marks a
/// terminal transition with no bootstrap term.
pub fn q_update_with_step(
    learner: &mut LearnerState,
    s: usize,
    a: usize,
    reward: f64,
    s_next: Option<usize>,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    learner.check(s, a)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0,1]")));
    }
    let bootstrap = match s_next {
        Some(sn) => {
            check_index("next state", sn, learner.num_states)?;
            learner
                .q_row(sn)
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        }
        None => 0.0,
    };
    let i = learner.idx(s, a);
    learner.q[i] += alpha * (reward + gamma * bootstrap - learner.q[i]);
    learner.count_sa[i] += 1;
    learner.count_s[s] += 1;
    learner.op_counter += 1;
    Ok(())
}

/// Eager eligibility-trace update for the visit `(s, a)` with reward
/// `reward`. Every trace decays by `γ_t` and every value accumulates
/// `β (R_t − R)`; the visited pair and state mix in the new visit with
/// weight `1/K`.
pub fn jaakkola_update(
    learner: &mut LearnerState,
    s: usize,
    a: usize,
    reward: f64,
    cfg: &LearningConfig,
) -> Result<()> {
    let gamma_t = cfg.gamma_schedule.at(learner.steps + 1);
    jaakkola_update_with_gamma(learner, s, a, reward, gamma_t)
}

/// [`jaakkola_update`] with an explicit trace decay `γ_t`.
pub fn jaakkola_update_with_gamma(
    learner: &mut LearnerState,
    s: usize,
    a: usize,
    reward: f64,
    gamma_t: f64,
) -> Result<()> {
    learner.check(s, a)?;
    let na = learner.num_actions;
    let visited = learner.idx(s, a);
    learner.count_sa[visited] += 1;
    learner.count_s[s] += 1;
    let delta = learner.observe_reward(reward);

    for j in 0..learner.num_states {
        for l in 0..na {
            let i = j * na + l;
            if i == visited {
                let w = 1.0 / learner.count_sa[i] as f64;
                learner.beta_sa[i] = (1.0 - w) * gamma_t * learner.beta_sa[i] + w;
                learner.q[i] = (1.0 - w) * learner.q[i] + learner.beta_sa[i] * delta;
                learner.op_counter += OPS_VISITED_PAIR;
            } else {
                learner.beta_sa[i] *= gamma_t;
                learner.q[i] += learner.beta_sa[i] * delta;
                learner.op_counter += if j == s {
                    OPS_SIBLING_ACTION
                } else {
                    OPS_OTHER_STATE_ACTION
                };
            }
        }
        if j == s {
            let w = 1.0 / learner.count_s[j] as f64;
            learner.beta_s[j] = (1.0 - w) * gamma_t * learner.beta_s[j] + w;
            learner.v[j] = (1.0 - w) * learner.v[j] + learner.beta_s[j] * delta;
        } else {
            learner.beta_s[j] *= gamma_t;
            learner.v[j] += learner.beta_s[j] * delta;
        }
    }
    Ok(())
}

/// Move every row of `policy` towards the greedy policy on `Q`:
/// `π ← (1−ε)π + ε π¹`, ties in the argmax sharing the greedy mass
/// equally, then raise entries below `floor` and renormalize.
pub fn jaakkola_improve(
    policy: &mut StochasticPolicy,
    learner: &mut LearnerState,
    epsilon: f64,
    floor: f64,
) -> Result<()> {
    check_improve_args(policy, learner, epsilon)?;
    for s in 0..policy.num_states() {
        improve_row(policy.row_mut(s), learner.q_row(s), epsilon, floor)?;
        learner.op_counter += OPS_POLICY_CELL * learner.num_actions as u64;
    }
    Ok(())
}

pub(crate) fn check_improve_args(
    policy: &StochasticPolicy,
    learner: &LearnerState,
    epsilon: f64,
) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon {epsilon} outside [0,1]")));
    }
    if policy.num_states() != learner.num_states() || policy.num_actions() != learner.num_actions()
    {
        return Err(Error::Argument("policy and learner shapes differ".into()));
    }
    Ok(())
}

pub(crate) fn improve_row(row: &mut [f64], q_row: &[f64], epsilon: f64, floor: f64) -> Result<()> {
    if epsilon > 0.0 {
        let best = argmax_set(q_row);
        let share = epsilon / best.len() as f64;
        for p in row.iter_mut() {
            *p *= 1.0 - epsilon;
        }
        for a in best {
            row[a] += share;
        }
        let sum: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    apply_floor(row, floor)
}

/// True when no action improves on the state value:
/// `max_a [Q(s,a) − V(s)] ≤ 0`.
pub fn local_max_reached(learner: &LearnerState, s: usize) -> Result<bool> {
    check_index("state", s, learner.num_states)?;
    let v = learner.v[s];
    let best = learner
        .q_row(s)
        .iter()
        .map(|q| q - v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best <= 0.0)
}

/// Closed-form operation count of `K` full sweeps over `S` states with
/// `A` actions, one update plus one improvement sweep per visit:
/// `K·S·((24 + (A−1)·4) + (S−1)·A·8 + S·A·4)`.
pub fn op_count_sweep(states: u64, actions: u64, visits: u64) -> u64 {
    visits * states * per_visit_ops(states, actions)
}

pub(crate) fn per_visit_ops(states: u64, actions: u64) -> u64 {
    (OPS_VISITED_PAIR + (actions - 1) * OPS_SIBLING_ACTION)
        + (states - 1) * actions * OPS_OTHER_STATE_ACTION
        + states * actions * OPS_POLICY_CELL
}
