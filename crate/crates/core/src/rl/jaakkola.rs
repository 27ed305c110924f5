//! Lazily evaluated average-reward learner.
//!
//! Between two visits a cell only sees `β ← γ_t β` and `Q ← Q + β δ_t`.
//! With the global products `G_t = Π γ_τ` and `H_t = Σ G_τ δ_τ`, a cell
//! last written at step `t0` with trace `β0` satisfies
//!
//! ```text
//! β_t = (β0 / G_t0) · G_t
//! Q_t = Q_t0 + (β0 / G_t0) · (H_t − H_t0)
//! ```
//!
//! so each step costs `O(1)` instead of `O(S·A)`. Whenever `G_t` drops
//! below a threshold every cell is materialized and the products restart
//! at 1, which keeps `β0 / G_t0` bounded.

use crate::error::{check_index, Result};

use super::learner::{
    check_improve_args, improve_row, per_visit_ops, LearnerState, OPS_POLICY_CELL,
};
use super::policy::StochasticPolicy;
use super::GammaSchedule;

const DEFAULT_RESCALE_BELOW: f64 = 1e-6;

#[derive(Debug, Clone)]
struct LazyCell {
    value: f64,
    scaled_beta: f64,
    mark: f64,
}

impl LazyCell {
    const ZERO: LazyCell = LazyCell {
        value: 0.0,
        scaled_beta: 0.0,
        mark: 0.0,
    };

    #[inline]
    fn value(&self, h: f64) -> f64 {
        self.value + self.scaled_beta * (h - self.mark)
    }

    #[inline]
    fn visit(&mut self, count: u64, delta: f64, delta_in_h: f64, g: f64, h: f64) {
        // value before this step's increment entered `h`
        let prev_value = self.value(h - g * delta_in_h);
        let decayed = self.scaled_beta * g;
        let w = 1.0 / count as f64;
        let beta = (1.0 - w) * decayed + w;
        self.value = (1.0 - w) * prev_value + beta * delta;
        self.scaled_beta = beta / g;
        self.mark = h;
    }

    #[inline]
    fn materialize(&mut self, g: f64, h: f64) {
        self.value = self.value(h);
        self.scaled_beta *= g;
        self.mark = 0.0;
    }
}

/// Average-reward learner with `O(A)` cost per visit.
#[derive(Debug, Clone)]
pub struct JaakkolaLearner {
    num_states: usize,
    num_actions: usize,
    pairs: Vec<LazyCell>,
    states: Vec<LazyCell>,
    count_sa: Vec<u64>,
    count_s: Vec<u64>,
    schedule: GammaSchedule,
    g: f64,
    h: f64,
    avg_reward: f64,
    steps: u64,
    equivalent_ops: u64,
    rescale_below: f64,
}

impl JaakkolaLearner {
    pub fn new(num_states: usize, num_actions: usize, schedule: GammaSchedule) -> Self {
        assert!(num_states > 0 && num_actions > 0, "empty learner table");
        Self {
            num_states,
            num_actions,
            pairs: vec![LazyCell::ZERO; num_states * num_actions],
            states: vec![LazyCell::ZERO; num_states],
            count_sa: vec![0; num_states * num_actions],
            count_s: vec![0; num_states],
            schedule,
            g: 1.0,
            h: 0.0,
            avg_reward: 0.0,
            steps: 0,
            equivalent_ops: 0,
            rescale_below: DEFAULT_RESCALE_BELOW,
        }
    }

    /// Threshold on the running trace product below which all cells are
    /// materialized.
    pub fn with_rescale_threshold(mut self, threshold: f64) -> Self {
        assert!(threshold > 0.0 && threshold < 1.0);
        self.rescale_below = threshold;
        self
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn avg_reward(&self) -> f64 {
        self.avg_reward
    }

    pub fn state_visits(&self) -> &[u64] {
        &self.count_s
    }

    /// Operation count the eager update would have performed so far
    /// (update plus single-state improvement charged as a full sweep).
    pub fn equivalent_ops(&self) -> u64 {
        self.equivalent_ops
    }

    /// Apply one visit with reward `reward`, using `γ_t` from the schedule.
    pub fn update(&mut self, s: usize, a: usize, reward: f64) -> Result<()> {
        let gamma_t = self.schedule.at(self.steps + 1);
        self.update_with_gamma(s, a, reward, gamma_t)
    }

    pub fn update_with_gamma(&mut self, s: usize, a: usize, reward: f64, gamma_t: f64) -> Result<()> {
        check_index("state", s, self.num_states)?;
        check_index("action", a, self.num_actions)?;
        let delta = reward - self.avg_reward;
        self.steps += 1;
        self.avg_reward += delta / self.steps as f64;

        if gamma_t <= 0.0 {
            // every trace is annihilated: fold history into the stored
            // values and restart the running products
            self.materialize_all();
            for c in self.pairs.iter_mut().chain(self.states.iter_mut()) {
                c.scaled_beta = 0.0;
            }
            self.g = 1.0;
            self.h = 0.0;
        } else {
            self.g *= gamma_t;
            self.h += self.g * delta;
        }

        let i = s * self.num_actions + a;
        self.count_sa[i] += 1;
        self.count_s[s] += 1;
        let (g, h) = (self.g, self.h);
        let delta_step = if gamma_t <= 0.0 { 0.0 } else { delta };
        self.pairs[i].visit(self.count_sa[i], delta, delta_step, g, h);
        self.states[s].visit(self.count_s[s], delta, delta_step, g, h);

        self.equivalent_ops += per_visit_ops(self.num_states as u64, self.num_actions as u64)
            - OPS_POLICY_CELL * (self.num_states * self.num_actions) as u64;

        if self.g < self.rescale_below {
            self.materialize_all();
            self.g = 1.0;
            self.h = 0.0;
        }
        Ok(())
    }

    fn materialize_all(&mut self) {
        let (g, h) = (self.g, self.h);
        for c in self.pairs.iter_mut().chain(self.states.iter_mut()) {
            c.materialize(g, h);
        }
    }

    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.pairs[s * self.num_actions + a].value(self.h)
    }

    pub fn v(&self, s: usize) -> f64 {
        self.states[s].value(self.h)
    }

    pub fn q_row(&self, s: usize) -> Vec<f64> {
        (0..self.num_actions).map(|a| self.q(s, a)).collect()
    }

    pub fn beta_sa(&self, s: usize, a: usize) -> f64 {
        self.pairs[s * self.num_actions + a].scaled_beta * self.g
    }

    pub fn beta_s(&self, s: usize) -> f64 {
        self.states[s].scaled_beta * self.g
    }

    /// Improvement step restricted to state `s`.
    pub fn improve_state(
        &mut self,
        policy: &mut StochasticPolicy,
        s: usize,
        epsilon: f64,
        floor: f64,
    ) -> Result<()> {
        check_index("state", s, self.num_states)?;
        if policy.num_actions() != self.num_actions || policy.num_states() != self.num_states {
            return Err(crate::Error::Argument("policy and learner shapes differ".into()));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(crate::Error::Config(format!("epsilon {epsilon} outside [0,1]")));
        }
        let q = self.q_row(s);
        improve_row(policy.row_mut(s), &q, epsilon, floor)?;
        self.equivalent_ops += OPS_POLICY_CELL * (self.num_states * self.num_actions) as u64;
        Ok(())
    }

    /// Full improvement sweep over every state.
    pub fn improve_all(
        &mut self,
        policy: &mut StochasticPolicy,
        epsilon: f64,
        floor: f64,
    ) -> Result<()> {
        let snapshot = self.to_learner_state();
        check_improve_args(policy, &snapshot, epsilon)?;
        for s in 0..self.num_states {
            improve_row(policy.row_mut(s), snapshot.q_row(s), epsilon, floor)?;
        }
        self.equivalent_ops += OPS_POLICY_CELL * (self.num_states * self.num_actions) as u64;
        Ok(())
    }

    /// Materialized dense snapshot of the current tables.
    pub fn to_learner_state(&self) -> LearnerState {
        let mut out = LearnerState::new(self.num_states, self.num_actions);
        for (i, c) in self.pairs.iter().enumerate() {
            out.q[i] = c.value(self.h);
            out.beta_sa[i] = c.scaled_beta * self.g;
        }
        for (s, c) in self.states.iter().enumerate() {
            out.v[s] = c.value(self.h);
            out.beta_s[s] = c.scaled_beta * self.g;
        }
        out.count_sa.copy_from_slice(&self.count_sa);
        out.count_s.copy_from_slice(&self.count_s);
        out.avg_reward = self.avg_reward;
        out.steps = self.steps;
        out.op_counter = self.equivalent_ops;
        out
    }
}
