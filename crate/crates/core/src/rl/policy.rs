//! Tabular stochastic policies.

use rand::Rng;

use crate::error::{check_index, Error, Result};

/// Probability table over actions, one row per discrete state.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    /// Uniform distribution over actions in every state.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        assert!(num_states > 0 && num_actions > 0, "empty policy table");
        let p = 1.0 / num_actions as f64;
        Self {
            num_states,
            num_actions,
            probs: vec![p; num_states * num_actions],
        }
    }

    /// Deterministic policy built from one action per state.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        if actions.is_empty() || num_actions == 0 {
            return Err(Error::Argument("empty policy table".into()));
        }
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            check_index("action", a, num_actions)?;
            probs[s * num_actions + a] = 1.0;
        }
        Ok(Self {
            num_states: actions.len(),
            num_actions,
            probs,
        })
    }

    /// Build from a flat row-major table; every row must be a distribution.
    pub fn from_table(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Argument("empty policy table".into()));
        }
        if probs.len() != num_states * num_actions {
            return Err(Error::Argument(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                num_states * num_actions
            )));
        }
        let policy = Self {
            num_states,
            num_actions,
            probs,
        };
        for s in 0..num_states {
            let row = policy.row(s);
            if row.iter().any(|p| !(0.0..=1.0 + 1e-12).contains(p) || p.is_nan()) {
                return Err(Error::Argument(format!("state {s}: probability outside [0,1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Argument(format!("state {s}: row sums to {sum}")));
            }
        }
        Ok(policy)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub(crate) fn row_mut(&mut self, s: usize) -> &mut [f64] {
        let a = self.num_actions;
        &mut self.probs[s * a..(s + 1) * a]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    /// Replace one row; the new row must be a probability distribution.
    pub fn set_row(&mut self, s: usize, row: &[f64]) -> Result<()> {
        check_index("state", s, self.num_states)?;
        if row.len() != self.num_actions {
            return Err(Error::Argument(format!(
                "row has {} entries, expected {}",
                row.len(),
                self.num_actions
            )));
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("state {s}: not a distribution")));
        }
        self.row_mut(s).copy_from_slice(row);
        Ok(())
    }

    /// Most probable action, lowest index on ties.
    pub fn greedy_action(&self, s: usize) -> usize {
        argmax_first(self.row(s))
    }

    /// Draw an action from `π(·|s)` by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_row(self.row(s), rng)
    }

    /// Shannon entropy (natural log) of one row.
    pub fn row_entropy(&self, s: usize) -> f64 {
        entropy_unchecked(self.row(s))
    }

    /// Mean row entropy over the whole table.
    pub fn mean_entropy(&self) -> f64 {
        (0..self.num_states).map(|s| self.row_entropy(s)).sum::<f64>() / self.num_states as f64
    }
}

/// Sample an action index for state `s`. Identical generator state and
/// policy always yield the identical action.
pub fn sample_action<R: Rng + ?Sized>(
    policy: &StochasticPolicy,
    s: usize,
    rng: &mut R,
) -> Result<usize> {
    check_index("state", s, policy.num_states())?;
    Ok(policy.sample(s, rng))
}

pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // u landed in the rounding gap above the accumulated sum
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

pub(crate) fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|x| **x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

/// Indices of the maximal entries of `xs`, using a relative tolerance so
/// that values equal up to rounding count as ties.
pub(crate) fn argmax_set(xs: &[f64]) -> Vec<usize> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * max.abs().max(1.0);
    xs.iter()
        .enumerate()
        .filter(|(_, x)| max - **x <= tol)
        .map(|(i, _)| i)
        .collect()
}

/// Raise every entry below `floor` to exactly `floor` and rescale the rest
/// so the row still sums to one. Repeats until no rescaled entry dips
/// below the floor, which makes the operation idempotent.
pub fn apply_floor(row: &mut [f64], floor: f64) -> Result<()> {
    if floor <= 0.0 {
        return Ok(());
    }
    let n = row.len();
    if floor * n as f64 >= 1.0 {
        return Err(Error::Config(format!(
            "floor {floor} infeasible for {n} actions"
        )));
    }
    let mut pinned = vec![false; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            if !pinned[i] && row[i] < floor {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let m = pinned.iter().filter(|p| **p).count();
        let free_sum: f64 = (0..n).filter(|i| !pinned[*i]).map(|i| row[i]).sum();
        let budget = 1.0 - floor * m as f64;
        for i in 0..n {
            if pinned[i] {
                row[i] = floor;
            } else if free_sum > 0.0 {
                row[i] *= budget / free_sum;
            }
        }
    }
    Ok(())
}
