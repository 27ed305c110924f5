//! Kolmogorov-Smirnov test against a discrete (step) null distribution.
//!
//! Tail probabilities are exact: the multinomial sample is built one
//! support point at a time as a chain of conditional binomials, and the
//! probability mass of paths that never reach the observed deviation is
//! carried forward. This is the first-passage form of Conover's
//! recursion and needs no asymptotic approximation.

use crate::error::{Error, Result};

/// Rejection level.
pub const ALPHA: f64 = 0.05;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub d: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub p_value: f64,
    pub rejected: bool,
}

fn check_cdf(name: &str, cdf: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for (k, &f) in cdf.iter().enumerate() {
        if !f.is_finite() || f < prev - TOL || f > 1.0 + TOL {
            return Err(Error::Argument(format!("{name} is not a CDF at point {k}: {f}")));
        }
        prev = f;
    }
    if (prev - 1.0).abs() > 1e-6 {
        return Err(Error::Argument(format!("{name} ends at {prev}, not 1")));
    }
    Ok(())
}

/// Test `empirical_cdf` (from `n` observations) against `model_cdf`.
///
/// Both one-sided tails are evaluated at the two-sided statistic `d` and
/// summed: P(D ≥ d) = P(D⁺ ≥ d) + P(D⁻ ≥ d), capped at 1.
pub fn ks_discrete(model_cdf: &[f64], empirical_cdf: &[f64], n: u64) -> Result<KsOutcome> {
    if model_cdf.is_empty() || model_cdf.len() != empirical_cdf.len() {
        return Err(Error::Argument(format!(
            "CDFs over different supports: {} vs {} points",
            model_cdf.len(),
            empirical_cdf.len()
        )));
    }
    if n == 0 {
        return Err(Error::Argument("KS test needs at least one observation".into()));
    }
    check_cdf("model CDF", model_cdf)?;
    check_cdf("empirical CDF", empirical_cdf)?;

    let mut d_plus = 0.0f64;
    let mut d_minus = 0.0f64;
    for (h, s) in model_cdf.iter().zip(empirical_cdf) {
        d_plus = d_plus.max(s - h);
        d_minus = d_minus.max(h - s);
    }
    let d = d_plus.max(d_minus);
    let p_value = if d <= TOL {
        1.0
    } else {
        (upper_tail(model_cdf, n, d, Side::Plus) + upper_tail(model_cdf, n, d, Side::Minus)).min(1.0)
    };
    Ok(KsOutcome {
        d,
        d_plus,
        d_minus,
        p_value,
        rejected: p_value <= ALPHA,
    })
}

#[derive(Clone, Copy)]
enum Side {
    Plus,
    Minus,
}

/// P(D ≥ d) under the model for one side.
fn upper_tail(cdf: &[f64], n: u64, d: f64, side: Side) -> f64 {
    let n = n as usize;
    let ln_fact = ln_factorials(n);
    let nf = n as f64;
    // dist[c]: probability that c observations fall at or below the
    // current point and no crossing has happened yet.
    let mut dist = vec![0.0; n + 1];
    dist[0] = 1.0;
    let mut prev_f = 0.0;
    for &f in cdf {
        let mass = (f - prev_f).max(0.0);
        let rest = 1.0 - prev_f;
        let q = if rest <= 0.0 { 1.0 } else { (mass / rest).clamp(0.0, 1.0) };
        let mut next = vec![0.0; n + 1];
        for (c, &pc) in dist.iter().enumerate() {
            if pc < 1e-300 {
                continue;
            }
            let m = n - c;
            binomial_into(m, q, &ln_fact, |j, pj| next[c + j] += pc * pj);
        }
        for (c, v) in next.iter_mut().enumerate() {
            let s = c as f64 / nf;
            let crossed = match side {
                Side::Plus => s - f >= d - TOL,
                Side::Minus => f - s >= d - TOL,
            };
            if crossed {
                *v = 0.0;
            }
        }
        dist = next;
        prev_f = f;
    }
    let survive: f64 = dist.iter().sum();
    (1.0 - survive).clamp(0.0, 1.0)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

fn binomial_into(m: usize, q: f64, ln_fact: &[f64], mut emit: impl FnMut(usize, f64)) {
    if q <= 0.0 {
        emit(0, 1.0);
        return;
    }
    if q >= 1.0 {
        emit(m, 1.0);
        return;
    }
    let (lq, lr) = (q.ln(), (1.0 - q).ln());
    for j in 0..=m {
        let lp = ln_fact[m] - ln_fact[j] - ln_fact[m - j] + j as f64 * lq + (m - j) as f64 * lr;
        if lp > -745.0 {
            emit(j, lp.exp());
        }
    }
}
