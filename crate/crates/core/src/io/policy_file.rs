//! Text tables for policies and learner checkpoints.
//!
//! ```text
//! #levelk-policy v1 states=<S> actions=<A> level=<k>
//! 0,1.42857142857e-1,...
//! ```
//!
//! Values carry 12 significant digits. Checkpoints use the same layout
//! with `#levelk-learner v1` and per state the columns
//! `state, V, visits, β, (π, Q, visits, β) × A`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rl::{LearnerState, StochasticPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyHeader {
    pub states: usize,
    pub actions: usize,
    pub level: usize,
}

const POLICY_MAGIC: &str = "#levelk-policy v1";
const LEARNER_MAGIC: &str = "#levelk-learner v1";

fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn format_policy(policy: &StochasticPolicy, level: usize) -> String {
    let mut out = String::with_capacity(policy.num_states() * (8 + 19 * policy.num_actions()));
    let _ = writeln!(
        out,
        "{POLICY_MAGIC} states={} actions={} level={level}",
        policy.num_states(),
        policy.num_actions()
    );
    for s in 0..policy.num_states() {
        out.push_str(&s.to_string());
        for p in policy.row(s) {
            out.push(',');
            out.push_str(&sig12(*p));
        }
        out.push('\n');
    }
    out
}

pub fn write_policy(path: &Path, policy: &StochasticPolicy, level: usize) -> Result<()> {
    super::write_file(path, format_policy(policy, level).as_bytes())
}

pub fn read_policy(path: &Path) -> Result<(PolicyHeader, StochasticPolicy)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_policy(&text)
}

fn parse_header(line: &str, magic: &str) -> Result<PolicyHeader> {
    let rest = line.strip_prefix(magic).ok_or(Error::Parse {
        line: 1,
        message: format!("expected header `{magic} ...`"),
    })?;
    let mut states = None;
    let mut actions = None;
    let mut level = Some(0);
    for tok in rest.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or(Error::Parse {
            line: 1,
            message: format!("bad header token `{tok}`"),
        })?;
        let v: usize = v.parse().map_err(|_| Error::Parse {
            line: 1,
            message: format!("bad header value `{tok}`"),
        })?;
        match k {
            "states" => states = Some(v),
            "actions" => actions = Some(v),
            "level" => level = Some(v),
            _ => {}
        }
    }
    match (states, actions, level) {
        (Some(states), Some(actions), Some(level)) if states > 0 && actions > 0 => Ok(PolicyHeader {
            states,
            actions,
            level,
        }),
        _ => Err(Error::Parse {
            line: 1,
            message: "header needs positive states= and actions=".into(),
        }),
    }
}

fn parse_rows(
    text: &str,
    magic: &str,
    columns: impl Fn(&PolicyHeader) -> usize,
) -> Result<(PolicyHeader, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = parse_header(lines.next().unwrap_or(""), magic)?;
    let width = columns(&header);
    let mut rows = vec![Vec::new(); header.states];
    let mut seen = vec![false; header.states];
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let s: usize = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or(Error::Parse {
                line: lineno,
                message: "bad state index".into(),
            })?;
        if s >= header.states || seen[s] {
            return Err(Error::Parse {
                line: lineno,
                message: format!("state {s} out of range or repeated"),
            });
        }
        let values: Vec<f64> = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
        if values.len() != width {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {width} values, found {}", values.len()),
            });
        }
        seen[s] = true;
        rows[s] = values;
    }
    if let Some(missing) = seen.iter().position(|x| !x) {
        return Err(Error::Parse {
            line: 0,
            message: format!("state {missing} missing"),
        });
    }
    Ok((header, rows))
}

pub fn parse_policy(text: &str) -> Result<(PolicyHeader, StochasticPolicy)> {
    let (header, rows) = parse_rows(text, POLICY_MAGIC, |h| h.actions)?;
    let policy = StochasticPolicy::from_table(header.states, header.actions, rows.concat())?;
    Ok((header, policy))
}

pub fn write_learner_checkpoint(
    path: &Path,
    learner: &LearnerState,
    policy: &StochasticPolicy,
) -> Result<()> {
    if policy.num_states() != learner.num_states() || policy.num_actions() != learner.num_actions() {
        return Err(Error::Argument("policy and learner shapes differ".into()));
    }
    let na = learner.num_actions();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{LEARNER_MAGIC} states={} actions={na} level=0 steps={} avg_reward={}",
        learner.num_states(),
        learner.steps,
        sig12(learner.avg_reward)
    );
    for s in 0..learner.num_states() {
        let _ = write!(
            out,
            "{s},{},{},{}",
            sig12(learner.v[s]),
            learner.count_s[s],
            sig12(learner.beta_s[s])
        );
        for a in 0..na {
            let i = s * na + a;
            let _ = write!(
                out,
                ",{},{},{},{}",
                sig12(policy.prob(s, a)),
                sig12(learner.q[i]),
                learner.count_sa[i],
                sig12(learner.beta_sa[i])
            );
        }
        out.push('\n');
    }
    super::write_file(path, out.as_bytes())
}

pub fn read_learner_checkpoint(path: &Path) -> Result<(LearnerState, StochasticPolicy)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or("");
    let mut steps = 0u64;
    let mut avg = 0.0;
    for tok in first.split_whitespace() {
        if let Some(v) = tok.strip_prefix("steps=") {
            steps = v.parse().unwrap_or(0);
        } else if let Some(v) = tok.strip_prefix("avg_reward=") {
            avg = v.parse().unwrap_or(0.0);
        }
    }
    let (h, rows) = parse_rows(&text, LEARNER_MAGIC, |h| 3 + 4 * h.actions)?;
    let na = h.actions;
    let mut learner = LearnerState::new(h.states, na);
    let mut probs = Vec::with_capacity(h.states * na);
    for (s, row) in rows.iter().enumerate() {
        learner.v[s] = row[0];
        learner.count_s[s] = row[1] as u64;
        learner.beta_s[s] = row[2];
        for a in 0..na {
            let c = &row[3 + 4 * a..3 + 4 * (a + 1)];
            probs.push(c[0]);
            learner.q[s * na + a] = c[1];
            learner.count_sa[s * na + a] = c[2] as u64;
            learner.beta_sa[s * na + a] = c[3];
        }
    }
    learner.steps = steps;
    learner.avg_reward = avg;
    let policy = StochasticPolicy::from_table(h.states, na, probs)?;
    Ok((learner, policy))
}

const VISITS_MAGIC: &str = "#levelk-visits v1";

/// Sparse visit table: header `#levelk-visits v1 states=<S>`, then
/// `state,count` for every state with a nonzero count.
pub fn write_visits(path: &Path, visits: &[u64]) -> Result<()> {
    let mut out = format!("{VISITS_MAGIC} states={}\n", visits.len());
    for (s, c) in visits.iter().enumerate().filter(|(_, c)| **c > 0) {
        let _ = writeln!(out, "{s},{c}");
    }
    super::write_file(path, out.as_bytes())
}

pub fn read_visits(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let states = header
        .strip_prefix(VISITS_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("states="))
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("expected `{VISITS_MAGIC} states=<S>`"),
        })?;
    let mut visits = vec![0u64; states];
    for (k, line) in lines.enumerate() {
        let bad = |message: String| Error::Parse { line: k + 2, message };
        let (s, c) = line
            .split_once(',')
            .ok_or_else(|| bad("expected `state,count`".into()))?;
        let s: usize = s.trim().parse().map_err(|e| bad(format!("state: {e}")))?;
        let c: u64 = c.trim().parse().map_err(|e| bad(format!("count: {e}")))?;
        if s >= states {
            return Err(bad(format!("state {s} outside [0, {states})")));
        }
        visits[s] = c;
    }
    Ok(visits)
}
