use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::airspace::{PilotObservation, NUM_OBSERVATIONS as AIR_STATES};
use crate::error::{Error, Result};
use crate::io::{read_policy, write_policy};
use crate::rl::StochasticPolicy;
use crate::traffic::{anchor_action, DriverObservation, NUM_OBSERVATIONS as TRAFFIC_STATES};

use super::Domain;

/// Level-0 policy: pilots take the best trajectory action; drivers keep
/// their lane and brake for a close leader.
pub fn anchor_policy(domain: Domain) -> StochasticPolicy {
    let actions: Vec<usize> = match domain {
        Domain::Airspace => (0..AIR_STATES)
            .map(|s| PilotObservation::decode(s).expect("index in range").bta as usize)
            .collect(),
        Domain::Traffic => (0..TRAFFIC_STATES)
            .map(|s| anchor_action(&DriverObservation::decode(s).expect("index in range")).index())
            .collect(),
    };
    StochasticPolicy::deterministic(domain.num_actions(), &actions).expect("valid anchor table")
}

/// Split `total` items in proportion to `weights` by largest remainder;
/// ties on the remainder go to the earlier entry.
pub fn largest_remainder(weights: &[f64], total: usize) -> Result<Vec<usize>> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || !(sum > 0.0) {
        return Err(Error::Config("population mix has no positive weight".into()));
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(total - assigned) {
        counts[k] += 1;
    }
    Ok(counts)
}

/// Trained policies per domain and level. Level 0 of every domain is the
/// anchor and is always present.
#[derive(Debug, Clone, Default)]
pub struct PolicyRegistry {
    entries: BTreeMap<(Domain, usize), Arc<StochasticPolicy>>,
}

impl PolicyRegistry {
    /// Registry holding only the anchor of `domain`.
    pub fn with_anchor(domain: Domain) -> Self {
        let mut r = Self::default();
        r.entries.insert((domain, 0), Arc::new(anchor_policy(domain)));
        r
    }

    fn ensure_anchor(&mut self, domain: Domain) {
        self.entries
            .entry((domain, 0))
            .or_insert_with(|| Arc::new(anchor_policy(domain)));
    }

    pub fn get(&self, domain: Domain, level: usize) -> Result<Arc<StochasticPolicy>> {
        if level == 0 && !self.entries.contains_key(&(domain, 0)) {
            return Ok(Arc::new(anchor_policy(domain)));
        }
        self.entries
            .get(&(domain, level))
            .cloned()
            .ok_or_else(|| Error::Registry(format!("no level-{level} {domain} policy")))
    }

    pub fn contains(&self, domain: Domain, level: usize) -> bool {
        level == 0 || self.entries.contains_key(&(domain, level))
    }

    /// Registered levels of `domain`, ascending, always starting at 0.
    pub fn levels(&self, domain: Domain) -> Vec<usize> {
        let mut out = vec![0];
        out.extend(
            self.entries
                .keys()
                .filter(|(d, l)| *d == domain && *l > 0)
                .map(|(_, l)| *l),
        );
        out
    }

    pub fn max_level(&self, domain: Domain) -> usize {
        *self.levels(domain).last().expect("level 0 present")
    }

    /// Register `policy` as `level`; level `level − 1` must exist.
    pub fn insert(&mut self, domain: Domain, level: usize, policy: StochasticPolicy) -> Result<()> {
        if policy.num_states() != domain.num_states() || policy.num_actions() != domain.num_actions() {
            return Err(Error::Registry(format!(
                "{domain} policy must be {}x{}, got {}x{}",
                domain.num_states(),
                domain.num_actions(),
                policy.num_states(),
                policy.num_actions()
            )));
        }
        if level > 0 && !self.contains(domain, level - 1) {
            return Err(Error::Registry(format!(
                "cannot add level {level} without level {}",
                level - 1
            )));
        }
        self.ensure_anchor(domain);
        self.entries.insert((domain, level), Arc::new(policy));
        Ok(())
    }

    pub fn policy_path(root: &Path, domain: Domain, level: usize) -> PathBuf {
        root.join(domain.name()).join(format!("level{level}.policy"))
    }

    /// Training visit counts stored next to the policy file.
    pub fn visits_path(root: &Path, domain: Domain, level: usize) -> PathBuf {
        root.join(domain.name()).join(format!("level{level}.visits"))
    }

    /// Write every registered level above the anchor.
    pub fn save(&self, root: &Path) -> Result<()> {
        for ((domain, level), p) in &self.entries {
            if *level > 0 {
                write_policy(&Self::policy_path(root, *domain, *level), p, *level)?;
            }
        }
        Ok(())
    }

    /// Load consecutive levels `1..` of `domain` until the first missing
    /// file. A missing domain directory is a registry error.
    pub fn load(root: &Path, domain: Domain) -> Result<Self> {
        let dir = root.join(domain.name());
        if !dir.is_dir() {
            return Err(Error::Registry(format!(
                "policy directory {} not found",
                dir.display()
            )));
        }
        let mut r = Self::with_anchor(domain);
        let mut level = 1;
        loop {
            let path = Self::policy_path(root, domain, level);
            if !path.exists() {
                break;
            }
            let (header, policy) = read_policy(&path)?;
            if header.level != level {
                return Err(Error::Registry(format!(
                    "{} declares level {}",
                    path.display(),
                    header.level
                )));
            }
            r.insert(domain, level, policy)?;
            level += 1;
        }
        Ok(r)
    }
}
