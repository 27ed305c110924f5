//! Level-k training: freeze a level-`i` population, train one ego agent to
//! best-respond, register the result as level `i + 1`.

mod domains;
mod registry;
mod train;

pub use domains::{
    AirspaceTraining, EgoController, EpisodeContext, EpisodeSummary, Instrumentation, LevelDraw,
    TrafficTraining, TrainingDomain,
};
pub use registry::{anchor_policy, largest_remainder, PolicyRegistry};
pub use train::{
    episode_seed, train_level, train_levels, Backend, EpisodeTelemetry, NfqTraining, TrainConfig, TrainOutcome,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Airspace,
    Traffic,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Airspace => "airspace",
            Domain::Traffic => "traffic",
        }
    }

    pub fn num_states(self) -> usize {
        match self {
            Domain::Airspace => crate::airspace::NUM_OBSERVATIONS,
            Domain::Traffic => crate::traffic::NUM_OBSERVATIONS,
        }
    }

    pub fn num_actions(self) -> usize {
        match self {
            Domain::Airspace => crate::airspace::NUM_ACTIONS,
            Domain::Traffic => crate::traffic::NUM_ACTIONS,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "airspace" => Ok(Domain::Airspace),
            "traffic" => Ok(Domain::Traffic),
            other => Err(Error::Config(format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelKConfig {
    pub max_level: usize,
    /// Draw the level of each non-ego agent from `0..=i` instead of
    /// fixing it at `i`.
    pub respond_to_all_lower: bool,
    /// Optional `(level, fraction)` mix for the non-ego population.
    pub population_level_mix: Option<Vec<(usize, f64)>>,
}

impl Default for LevelKConfig {
    fn default() -> Self {
        Self {
            max_level: 3,
            respond_to_all_lower: false,
            population_level_mix: None,
        }
    }
}

impl LevelKConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_level == 0 {
            return Err(Error::Config("max_level must be at least 1".into()));
        }
        if let Some(mix) = &self.population_level_mix {
            if mix.iter().any(|(_, f)| !(*f >= 0.0 && f.is_finite())) {
                return Err(Error::Config("population fractions must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Per-agent level assignment with one optional ego.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// `None` for the ego.
    pub levels: Vec<Option<usize>>,
    pub ego: Option<usize>,
}

/// Assign levels to `num_agents` agents. A mix is split by largest
/// remainder over the non-ego agents in index order; an empty mix spreads
/// agents evenly over every level registered for the domain.
pub fn assign_population(
    num_agents: usize,
    ego: Option<usize>,
    registry: &PolicyRegistry,
    domain: Domain,
    mix: &[(usize, f64)],
) -> Result<Population> {
    if let Some(e) = ego {
        crate::error::check_index("ego agent", e, num_agents)?;
    }
    let mix: Vec<(usize, f64)> = if mix.is_empty() {
        registry.levels(domain).into_iter().map(|l| (l, 1.0)).collect()
    } else {
        mix.to_vec()
    };
    for (level, _) in &mix {
        registry.get(domain, *level)?;
    }
    let others = num_agents - usize::from(ego.is_some());
    let weights: Vec<f64> = mix.iter().map(|(_, f)| *f).collect();
    let counts = largest_remainder(&weights, others)?;
    let mut order = Vec::with_capacity(others);
    for ((level, _), c) in mix.iter().zip(counts) {
        order.extend(std::iter::repeat_n(*level, c));
    }
    let mut it = order.into_iter();
    let levels = (0..num_agents)
        .map(|i| {
            if Some(i) == ego {
                None
            } else {
                it.next()
            }
        })
        .collect();
    Ok(Population { levels, ego })
}
