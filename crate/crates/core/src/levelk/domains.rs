use std::sync::Arc;

use rand::Rng;

use crate::airspace::{pilot_reward, AirspaceScenario, PilotAction};
use crate::error::{Error, Result};
use crate::rl::StochasticPolicy;
use crate::traffic::{driver_reward, TrafficAction, TrafficConfig, TrafficWorld};
use crate::{mix_seed, seeded_rng, SimRng};

use super::{largest_remainder, Domain};

const WORLD_STREAM: u64 = 0x5EED_0001;
const EGO_PICK: u64 = 0x5EED_0002;
const EGO_STREAM: u64 = 0x5EED_0003;
const LEVEL_STREAM: u64 = 0x5EED_0004;

/// The learning agent as seen by a domain.
pub trait EgoController {
    fn act(&mut self, state: usize, rng: &mut SimRng) -> usize;

    /// Outcome of taking `action` in `state`. `terminal` marks a collision
    /// or arrival that ends the episode for the ego.
    fn observe(&mut self, state: usize, action: usize, reward: f64, next: usize, terminal: bool) -> Result<()>;
}

/// Counts of non-ego policy samples per level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Instrumentation {
    pub samples_by_level: Vec<u64>,
}

impl Instrumentation {
    fn record(&mut self, level: usize) {
        if self.samples_by_level.len() <= level {
            self.samples_by_level.resize(level + 1, 0);
        }
        self.samples_by_level[level] += 1;
    }

    pub fn total(&self) -> u64 {
        self.samples_by_level.iter().sum()
    }
}

/// How non-ego agents get their level each episode.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelDraw {
    Fixed(usize),
    /// Uniform over `0..=i`, independently per agent and episode.
    UpTo(usize),
    /// Largest-remainder split in agent order.
    Mix(Vec<(usize, f64)>),
}

impl LevelDraw {
    fn assign(&self, n: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
        Ok(match self {
            LevelDraw::Fixed(l) => vec![*l; n],
            LevelDraw::UpTo(l) => (0..n).map(|_| rng.random_range(0..=*l)).collect(),
            LevelDraw::Mix(mix) => {
                let w: Vec<f64> = mix.iter().map(|(_, f)| *f).collect();
                let counts = largest_remainder(&w, n)?;
                mix.iter()
                    .zip(counts)
                    .flat_map(|((l, _), c)| std::iter::repeat_n(*l, c))
                    .collect()
            }
        })
    }

    pub fn max_level(&self) -> usize {
        match self {
            LevelDraw::Fixed(l) | LevelDraw::UpTo(l) => *l,
            LevelDraw::Mix(m) => m.iter().map(|(l, _)| *l).max().unwrap_or(0),
        }
    }
}

pub struct EpisodeContext<'a> {
    /// Frozen policies indexed by level.
    pub policies: &'a [Arc<StochasticPolicy>],
    pub draw: &'a LevelDraw,
    pub instrumentation: &'a mut Instrumentation,
}

impl EpisodeContext<'_> {
    fn levels(&self, n: usize, seed: u64) -> Result<Vec<usize>> {
        let levels = self.draw.assign(n, &mut seeded_rng(mix_seed(seed, LEVEL_STREAM)))?;
        if let Some(l) = levels.iter().find(|l| **l >= self.policies.len()) {
            return Err(Error::Registry(format!("no level-{l} policy available")));
        }
        Ok(levels)
    }

    fn sample(&mut self, level: usize, state: usize, rng: &mut SimRng) -> usize {
        self.instrumentation.record(level);
        self.policies[level].sample(state, rng)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpisodeSummary {
    pub total_reward: f64,
    /// Ego decisions that produced a learning update.
    pub decisions: usize,
    pub ego_collided: bool,
}

impl EpisodeSummary {
    pub fn mean_reward(&self) -> f64 {
        if self.decisions > 0 {
            self.total_reward / self.decisions as f64
        } else {
            0.0
        }
    }
}

/// A simulated environment in which one ego agent learns against a frozen
/// population.
pub trait TrainingDomain: Sync {
    fn domain(&self) -> Domain;

    fn run_episode(
        &self,
        seed: u64,
        ctx: &mut EpisodeContext<'_>,
        ego: &mut dyn EgoController,
    ) -> Result<EpisodeSummary>;
}

fn agent_rngs(seed: u64, n: usize) -> Vec<SimRng> {
    (0..n).map(|i| seeded_rng(mix_seed(seed, i as u64 + 1))).collect()
}

/// Highway training on a freshly generated ring road per episode; the ego
/// vehicle is picked by the episode seed.
#[derive(Debug, Clone, Default)]
pub struct TrafficTraining {
    pub config: TrafficConfig,
}

impl TrainingDomain for TrafficTraining {
    fn domain(&self) -> Domain {
        Domain::Traffic
    }

    fn run_episode(
        &self,
        seed: u64,
        ctx: &mut EpisodeContext<'_>,
        ego: &mut dyn EgoController,
    ) -> Result<EpisodeSummary> {
        let mut world_rng = seeded_rng(mix_seed(seed, WORLD_STREAM));
        let mut world = TrafficWorld::generate(self.config.clone(), &mut world_rng)?;
        let n = world.vehicles.len();
        let ego_idx = (mix_seed(seed, EGO_PICK) % n as u64) as usize;
        let levels = ctx.levels(n, seed)?;
        let mut rngs = agent_rngs(seed, n);
        let mut ego_rng = seeded_rng(mix_seed(seed, EGO_STREAM));
        let weights = world.config.weights;
        let decisions = world.config.decisions_per_episode();
        let mut summary = EpisodeSummary::default();

        for _ in 0..decisions {
            let states: Vec<Option<usize>> = (0..n)
                .map(|i| (!world.is_locked(i)).then(|| world.observe(i).index()))
                .collect();
            let mut choice = None;
            for (i, s) in states.iter().enumerate() {
                let Some(s) = *s else { continue };
                let a = if i == ego_idx {
                    let a = ego.act(s, &mut ego_rng);
                    choice = Some((s, a));
                    a
                } else {
                    ctx.sample(levels[i], s, &mut rngs[i])
                };
                world.apply_action(i, TrafficAction::from_index(a)?, &mut rngs[i])?;
            }
            world.advance_interval(None);
            let collided = world.vehicles[ego_idx].collided;
            if let Some((s, a)) = choice {
                let r = driver_reward(&world, ego_idx, TrafficAction::from_index(a)?, &weights)?;
                summary.total_reward += r;
                summary.decisions += 1;
                let next = world.observe(ego_idx).index();
                ego.observe(s, a, r, next, collided)?;
            }
            if collided {
                summary.ego_collided = true;
                break;
            }
        }
        Ok(summary)
    }
}

/// Airspace training: one manned aircraft of the scenario is the ego; the
/// others fly frozen pilot policies and unmanned aircraft run their SAA
/// autopilot.
#[derive(Debug, Clone, Default)]
pub struct AirspaceTraining {
    pub scenario: AirspaceScenario,
}

impl TrainingDomain for AirspaceTraining {
    fn domain(&self) -> Domain {
        Domain::Airspace
    }

    fn run_episode(
        &self,
        seed: u64,
        ctx: &mut EpisodeContext<'_>,
        ego: &mut dyn EgoController,
    ) -> Result<EpisodeSummary> {
        let (mut world, roles) = self.scenario.build(seed)?;
        let manned: Vec<usize> = (0..roles.len()).filter(|&i| roles[i].is_some()).collect();
        if manned.is_empty() {
            return Err(Error::Config("airspace training needs a manned aircraft".into()));
        }
        let ego_idx = manned[(mix_seed(seed, EGO_PICK) % manned.len() as u64) as usize];
        let drawn = ctx.levels(manned.len(), seed)?;
        let mut levels = vec![0; world.len()];
        for (k, &i) in manned.iter().enumerate() {
            levels[i] = drawn[k];
        }
        let mut rngs = agent_rngs(seed, world.len());
        let mut ego_rng = seeded_rng(mix_seed(seed, EGO_STREAM));
        let weights = world.config.weights;
        let mut summary = EpisodeSummary::default();

        while !world.finished() && world.aircraft[ego_idx].active {
            let before = world.clone();
            let mut choice = (0, 0);
            for &i in &manned {
                if !world.aircraft[i].active {
                    continue;
                }
                let s = before.observe(i).index()?;
                let a = if i == ego_idx {
                    let a = ego.act(s, &mut ego_rng);
                    choice = (s, a);
                    a
                } else {
                    ctx.sample(levels[i], s, &mut rngs[i])
                };
                world.apply_pilot_action(i, PilotAction::from_index(a)?)?;
            }
            world.advance_interval(None);
            let (s, a) = choice;
            let action = PilotAction::from_index(a)?;
            let r = pilot_reward(&before, &world, ego_idx, action, &weights)?;
            let collided = world.in_collision(ego_idx);
            let arrived = !world.aircraft[ego_idx].active;
            let next = if arrived { s } else { world.observe(ego_idx).index()? };
            summary.total_reward += r;
            summary.decisions += 1;
            ego.observe(s, a, r, next, collided || arrived)?;
            if collided {
                summary.ego_collided = true;
                break;
            }
        }
        Ok(summary)
    }
}
