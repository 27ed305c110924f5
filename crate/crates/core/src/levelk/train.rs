use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airspace::observation_radices;
use crate::error::{Error, Result};
use crate::rl::learner::q_update_with_step;
use crate::rl::nfq::{q_costs, RadixEncoder};
use crate::rl::policy::{argmax_set, entropy_unchecked};
use crate::rl::{
    apply_floor, nfq_train, Experience, FeatureEncoder, JaakkolaLearner, LearnerState,
    LearningConfig, MlpNetwork, NfqConfig, StochasticPolicy,
};
use crate::{mix_seed, seeded_rng, SimRng};

use super::domains::{EgoController, EpisodeContext, Instrumentation, LevelDraw, TrainingDomain};
use super::{Domain, LevelKConfig, PolicyRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Jaakkola,
    Q,
    Nfq,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Jaakkola => "jaakkola",
            Backend::Q => "q",
            Backend::Nfq => "nfq",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jaakkola" => Ok(Backend::Jaakkola),
            "q" => Ok(Backend::Q),
            "nfq" => Ok(Backend::Nfq),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Experience collection and refitting schedule of the NFQ backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NfqTraining {
    pub nfq: NfqConfig,
    /// Refit the network after this many episodes.
    pub refit_every: usize,
    /// Only the most recent experiences are kept.
    pub max_experiences: usize,
    /// Exploration rate of the ε-greedy behaviour policy.
    pub explore: f64,
    /// Every `random_every`-th episode acts uniformly at random.
    pub random_every: usize,
}

impl Default for NfqTraining {
    fn default() -> Self {
        Self {
            nfq: NfqConfig {
                iterations: 5,
                inner_epochs: 100,
                ..NfqConfig::default()
            },
            refit_every: 10,
            max_experiences: 4000,
            explore: 0.2,
            random_every: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TrainConfig {
    pub learning: LearningConfig,
    pub backend: Backend,
    pub levelk: LevelKConfig,
    pub nfq: NfqTraining,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.learning.validate()?;
        self.levelk.validate()?;
        if self.nfq.refit_every == 0 || self.nfq.max_experiences == 0 || self.nfq.random_every == 0 {
            return Err(Error::Config("NFQ schedule values must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.nfq.explore) {
            return Err(Error::Config("NFQ exploration rate outside [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTelemetry {
    /// Level being trained.
    pub level: usize,
    pub episode: usize,
    pub mean_reward: f64,
    pub total_reward: f64,
    /// Mean row entropy of the ego's current policy table.
    pub entropy: f64,
    pub decisions: usize,
    pub collided: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub level: usize,
    pub policy: StochasticPolicy,
    pub telemetry: Vec<EpisodeTelemetry>,
    /// Ego decisions per state over the second half of training.
    pub visits: Vec<u64>,
    pub instrumentation: Instrumentation,
    /// Operations of the equivalent eager learner (average-reward backend).
    pub equivalent_ops: u64,
}

/// Row greedy on `values` (ties shared) with the floor applied.
fn greedy_row(values: &[f64], floor: f64) -> Result<Vec<f64>> {
    let best = argmax_set(values);
    let mut row = vec![0.0; values.len()];
    for a in &best {
        row[*a] = 1.0 / best.len() as f64;
    }
    apply_floor(&mut row, floor)?;
    Ok(row)
}

/// Running sum of per-row entropies.
struct EntropyTracker {
    rows: Vec<f64>,
    sum: f64,
}

impl EntropyTracker {
    fn uniform(states: usize, actions: usize) -> Self {
        let h = (actions as f64).ln();
        Self {
            rows: vec![h; states],
            sum: h * states as f64,
        }
    }

    fn set(&mut self, s: usize, h: f64) {
        self.sum += h - self.rows[s];
        self.rows[s] = h;
    }

    fn mean(&self) -> f64 {
        self.sum / self.rows.len() as f64
    }
}

trait Trainer: EgoController {
    fn begin_episode(&mut self, _episode: usize) {}
    fn end_episode(&mut self, _episode: usize, _last: bool) -> Result<()> {
        Ok(())
    }
    fn mean_entropy(&self) -> f64;
    fn equivalent_ops(&self) -> u64 {
        0
    }
    fn into_policy(self: Box<Self>) -> Result<StochasticPolicy>;
}

struct JaakkolaTrainer {
    learner: JaakkolaLearner,
    policy: StochasticPolicy,
    entropy: EntropyTracker,
    epsilon: f64,
    floor: f64,
}

impl EgoController for JaakkolaTrainer {
    fn act(&mut self, state: usize, rng: &mut SimRng) -> usize {
        self.policy.sample(state, rng)
    }

    fn observe(&mut self, state: usize, action: usize, reward: f64, _next: usize, _terminal: bool) -> Result<()> {
        self.learner.update(state, action, reward)?;
        self.learner
            .improve_state(&mut self.policy, state, self.epsilon, self.floor)?;
        self.entropy.set(state, self.policy.row_entropy(state));
        Ok(())
    }
}

impl Trainer for JaakkolaTrainer {
    fn mean_entropy(&self) -> f64 {
        self.entropy.mean()
    }

    fn equivalent_ops(&self) -> u64 {
        self.learner.equivalent_ops()
    }

    fn into_policy(self: Box<Self>) -> Result<StochasticPolicy> {
        Ok(self.policy)
    }
}

/// Tabular Q-learning; behaves 90% greedy / 10% uniform and outputs the
/// floored greedy policy.
struct QTrainer {
    learner: LearnerState,
    entropy: EntropyTracker,
    alpha: f64,
    gamma: f64,
    floor: f64,
}

const Q_EXPLORE: f64 = 0.1;

impl EgoController for QTrainer {
    fn act(&mut self, state: usize, rng: &mut SimRng) -> usize {
        let a_count = self.learner.num_actions();
        if rng.random::<f64>() < Q_EXPLORE {
            return rng.random_range(0..a_count);
        }
        let best = argmax_set(self.learner.q_row(state));
        best[rng.random_range(0..best.len())]
    }

    fn observe(&mut self, state: usize, action: usize, reward: f64, next: usize, terminal: bool) -> Result<()> {
        let next = (!terminal).then_some(next);
        q_update_with_step(&mut self.learner, state, action, reward, next, self.alpha, self.gamma)?;
        let row = greedy_row(self.learner.q_row(state), self.floor)?;
        self.entropy.set(state, entropy_unchecked(&row));
        Ok(())
    }
}

impl Trainer for QTrainer {
    fn mean_entropy(&self) -> f64 {
        self.entropy.mean()
    }

    fn into_policy(self: Box<Self>) -> Result<StochasticPolicy> {
        let (s_count, a_count) = (self.learner.num_states(), self.learner.num_actions());
        let mut probs = Vec::with_capacity(s_count * a_count);
        for s in 0..s_count {
            probs.extend(greedy_row(self.learner.q_row(s), self.floor)?);
        }
        StochasticPolicy::from_table(s_count, a_count, probs)
    }
}

struct NfqTrainer {
    schedule: NfqTraining,
    encoder: RadixEncoder,
    num_actions: usize,
    net: MlpNetwork,
    fitted: bool,
    experiences: Vec<Experience>,
    random_episode: bool,
    floor: f64,
    entropy: f64,
}

impl NfqTrainer {
    fn refit(&mut self) -> Result<()> {
        if self.experiences.is_empty() {
            return Ok(());
        }
        let excess = self.experiences.len().saturating_sub(self.schedule.max_experiences);
        self.experiences.drain(..excess);
        let out = nfq_train(
            &self.experiences,
            self.net.clone(),
            &self.encoder,
            self.num_actions,
            &self.schedule.nfq,
        )?;
        self.net = out.net;
        self.fitted = true;
        let mut states: Vec<usize> = self.experiences.iter().map(|e| e.state).collect();
        states.sort_unstable();
        states.dedup();
        let mut h = 0.0;
        for s in &states {
            let neg: Vec<f64> = self.costs(*s).iter().map(|c| -c).collect();
            h += entropy_unchecked(&greedy_row(&neg, self.floor)?);
        }
        self.entropy = h / states.len() as f64;
        Ok(())
    }

    fn costs(&self, s: usize) -> Vec<f64> {
        q_costs(&self.net, &self.encoder, self.num_actions, s)
    }
}

impl EgoController for NfqTrainer {
    fn act(&mut self, state: usize, rng: &mut SimRng) -> usize {
        if !self.fitted || self.random_episode || rng.random::<f64>() < self.schedule.explore {
            return rng.random_range(0..self.num_actions);
        }
        let neg: Vec<f64> = self.costs(state).iter().map(|c| -c).collect();
        let best = argmax_set(&neg);
        best[rng.random_range(0..best.len())]
    }

    fn observe(&mut self, state: usize, action: usize, reward: f64, next: usize, terminal: bool) -> Result<()> {
        let mut e = Experience::from_reward(state, action, reward, next);
        e.terminal = terminal;
        self.experiences.push(e);
        Ok(())
    }
}

impl Trainer for NfqTrainer {
    fn begin_episode(&mut self, episode: usize) {
        self.random_episode = episode % self.schedule.random_every == self.schedule.random_every - 1;
    }

    fn end_episode(&mut self, episode: usize, last: bool) -> Result<()> {
        if last || (episode + 1).is_multiple_of(self.schedule.refit_every) {
            self.refit()?;
        }
        Ok(())
    }

    fn mean_entropy(&self) -> f64 {
        self.entropy
    }

    fn into_policy(self: Box<Self>) -> Result<StochasticPolicy> {
        let s_count = self.encoder.num_states();
        let a_count = self.num_actions;
        let rows: Vec<Result<Vec<f64>>> = (0..s_count)
            .into_par_iter()
            .map(|s| {
                let neg: Vec<f64> = self.costs(s).iter().map(|c| -c).collect();
                greedy_row(&neg, self.floor)
            })
            .collect();
        let mut probs = Vec::with_capacity(s_count * a_count);
        for r in rows {
            probs.extend(r?);
        }
        StochasticPolicy::from_table(s_count, a_count, probs)
    }
}

fn encoder_for(domain: Domain) -> RadixEncoder {
    match domain {
        Domain::Airspace => RadixEncoder::new(observation_radices()),
        // each slot contributes motion then distance, base 3
        Domain::Traffic => RadixEncoder::new(vec![3; 10]),
    }
}

fn make_trainer(domain: Domain, cfg: &TrainConfig, seed: u64) -> Result<Box<dyn Trainer>> {
    let (s_count, a_count) = (domain.num_states(), domain.num_actions());
    let l = &cfg.learning;
    Ok(match cfg.backend {
        Backend::Jaakkola => Box::new(JaakkolaTrainer {
            learner: JaakkolaLearner::new(s_count, a_count, l.gamma_schedule),
            policy: StochasticPolicy::uniform(s_count, a_count),
            entropy: EntropyTracker::uniform(s_count, a_count),
            epsilon: l.epsilon,
            floor: l.exploration_floor,
        }),
        Backend::Q => Box::new(QTrainer {
            learner: LearnerState::new(s_count, a_count),
            entropy: EntropyTracker::uniform(s_count, a_count),
            alpha: l.alpha,
            gamma: l.gamma,
            floor: l.exploration_floor,
        }),
        Backend::Nfq => {
            let encoder = encoder_for(domain);
            let sizes = cfg.nfq.nfq.layer_sizes(encoder.dim() + a_count);
            let net = MlpNetwork::new(&sizes, &mut seeded_rng(mix_seed(seed, 0x004E_4651)))?;
            Box::new(NfqTrainer {
                schedule: cfg.nfq.clone(),
                encoder,
                num_actions: a_count,
                net,
                fitted: false,
                experiences: Vec::new(),
                random_episode: false,
                floor: l.exploration_floor,
                entropy: (a_count as f64).ln(),
            })
        }
    })
}

/// Wraps a trainer and counts the states in which it acts.
struct Counting<'a> {
    inner: &'a mut dyn Trainer,
    visits: &'a mut [u64],
    counting: bool,
}

impl EgoController for Counting<'_> {
    fn act(&mut self, state: usize, rng: &mut SimRng) -> usize {
        if self.counting {
            self.visits[state] += 1;
        }
        self.inner.act(state, rng)
    }

    fn observe(&mut self, state: usize, action: usize, reward: f64, next: usize, terminal: bool) -> Result<()> {
        self.inner.observe(state, action, reward, next, terminal)
    }
}

/// Seed of training episode `episode` at level `level`.
pub fn episode_seed(base: u64, level: usize, episode: usize) -> u64 {
    mix_seed(base, ((level as u64) << 32) | episode as u64)
}

/// Train a best response to the level-`level` population and register it
/// as level `level + 1`.
pub fn train_level(
    registry: &mut PolicyRegistry,
    env: &dyn TrainingDomain,
    level: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let domain = env.domain();
    let draw = match &cfg.levelk.population_level_mix {
        Some(mix) if !mix.is_empty() => LevelDraw::Mix(mix.clone()),
        _ if cfg.levelk.respond_to_all_lower => LevelDraw::UpTo(level),
        _ => LevelDraw::Fixed(level),
    };
    registry.get(domain, level)?;
    let policies: Vec<Arc<StochasticPolicy>> = (0..=draw.max_level())
        .map(|l| registry.get(domain, l))
        .collect::<Result<_>>()?;

    let mut trainer = make_trainer(domain, cfg, episode_seed(cfg.learning.seed, level, usize::MAX))?;
    let mut instrumentation = Instrumentation::default();
    let mut visits = vec![0u64; domain.num_states()];
    let episodes = cfg.learning.episodes;
    let count_from = episodes / 2;
    let mut telemetry = Vec::with_capacity(episodes);
    for e in 0..episodes {
        trainer.begin_episode(e);
        let mut ctx = EpisodeContext {
            policies: &policies,
            draw: &draw,
            instrumentation: &mut instrumentation,
        };
        let mut ego = Counting {
            inner: trainer.as_mut(),
            visits: &mut visits,
            counting: e >= count_from,
        };
        let summary = env.run_episode(episode_seed(cfg.learning.seed, level, e), &mut ctx, &mut ego)?;
        trainer.end_episode(e, e + 1 == episodes)?;
        telemetry.push(EpisodeTelemetry {
            level: level + 1,
            episode: e,
            mean_reward: summary.mean_reward(),
            total_reward: summary.total_reward,
            entropy: trainer.mean_entropy(),
            decisions: summary.decisions,
            collided: summary.ego_collided,
        });
    }
    let equivalent_ops = trainer.equivalent_ops();
    let policy = trainer.into_policy()?;
    registry.insert(domain, level + 1, policy.clone())?;
    Ok(TrainOutcome {
        level: level + 1,
        policy,
        telemetry,
        visits,
        instrumentation,
        equivalent_ops,
    })
}

/// Train levels `1..=max_level` in sequence.
pub fn train_levels(
    registry: &mut PolicyRegistry,
    env: &dyn TrainingDomain,
    max_level: usize,
    cfg: &TrainConfig,
) -> Result<Vec<TrainOutcome>> {
    (0..max_level)
        .map(|i| train_level(registry, env, i, cfg))
        .collect()
}
