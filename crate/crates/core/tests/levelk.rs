use levelk_core::airspace::{PilotAction, PilotObservation};
use levelk_core::levelk::*;
use levelk_core::rl::StochasticPolicy;
use levelk_core::traffic::{
    DistanceClass, DriverObservation, MotionClass, Slot, SlotReading, TrafficAction, TrafficConfig,
};
use levelk_core::{Error, SimRng};
use rand::Rng;

fn traffic_env() -> TrafficTraining {
    TrafficTraining {
        config: TrafficConfig {
            lanes: 3,
            num_vehicles: 15,
            ..Default::default()
        },
    }
}

fn config(episodes: usize, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.learning.episodes = episodes;
    cfg.learning.seed = seed;
    cfg
}

#[test]
fn level_one_run_registers_exactly_anchor_and_level_one() {
    let mut reg = PolicyRegistry::with_anchor(Domain::Traffic);
    let out = train_levels(&mut reg, &traffic_env(), 1, &config(20, 1)).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].level, 1);
    assert_eq!(reg.levels(Domain::Traffic), vec![0, 1]);
    assert_eq!(*reg.get(Domain::Traffic, 1).unwrap(), out[0].policy);
    assert!(!reg.contains(Domain::Airspace, 1));
}

#[test]
fn level_two_training_samples_only_level_one() {
    let env = traffic_env();
    let mut reg = PolicyRegistry::with_anchor(Domain::Traffic);
    let cfg = config(20, 2);
    train_level(&mut reg, &env, 0, &cfg).unwrap();
    let out = train_level(&mut reg, &env, 1, &cfg).unwrap();
    assert_eq!(out.level, 2);
    let counts = &out.instrumentation.samples_by_level;
    assert!(out.instrumentation.total() > 0);
    assert_eq!(counts.first().copied().unwrap_or(0), 0);
    assert_eq!(counts[1], out.instrumentation.total());
}

#[test]
fn respond_to_all_lower_draws_every_lower_level() {
    let env = traffic_env();
    let mut reg = PolicyRegistry::with_anchor(Domain::Traffic);
    let mut cfg = config(20, 3);
    cfg.levelk.respond_to_all_lower = true;
    train_level(&mut reg, &env, 0, &cfg).unwrap();
    let out = train_level(&mut reg, &env, 1, &cfg).unwrap();
    let counts = &out.instrumentation.samples_by_level;
    assert_eq!(counts.len(), 2, "{counts:?}");
    assert!(counts[0] > 0 && counts[1] > 0, "{counts:?}");
}

struct UniformEgo;

impl EgoController for UniformEgo {
    fn act(&mut self, _state: usize, rng: &mut SimRng) -> usize {
        rng.random_range(0..Domain::Traffic.num_actions())
    }

    fn observe(&mut self, _: usize, _: usize, _: f64, _: usize, _: bool) -> levelk_core::Result<()> {
        Ok(())
    }
}

#[test]
fn level_one_ego_beats_frozen_uniform_agent() {
    let env = traffic_env();
    let mut reg = PolicyRegistry::with_anchor(Domain::Traffic);
    let cfg = config(300, 4);
    let out = train_level(&mut reg, &env, 0, &cfg).unwrap();
    let tail = &out.telemetry[270..];
    let learned = tail.iter().map(|t| t.mean_reward).sum::<f64>() / tail.len() as f64;

    let policies = vec![reg.get(Domain::Traffic, 0).unwrap()];
    let draw = LevelDraw::Fixed(0);
    let mut inst = Instrumentation::default();
    let mut control = 0.0;
    for t in tail {
        let mut ctx = EpisodeContext {
            policies: &policies,
            draw: &draw,
            instrumentation: &mut inst,
        };
        let seed = episode_seed(cfg.learning.seed, 0, t.episode);
        control += env.run_episode(seed, &mut ctx, &mut UniformEgo).unwrap().mean_reward();
    }
    control /= tail.len() as f64;
    assert!(learned > control, "learned {learned}, uniform {control}");
}

#[test]
fn training_is_deterministic_in_the_seed() {
    let env = traffic_env();
    let run = |seed| {
        let mut reg = PolicyRegistry::with_anchor(Domain::Traffic);
        train_level(&mut reg, &env, 0, &config(15, seed)).unwrap()
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.visits, b.visits);
    assert_ne!(a.policy, c.policy);
}

#[test]
fn next_level_changes_a_frequently_visited_state() {
    let env = traffic_env();
    let mut reg = PolicyRegistry::with_anchor(Domain::Traffic);
    let out = train_level(&mut reg, &env, 0, &config(1000, 6)).unwrap();
    let anchor = reg.get(Domain::Traffic, 0).unwrap();
    let hot: Vec<usize> = (0..Domain::Traffic.num_states())
        .filter(|&s| out.visits[s] >= 100)
        .collect();
    let hot_len = hot.len();
    let changed = hot
        .into_iter()
        .any(|s| out.policy.greedy_action(s) != anchor.greedy_action(s));
    assert!(hot_len > 0 && changed, "{hot_len} states visited 100 times");
}

#[test]
fn anchor_examples() {
    let air = anchor_policy(Domain::Airspace);
    for bta in PilotAction::ALL {
        for regions in [[0u8; 6], [2, 1, 0, 3, 0, 4]] {
            let obs = PilotObservation {
                regions,
                bta: bta.index() as u8,
                bda: 0,
                pa: 2,
            };
            let s = obs.index().unwrap();
            assert_eq!(air.prob(s, bta.index()), 1.0);
        }
    }

    let traffic = anchor_policy(Domain::Traffic);
    let mut obs = DriverObservation::EMPTY_ROAD;
    obs.slots[Slot::Front as usize] = SlotReading {
        distance: DistanceClass::Close,
        motion: MotionClass::Approaching,
    };
    assert_eq!(obs.slot(Slot::Front).motion, MotionClass::Approaching);
    assert_eq!(traffic.greedy_action(obs.index()), TrafficAction::HardDecelerate.index());
    assert_eq!(
        traffic.greedy_action(DriverObservation::EMPTY_ROAD.index()),
        TrafficAction::Maintain.index()
    );
}

#[test]
fn population_assignment() {
    let mut reg = PolicyRegistry::with_anchor(Domain::Traffic);
    let all_zero = assign_population(8, Some(3), &reg, Domain::Traffic, &[(0, 1.0)]).unwrap();
    assert_eq!(all_zero.levels[3], None);
    assert!(all_zero.levels.iter().enumerate().all(|(i, l)| i == 3 || *l == Some(0)));

    let n = Domain::Traffic.num_states();
    reg.insert(Domain::Traffic, 1, StochasticPolicy::uniform(n, 7)).unwrap();
    reg.insert(Domain::Traffic, 2, StochasticPolicy::uniform(n, 7)).unwrap();
    let mixed = assign_population(10, None, &reg, Domain::Traffic, &[(1, 0.3), (2, 0.7)]).unwrap();
    let count = |l| mixed.levels.iter().filter(|x| **x == Some(l)).count();
    assert_eq!((count(1), count(2)), (3, 7));

    let even = assign_population(10, Some(0), &reg, Domain::Traffic, &[]).unwrap();
    assert_eq!(even.levels.iter().filter(|l| l.is_some()).count(), 9);
    let counts: Vec<usize> = (0..3)
        .map(|l| even.levels.iter().filter(|x| **x == Some(l)).count())
        .collect();
    assert_eq!(counts, vec![3, 3, 3]);
}

#[test]
fn missing_levels_are_registry_errors() {
    let mut reg = PolicyRegistry::with_anchor(Domain::Traffic);
    assert!(matches!(reg.get(Domain::Traffic, 2), Err(Error::Registry(_))));
    assert!(matches!(
        assign_population(4, None, &reg, Domain::Traffic, &[(1, 1.0)]),
        Err(Error::Registry(_))
    ));
    let p = StochasticPolicy::uniform(Domain::Traffic.num_states(), 7);
    assert!(matches!(reg.insert(Domain::Traffic, 2, p), Err(Error::Registry(_))));
    assert!(matches!(
        train_level(&mut reg, &traffic_env(), 1, &config(1, 0)),
        Err(Error::Registry(_))
    ));
}

#[test]
fn registry_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut reg = PolicyRegistry::with_anchor(Domain::Traffic);
    let n = Domain::Traffic.num_states();
    let mut probs = Vec::with_capacity(n * 7);
    for s in 0..n {
        let raw: Vec<f64> = (0..7).map(|a| 1.0 + ((s * 7 + a) % 13) as f64 / 3.0).collect();
        let sum: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|x| x / sum));
    }
    let policy = StochasticPolicy::from_table(n, 7, probs).unwrap();
    reg.insert(Domain::Traffic, 1, policy.clone()).unwrap();
    reg.save(dir.path()).unwrap();
    let back = PolicyRegistry::load(dir.path(), Domain::Traffic).unwrap();
    assert_eq!(back.levels(Domain::Traffic), vec![0, 1]);
    let loaded = back.get(Domain::Traffic, 1).unwrap();
    for s in 0..n {
        for a in 0..7 {
            let (x, y) = (policy.prob(s, a), loaded.prob(s, a));
            assert_eq!(format!("{x:.11e}"), format!("{y:.11e}"), "({s},{a})");
        }
    }
    assert!(matches!(
        PolicyRegistry::load(dir.path(), Domain::Airspace),
        Err(Error::Registry(_))
    ));
}
