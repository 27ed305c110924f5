use levelk_core::rl::{
    apply_floor, jaakkola_improve, jaakkola_update, nfq_train, op_count_sweep, q_update, Experience,
    GammaSchedule, JaakkolaLearner, LearnerState, LearningConfig, MlpNetwork, NfqConfig, StochasticPolicy,
};
use levelk_core::rl::nfq::{greedy_cost_action, OneHotEncoder};
use levelk_core::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

// Deterministic 3-state, 2-action MDP: NEXT[s][a], REWARD[s][a].
const NEXT: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];
const REWARD: [[f64; 2]; 3] = [[1.0, 0.0], [0.0, 2.0], [0.5, -1.0]];

fn value_iteration(gamma: f64) -> [[f64; 2]; 3] {
    let mut q = [[0.0f64; 2]; 3];
    for _ in 0..10_000 {
        let mut next = q;
        for s in 0..3 {
            for a in 0..2 {
                let sn = NEXT[s][a];
                next[s][a] = REWARD[s][a] + gamma * q[sn][0].max(q[sn][1]);
            }
        }
        q = next;
    }
    q
}

#[test]
fn q_learning_reaches_value_iteration_fixed_point() {
    let gamma = 0.5;
    let oracle = value_iteration(gamma);
    let mut learner = LearnerState::new(3, 2);
    let mut cfg = LearningConfig {
        gamma,
        ..Default::default()
    };
    // step sizes 1/n^0.6 per pair: Σα = ∞, Σα² < ∞
    for n in 1..=20_000u64 {
        cfg.alpha = 1.0 / (n as f64).powf(0.6);
        for s in 0..3 {
            for a in 0..2 {
                q_update(&mut learner, s, a, REWARD[s][a], NEXT[s][a], &cfg).unwrap();
            }
        }
    }
    for s in 0..3 {
        for a in 0..2 {
            let q = learner.q_row(s)[a];
            assert!((q - oracle[s][a]).abs() < 1e-4, "Q({s},{a}) = {q}, expected {}", oracle[s][a]);
        }
    }
}

#[test]
fn nfq_greedy_matches_tabular_greedy() {
    let gamma = 0.5;
    let oracle = value_iteration(gamma);
    let mut experiences = Vec::new();
    for _ in 0..4 {
        for s in 0..3 {
            for a in 0..2 {
                experiences.push(Experience::from_reward(s, a, REWARD[s][a], NEXT[s][a]));
            }
        }
    }
    let enc = OneHotEncoder(3);
    let cfg = NfqConfig {
        gamma,
        iterations: 30,
        inner_epochs: 100,
        ..Default::default()
    };
    let net = MlpNetwork::new(&cfg.layer_sizes(3 + 2), &mut seeded_rng(5)).unwrap();
    let out = nfq_train(&experiences, net, &enc, 2, &cfg).unwrap();
    let agree = (0..3)
        .filter(|&s| {
            let tab = if oracle[s][0] >= oracle[s][1] { 0 } else { 1 };
            greedy_cost_action(&out.net, &enc, 2, s) == tab
        })
        .count();
    assert!(agree as f64 / 3.0 >= 0.9, "agreement on {agree}/3 states");
}

#[test]
fn nfq_batch_error_is_mostly_nonincreasing() {
    let mut rng = seeded_rng(11);
    let experiences: Vec<Experience> = (0..40)
        .map(|_| {
            let s = rng.random_range(0..3);
            let a = rng.random_range(0..2);
            Experience::from_reward(s, a, REWARD[s][a], NEXT[s][a])
        })
        .collect();
    let enc = OneHotEncoder(3);
    let cfg = NfqConfig {
        gamma: 0.5,
        iterations: 25,
        inner_epochs: 50,
        ..Default::default()
    };
    let net = MlpNetwork::new(&cfg.layer_sizes(5), &mut seeded_rng(2)).unwrap();
    let out = nfq_train(&experiences, net, &enc, 2, &cfg).unwrap();
    let errs = &out.batch_errors;
    assert!(errs.len() >= 20);
    let rises = errs.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
    assert!(rises <= 2, "batch error rose {rises} times: {errs:?}");
}

#[test]
fn nfq_pure_regression_fits_every_cost() {
    let experiences = vec![
        Experience::new(0, 0, 1.0, 1),
        Experience::new(1, 1, -0.5, 2),
        Experience::new(2, 0, 2.5, 0),
        Experience::new(2, 1, 0.3, 0),
    ];
    let enc = OneHotEncoder(3);
    let cfg = NfqConfig {
        gamma: 0.0,
        iterations: 3,
        inner_epochs: 400,
        ..Default::default()
    };
    let net = MlpNetwork::new(&cfg.layer_sizes(5), &mut seeded_rng(8)).unwrap();
    let out = nfq_train(&experiences, net, &enc, 2, &cfg).unwrap();
    for e in &experiences {
        let q = levelk_core::rl::nfq::q_costs(&out.net, &enc, 2, e.state)[e.action];
        assert!((q - e.cost).abs() < 5e-2, "Q({},{}) = {q}, cost {}", e.state, e.action, e.cost);
    }
}

/// Straight transcription of the average-reward update, one scalar at a
/// time.
struct Reference {
    s: usize,
    a: usize,
    q: Vec<Vec<f64>>,
    v: Vec<f64>,
    bq: Vec<Vec<f64>>,
    bv: Vec<f64>,
    kq: Vec<Vec<f64>>,
    kv: Vec<f64>,
    r_sum: f64,
    t: f64,
}

impl Reference {
    fn new(s: usize, a: usize) -> Self {
        Self {
            s,
            a,
            q: vec![vec![0.0; a]; s],
            v: vec![0.0; s],
            bq: vec![vec![0.0; a]; s],
            bv: vec![0.0; s],
            kq: vec![vec![0.0; a]; s],
            kv: vec![0.0; s],
            r_sum: 0.0,
            t: 0.0,
        }
    }

    fn step(&mut self, m: usize, u: usize, r: f64, g: f64) {
        // deviation from the running mean of earlier rewards
        let avg = if self.t > 0.0 { self.r_sum / self.t } else { 0.0 };
        let d = r - avg;
        self.t += 1.0;
        self.r_sum += r;
        self.kq[m][u] += 1.0;
        self.kv[m] += 1.0;
        for s in 0..self.s {
            for a in 0..self.a {
                let chi = if s == m && a == u { 1.0 } else { 0.0 };
                let w = if chi == 1.0 { 1.0 / self.kq[s][a] } else { 0.0 };
                self.bq[s][a] = (1.0 - w) * g * self.bq[s][a] + w;
                self.q[s][a] = (1.0 - w) * self.q[s][a] + self.bq[s][a] * d;
            }
            let chi = if s == m { 1.0 } else { 0.0 };
            let w = if chi == 1.0 { 1.0 / self.kv[s] } else { 0.0 };
            self.bv[s] = (1.0 - w) * g * self.bv[s] + w;
            self.v[s] = (1.0 - w) * self.v[s] + self.bv[s] * d;
        }
    }
}

#[test]
fn average_reward_update_matches_reference_transcription() {
    let (ns, na) = (4, 2);
    let schedule = GammaSchedule::Harmonic { tau: 5.0 };
    let cfg = LearningConfig {
        gamma_schedule: schedule,
        ..Default::default()
    };
    let mut eager = LearnerState::new(ns, na);
    let mut lazy = JaakkolaLearner::new(ns, na, schedule);
    let mut reference = Reference::new(ns, na);
    let mut rng = seeded_rng(4);
    for t in 1..=300u64 {
        let s = rng.random_range(0..ns);
        let a = rng.random_range(0..na);
        let r: f64 = rng.random_range(-1.0..2.0);
        jaakkola_update(&mut eager, s, a, r, &cfg).unwrap();
        lazy.update(s, a, r).unwrap();
        reference.step(s, a, r, schedule.at(t));
    }
    for s in 0..ns {
        assert!((eager.v[s] - reference.v[s]).abs() < 1e-9);
        assert!((lazy.v(s) - reference.v[s]).abs() < 1e-9);
        for a in 0..na {
            let i = s * na + a;
            assert!((eager.q[i] - reference.q[s][a]).abs() < 1e-9, "Q({s},{a})");
            assert!((eager.beta_sa[i] - reference.bq[s][a]).abs() < 1e-12);
            assert!((lazy.q(s, a) - reference.q[s][a]).abs() < 1e-9, "lazy Q({s},{a})");
        }
    }
}

fn sweep_counter(states: usize, actions: usize, visits: usize) -> u64 {
    let cfg = LearningConfig::default();
    let mut learner = LearnerState::new(states, actions);
    let mut policy = StochasticPolicy::uniform(states, actions);
    for s in 0..states {
        for k in 0..visits {
            jaakkola_update(&mut learner, s, k % actions, 1.0, &cfg).unwrap();
            jaakkola_improve(&mut policy, &mut learner, cfg.epsilon, 0.0).unwrap();
        }
    }
    learner.op_counter
}

#[test]
fn instrumented_counter_matches_closed_form() {
    for (s, a, k) in [(10u64, 3u64, 2u64), (50, 7, 1), (1, 1, 1), (6, 2, 3)] {
        let closed = k * s * ((24 + (a - 1) * 4) + (s - 1) * a * 8 + s * a * 4);
        assert_eq!(op_count_sweep(s, a, k), closed);
        assert_eq!(sweep_counter(s as usize, a as usize, k as usize), closed, "S={s} A={a} K={k}");
    }
}

#[test]
fn operation_count_is_quadratic_in_states() {
    let ratio = op_count_sweep(400, 3, 1) as f64 / op_count_sweep(200, 3, 1) as f64;
    assert!((ratio - 4.0).abs() / 4.0 < 0.1, "ratio {ratio}");
}

fn row_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("nonzero", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #[test]
    fn improved_rows_stay_normalized(
        qs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..20),
        eps in 0.0f64..=1.0,
    ) {
        let mut policy = StochasticPolicy::uniform(1, 3);
        let mut learner = LearnerState::new(1, 3);
        for q in qs {
            learner.q.copy_from_slice(&q);
            jaakkola_improve(&mut policy, &mut learner, eps, 0.01).unwrap();
            let sum: f64 = policy.row(0).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn improvement_never_lowers_unique_greedy_action(
        row in row_strategy(4),
        best in 0usize..4,
        eps in 0.0f64..=1.0,
    ) {
        let mut policy = StochasticPolicy::from_table(1, 4, row.clone()).unwrap();
        let mut learner = LearnerState::new(1, 4);
        learner.q[best] = 1.0;
        jaakkola_improve(&mut policy, &mut learner, eps, 0.0).unwrap();
        prop_assert!(policy.prob(0, best) >= row[best] - 1e-12);
    }

    #[test]
    fn floor_bounds_every_entry(row in row_strategy(7), f in 0.001f64..0.14) {
        let mut r = row.clone();
        apply_floor(&mut r, f).unwrap();
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= f - 1e-12);
        prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
