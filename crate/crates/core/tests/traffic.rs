use levelk_core::seeded_rng;
use levelk_core::traffic::*;

fn config() -> TrafficConfig {
    TrafficConfig {
        lanes: 5,
        num_vehicles: 2,
        ring_length: Some(1000.0),
        ..Default::default()
    }
}

fn car(id: u64, x: f64, lane: usize, v: f64) -> VehicleState {
    let cfg = config();
    VehicleState::new(id, x, lane_center(lane, cfg.lane_width), lane, v, cfg.vehicle_length)
}

#[test]
fn observation_bijection_is_exhaustive() {
    for idx in 0..NUM_OBSERVATIONS {
        assert_eq!(DriverObservation::decode(idx).unwrap().index(), idx);
    }
    assert!(DriverObservation::decode(NUM_OBSERVATIONS).is_err());
}

#[test]
fn front_car_at_eight_metres_closing() {
    let w = TrafficWorld::new(config(), vec![car(0, 100.0, 2, 25.0), car(1, 108.0, 2, 22.0)]).unwrap();
    let obs = w.observe(0);
    let front = obs.slot(Slot::Front);
    assert_eq!(front.distance, DistanceClass::Close);
    assert_eq!(front.motion, MotionClass::Approaching);
    for s in [Slot::FrontLeft, Slot::FrontRight, Slot::RearLeft, Slot::RearRight] {
        assert_eq!(obs.slot(s), SlotReading::ABSENT);
    }
    let alone = TrafficWorld::new(config(), vec![car(0, 100.0, 2, 25.0)]).unwrap();
    assert_eq!(alone.observe(0), DriverObservation::EMPTY_ROAD);
}

#[test]
fn maintain_draws_match_their_moments() {
    let mut rng = seeded_rng(1);
    let xs: Vec<f64> = (0..100_000)
        .map(|_| sample_acceleration(TrafficAction::Maintain, &mut rng).unwrap())
        .collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 0.002, "mean {mean}");
    assert!((std - 0.075).abs() < 0.01, "std {std}");
}

#[test]
fn mild_draws_stay_in_their_support() {
    let mut rng = seeded_rng(2);
    for _ in 0..100_000 {
        let a = sample_acceleration(TrafficAction::Accelerate, &mut rng).unwrap();
        assert!((0.5..=2.5).contains(&a));
        let d = sample_acceleration(TrafficAction::Decelerate, &mut rng).unwrap();
        assert!((-2.5..=-0.5).contains(&d));
    }
}

/// Half-normal CDF with scale `sigma`, by Simpson integration of the
/// density.
fn half_normal_cdf(x: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let n = 2000;
    let h = x / n as f64;
    let f = |t: f64| (2.0 / std::f64::consts::PI).sqrt() / sigma * (-t * t / (2.0 * sigma * sigma)).exp();
    let mut s = f(0.0) + f(x);
    for k in 1..n {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    (s * h / 3.0).min(1.0)
}

#[test]
fn hard_deceleration_follows_half_normal() {
    let mut rng = seeded_rng(3);
    let mut excess: Vec<f64> = (0..100_000)
        .map(|_| {
            let a = sample_acceleration(TrafficAction::HardDecelerate, &mut rng).unwrap();
            assert!(a <= -3.5);
            -a - 3.5
        })
        .collect();
    excess.sort_by(f64::total_cmp);
    let n = excess.len() as f64;
    let mut ks = 0.0f64;
    for (k, x) in excess.iter().enumerate() {
        let f = half_normal_cdf(*x, 0.3);
        ks = ks.max((f - k as f64 / n).abs()).max(((k + 1) as f64 / n - f).abs());
    }
    assert!(ks < 0.01, "KS distance {ks}");
}

#[test]
fn stopping_vehicle_follows_truncated_profile() {
    let vs = car(0, 0.0, 0, 0.1);
    let out = step_vehicle(&vs, -3.5, 0.1);
    assert_eq!(out.v_x, 0.0);
    // stops after 0.1/3.5 s, having covered v²/(2|a|)
    assert!((out.x - 0.01 / 7.0).abs() < 1e-12, "x {}", out.x);
    let go = step_vehicle(&car(0, 0.0, 0, 10.0), 2.0, 0.1);
    assert!((go.x - 1.01).abs() < 1e-12 && (go.v_x - 10.2).abs() < 1e-12);
}

#[test]
fn lane_change_completes_in_t_over_dt_steps() {
    let cfg = config();
    let mut vs = car(0, 0.0, 2, 20.0);
    let mut steps = 0;
    loop {
        let (next, rejected) = execute_lane_change(&vs, LaneDirection::Right, cfg.lanes, cfg.lane_width, 2.0, 0.1);
        assert!(!rejected);
        vs = next;
        steps += 1;
        assert_eq!(vs.v_x, 20.0);
        if vs.lane_change.is_none() {
            break;
        }
        assert!(steps < 100);
    }
    assert_eq!(steps, 20);
    assert_eq!(vs.lane, 3);
    assert!((vs.y - lane_center(3, cfg.lane_width)).abs() < 1e-12);

    let edge = car(1, 0.0, 0, 20.0);
    let (same, rejected) = execute_lane_change(&edge, LaneDirection::Left, cfg.lanes, cfg.lane_width, 2.0, 0.1);
    assert!(rejected);
    assert_eq!(same, edge);
}

#[test]
fn mid_change_observation_uses_true_lateral_position() {
    let cfg = config();
    let w = cfg.lane_width;
    let other = car(1, 108.0, 2, 20.0);
    for (y, front, front_right) in [(2.0 * w - 0.3, false, true), (2.0 * w + 0.3, true, false)] {
        let mut ego = car(0, 100.0, 1, 20.0);
        ego.y = y;
        ego.lane_change = Some(2);
        ego.v_y = w / 2.0;
        let world = TrafficWorld::new(cfg.clone(), vec![ego, other.clone()]).unwrap();
        let obs = world.observe(0);
        assert_eq!(obs.slot(Slot::Front).distance == DistanceClass::Close, front, "y = {y}");
        assert_eq!(obs.slot(Slot::FrontRight).distance == DistanceClass::Close, front_right, "y = {y}");
    }
}

fn overlap_oracle(a: &VehicleState, b: &VehicleState, width: f64) -> bool {
    (a.x - b.x).abs() < (a.length + b.length) / 2.0 && (a.y - b.y).abs() < width
}

#[test]
fn collision_geometry() {
    let cfg = config();
    let same_lane = TrafficWorld::new(cfg.clone(), vec![car(0, 100.0, 1, 20.0), car(1, 103.0, 1, 20.0)]).unwrap();
    assert_eq!(same_lane.collisions(), vec![(0, 1)]);
    let adjacent = TrafficWorld::new(cfg.clone(), vec![car(0, 100.0, 1, 20.0), car(1, 100.0, 2, 20.0)]).unwrap();
    assert!(adjacent.collisions().is_empty());

    let mut ego = car(0, 100.0, 1, 20.0);
    ego.y += 2.5;
    ego.lane_change = Some(2);
    let other = car(1, 102.0, 2, 20.0);
    assert!(overlap_oracle(&ego, &other, cfg.vehicle_width));
    let merging = TrafficWorld::new(cfg, vec![ego, other]).unwrap();
    assert_eq!(merging.collisions(), vec![(0, 1)]);
}

#[test]
fn reward_examples() {
    let cfg = config();
    let crash = TrafficWorld::new(cfg.clone(), vec![car(0, 100.0, 1, 20.0), car(1, 103.0, 1, 20.0)]).unwrap();
    let only_c = TrafficRewardWeights([100.0, 0.0, 0.0, 0.0]);
    assert_eq!(driver_reward(&crash, 0, TrafficAction::Maintain, &only_c).unwrap(), -100.0);

    let w = TrafficRewardWeights([100.0, 1.0, 1.0, 1.0]);
    let alone = TrafficWorld::new(cfg.clone(), vec![car(0, 100.0, 1, 20.0)]).unwrap();
    assert_eq!(driver_reward(&alone, 0, TrafficAction::Maintain, &w).unwrap(), 1.0);

    let nominal = TrafficWorld::new(cfg, vec![car(0, 100.0, 1, 20.0), car(1, 120.0, 1, 20.0)]).unwrap();
    assert_eq!(driver_reward(&nominal, 0, TrafficAction::LaneLeft, &w).unwrap(), -1.0);
}

#[test]
fn classification_thresholds() {
    assert_eq!(classify_distance(5.0).unwrap(), DistanceClass::Close);
    assert_eq!(classify_distance(11.0).unwrap(), DistanceClass::Nominal);
    assert_eq!(classify_distance(20.0).unwrap(), DistanceClass::Nominal);
    assert_eq!(classify_distance(40.0).unwrap(), DistanceClass::Far);
    assert_eq!(classify_motion(2.0), MotionClass::Approaching);
    assert_eq!(classify_motion(0.0), MotionClass::Stable);
    assert_eq!(classify_motion(-2.0), MotionClass::Distancing);
    for a in TrafficAction::ALL.iter().take(5) {
        let mut rng = seeded_rng(a.index() as u64);
        for _ in 0..1000 {
            let x = sample_acceleration(*a, &mut rng).unwrap();
            if *a == TrafficAction::Maintain && x.abs() >= 0.5 {
                continue;
            }
            assert_eq!(classify_acceleration(x), *a, "{x}");
        }
    }
}

#[test]
fn generated_worlds_are_seeded() {
    let cfg = TrafficConfig {
        lanes: 3,
        num_vehicles: 15,
        ..Default::default()
    };
    let a = TrafficWorld::generate(cfg.clone(), &mut seeded_rng(9)).unwrap();
    let b = TrafficWorld::generate(cfg.clone(), &mut seeded_rng(9)).unwrap();
    assert_eq!(a.vehicles, b.vehicles);
    assert_eq!(a.vehicles.len(), 15);
    assert!(a.collisions().is_empty());
}
