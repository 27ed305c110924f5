use levelk_core::airspace::{AircraftKind, AircraftSpec, AirspaceScenario, Layout, SaaAlgorithm};
use levelk_core::harness::*;
use levelk_core::levelk::{Domain, PolicyRegistry};
use levelk_core::traffic::TrafficConfig;
use levelk_core::Error;

fn registry() -> PolicyRegistry {
    PolicyRegistry::with_anchor(Domain::Airspace)
}

#[test]
fn pearson_examples() {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
    let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
    assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
    // deviations (−2,−1,0,1,2) and (−1,−2,1,0,2): 8 / √(10·10)
    let ys = [2.0, 1.0, 4.0, 3.0, 5.0];
    assert!((pearson(&xs, &ys).unwrap() - 0.8).abs() < 1e-12);
    assert!(matches!(
        pearson(&xs, &[3.0; 5]),
        Err(Error::UndefinedCorrelation(_))
    ));
    assert!(pearson(&[1.0], &[1.0]).is_err());
    assert!(pearson(&xs, &ys[..4]).is_err());
}

#[test]
fn memory_estimates() {
    assert_eq!(memory_estimate(421_875, 16, 8), 54_000_000);
    assert_eq!(memory_estimate(1, 1, 1), 1);
    let big = memory_estimate(AIRSPACE_3D_STATES, 16, 8);
    assert_eq!(big, 843_750_000_000);
    // 786 GiB, 844 GB: about 800 GB either way
    assert_eq!((big as f64 / 1e11).round(), 8.0);
    assert_eq!((big as f64 / (1u64 << 30) as f64 / 100.0).round(), 8.0);
}

fn lone_uas(speed: f64) -> AirspaceScenario {
    AirspaceScenario {
        layout: Layout::Explicit {
            aircraft: vec![AircraftSpec {
                kind: AircraftKind::Unmanned,
                position: [0.0, 0.0],
                speed,
                heading: None,
                waypoints: vec![[50.0, 0.0]],
                level: None,
            }],
        },
        ..Default::default()
    }
}

#[test]
fn lone_uas_flight_time_is_path_over_speed() {
    let sc = lone_uas(300.0);
    let m = run_episode(&sc, &registry(), 1, None).unwrap();
    assert_eq!(m.separation_violations, 0.0);
    assert_eq!(m.collisions, 0.0);
    let expected = 50.0 / 300.0 * 3600.0;
    assert!(
        (m.uas_flight_time - expected).abs() <= sc.config.dt,
        "flight time {} vs {expected}",
        m.uas_flight_time
    );
}

#[test]
fn episodes_are_deterministic_in_the_seed() {
    let sc = AirspaceScenario::default();
    let reg = registry();
    let a = run_episode(&sc, &reg, 11, None).unwrap();
    let b = run_episode(&sc, &reg, 11, None).unwrap();
    assert_eq!(a.values().map(f64::to_bits), b.values().map(f64::to_bits));
    let mut sc3 = sc.clone();
    sc3.pilot_level = 3;
    assert!(matches!(run_episode(&sc3, &reg, 11, None), Err(Error::Config(_))));
}

#[test]
fn single_run_grid_reports_that_episode() {
    let sc = AirspaceScenario::default();
    let reg = registry();
    let grid = SweepGrid {
        distance_horizons: vec![25.0],
        time_horizons: vec![60.0],
        runs_per_cell: 1,
        base_seed: 3,
    };
    let cells = sweep(&grid, &sc, SaaAlgorithm::Saa2, &reg).unwrap();
    assert_eq!(cells.len(), 1);
    let mut direct = sc.clone();
    direct.config.saa.algorithm = SaaAlgorithm::Saa2;
    direct.config.saa.distance_horizon = 25.0;
    direct.config.saa.time_horizon = 60.0;
    let m = run_episode(&direct, &reg, grid.run_seed(0), None).unwrap();
    assert_eq!(cells[0].mean, m);
    assert_eq!(cells[0].se.values(), [0.0; 6]);
}

fn small_grid(dh: Vec<f64>, th: Vec<f64>) -> SweepGrid {
    SweepGrid {
        distance_horizons: dh,
        time_horizons: th,
        runs_per_cell: 12,
        base_seed: 21,
    }
}

#[test]
fn sweep_means_and_order_invariance() {
    let sc = AirspaceScenario::default();
    let reg = registry();
    let forward = sweep(&small_grid(vec![0.0, 25.0], vec![30.0, 120.0]), &sc, SaaAlgorithm::Saa2, &reg).unwrap();
    let reverse = sweep(&small_grid(vec![25.0, 0.0], vec![120.0, 30.0]), &sc, SaaAlgorithm::Saa2, &reg).unwrap();
    assert_eq!(forward.len(), 4);
    for c in &forward {
        let twin = reverse
            .iter()
            .find(|r| r.distance_horizon == c.distance_horizon && r.time_horizon == c.time_horizon)
            .unwrap();
        assert_eq!(c.episodes, twin.episodes);
        for k in 0..6 {
            let xs: Vec<f64> = c.episodes.iter().map(|e| e.values()[k]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            assert!((c.mean.values()[k] - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn disabled_cell_has_at_least_the_violations_of_enabled_cells() {
    let sc = AirspaceScenario::default();
    let reg = registry();
    let cells = sweep(&small_grid(vec![0.0, 15.0, 40.0], vec![60.0]), &sc, SaaAlgorithm::Saa2, &reg).unwrap();
    let control = cells.iter().find(|c| c.distance_horizon == 0.0).unwrap().total_violations();
    for c in cells.iter().filter(|c| c.distance_horizon > 0.0) {
        assert!(
            control >= c.total_violations(),
            "control {control} vs {} at {}",
            c.total_violations(),
            c.distance_horizon
        );
    }
}

#[test]
fn report_round_trip() {
    let sc = AirspaceScenario::default();
    let cells = sweep(&small_grid(vec![0.0, 25.0], vec![60.0]), &sc, SaaAlgorithm::Saa1, &registry()).unwrap();
    let text = format_report(&cells);
    assert_eq!(text.lines().count(), 3);
    let back = parse_report(&text).unwrap();
    assert_eq!(back.len(), cells.len());
    for (a, b) in cells.iter().zip(&back) {
        assert_eq!((a.distance_horizon, a.time_horizon, a.runs), (b.distance_horizon, b.time_horizon, b.runs));
        for (x, y) in a.mean.values().iter().zip(b.mean.values()) {
            assert!((x - y).abs() <= 5e-7);
        }
    }
    assert_eq!(format_report(&back), text);

    let broken = text.replacen(",60,", ",sixty,", 1);
    match parse_report(&broken) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(parse_report("a,b\n").is_err());

    let dir = tempfile::tempdir().unwrap();
    write_report(&dir.path().join("r.csv"), &cells).unwrap();
    assert_eq!(read_report(&dir.path().join("r.csv")).unwrap().len(), 2);
    write_plot_data(dir.path(), &cells).unwrap();
    let v = std::fs::read_to_string(dir.path().join("violations.csv")).unwrap();
    assert_eq!(v.lines().count(), 3);
}

#[test]
fn synthetic_drivers_are_seeded_and_disjoint() {
    let cfg = TrafficConfig {
        lanes: 3,
        num_vehicles: 6,
        episode_seconds: 20.0,
        ..Default::default()
    };
    let reg = PolicyRegistry::with_anchor(Domain::Traffic);
    let a = synthetic_drivers(&cfg, &reg, 0, 10, 5).unwrap();
    let b = synthetic_drivers(&cfg, &reg, 0, 10, 5).unwrap();
    assert_eq!(a.vehicles, b.vehicles);
    assert_eq!(a.vehicles.len(), 10);
    assert_eq!(a.vehicles.keys().copied().collect::<Vec<_>>(), (0..10).collect::<Vec<u64>>());
    // episodes occupy disjoint frame ranges
    let last_first = a.vehicles[&5].iter().map(|r| r.frame).max().unwrap();
    let first_second = a.vehicles[&6].iter().map(|r| r.frame).min().unwrap();
    assert!(first_second > last_first);
    assert!(matches!(
        synthetic_drivers(&cfg, &reg, 2, 10, 5),
        Err(Error::Config(_))
    ));
}
