use std::path::Path;
use std::process::{Command, Output};

fn levelk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levelk")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = levelk(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_documents_every_flag() {
    let expected: [(&str, &[&str]); 7] = [
        ("train", &["--domain", "--levels", "--algo", "--config", "--out", "--seed", "--episodes"]),
        ("simulate", &["--domain", "--policies", "--config", "--level", "--runs", "--drivers", "--seed", "--out"]),
        ("sweep", &["--saa", "--dh", "--th", "--runs", "--scenario", "--config", "--policies", "--level", "--seed", "--out", "--plots"]),
        ("ingest", &["--input", "--out", "--ngsim", "--lenient", "--lanes", "--histograms", "--bin-width"]),
        ("validate", &["--data", "--policies", "--nlimit", "--out", "--config", "--levels", "--floor", "--detail", "--summary"]),
        ("report", &["--sweep", "--out"]),
        ("mem-estimate", &["--states", "--columns", "--bytes"]),
    ];
    for (cmd, own) in expected {
        let flags: Vec<&str> = own.iter().copied().chain(["--jobs"]).collect();
        let help = String::from_utf8(ok(&[cmd, "--help"]).stdout).unwrap();
        for flag in &flags {
            let line = help
                .lines()
                .find(|l| l.trim_start().starts_with(&format!("{flag} ")) || l.trim_start() == *flag)
                .unwrap_or_else(|| panic!("{cmd} --help lacks {flag}"));
            // flag, optional value name, then a description
            let words = line.split_whitespace().filter(|w| !w.starts_with('-') && !w.starts_with('<')).count();
            assert!(words > 0, "{cmd} {flag} has no description: {line}");
        }
        let listed = help.lines().filter(|l| l.trim_start().starts_with("--")).count();
        assert_eq!(listed, flags.len(), "{cmd}: unexpected flags in\n{help}");
    }
}

#[test]
fn mem_estimate_prints_bytes() {
    let out = ok(&["mem-estimate"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "54000000 bytes (54 MB)");
    let out = ok(&["mem-estimate", "--states", "1", "--columns", "1", "--bytes", "1"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("1 bytes"));
}

#[test]
fn training_is_reproducible_and_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"train": {"learning": {"episodes": 7}}, "traffic": {"lanes": 3, "num_vehicles": 10}}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["train", "--domain", "traffic", "--levels", "1", "--episodes", "50", "--seed", "9", "--config", s(&cfg), "--out", s(out)]);
    }
    let pa = std::fs::read(a.join("traffic/level1.policy")).unwrap();
    assert_eq!(pa, std::fs::read(b.join("traffic/level1.policy")).unwrap());
    let telemetry = std::fs::read_to_string(a.join("traffic/telemetry.csv")).unwrap();
    assert_eq!(telemetry.lines().count(), 51);

    let c = dir.path().join("c");
    ok(&["train", "--domain", "traffic", "--levels", "1", "--config", s(&cfg), "--out", s(&c)]);
    let telemetry = std::fs::read_to_string(c.join("traffic/telemetry.csv")).unwrap();
    assert_eq!(telemetry.lines().count(), 8);
}

#[test]
fn airspace_levels_and_backends() {
    let dir = tempfile::tempdir().unwrap();
    let three = dir.path().join("three");
    ok(&["train", "--domain", "airspace", "--levels", "3", "--episodes", "3", "--out", s(&three)]);
    for l in 1..=3 {
        assert!(three.join(format!("airspace/level{l}.policy")).is_file());
    }
    assert!(!three.join("airspace/level4.policy").exists());

    let nfq = dir.path().join("nfq");
    ok(&["train", "--domain", "airspace", "--levels", "1", "--algo", "nfq", "--episodes", "2", "--out", s(&nfq)]);
    assert!(nfq.join("airspace/level1.policy").is_file());
}

fn violations(report: &Path) -> Vec<String> {
    std::fs::read_to_string(report)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().to_string())
        .collect()
}

#[test]
fn sweep_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = |saa: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&["sweep", "--saa", saa, "--dh", "15,40", "--th", "30,120", "--runs", "5", "--seed", "2", "--out", s(&out)]);
        out
    };
    let first = run("2", "a.csv");
    let text = std::fs::read_to_string(&first).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(std::fs::read(run("2", "b.csv")).unwrap(), text.as_bytes());
    let saa1 = run("1", "c.csv");
    assert_ne!(violations(&first), violations(&saa1));
}

#[test]
fn validation_from_level_one_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"train": {"learning": {"epsilon": 1.0}}, "traffic": {"lanes": 3, "num_vehicles": 15, "episode_seconds": 300.0}}"#,
    )
    .unwrap();
    let pol = dir.path().join("pol");
    let sim = dir.path().join("sim");
    ok(&["train", "--domain", "traffic", "--levels", "1", "--episodes", "600", "--config", s(&cfg), "--out", s(&pol)]);
    ok(&["simulate", "--domain", "traffic", "--policies", s(&pol), "--level", "1", "--drivers", "30", "--config", s(&cfg), "--out", s(&sim)]);
    let ks = dir.path().join("ks.csv");
    let data = sim.join("trajectories.csv");
    ok(&["validate", "--data", s(&data), "--policies", s(&pol), "--nlimit", "1,5", "--config", s(&cfg), "--out", s(&ks)]);

    let text = std::fs::read_to_string(&ks).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("driver_id,model,n_limit,n_comp,n_success,percentage"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let mean = |model: &str, n_limit: &str| {
        let xs: Vec<f64> = rows
            .iter()
            .filter(|r| r[1] == model && r[2] == n_limit)
            .filter_map(|r| r[5].parse::<f64>().ok())
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    assert!(mean("level1", "1") > mean("uniform", "1"));
    let flagged = rows.iter().filter(|r| r[2] == "5" && r[3] == "0").count();
    assert!(flagged > 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let data = dir.path().join("data.csv");
    std::fs::write(&data, "vehicle_id,frame,x,y,lane,v,a\n1,0,0,1.85,0,20,0\n").unwrap();
    let out = levelk(&["validate", "--data", s(&data), "--policies", s(&missing), "--out", s(&dir.path().join("ks.csv"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "vehicle_id,frame,x,y,lane,v,a\n1,0,0,1.85,9,20,0\n").unwrap();
    let out = levelk(&["ingest", "--input", s(&bad), "--lanes", "5", "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(out.status.code(), Some(4));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"trian": {}}"#).unwrap();
    let out = levelk(&["train", "--domain", "traffic", "--config", s(&cfg), "--out", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(levelk(&["--jobs", "0", "mem-estimate"]).status.code(), Some(2));
    assert_eq!(levelk(&["sweep", "--saa", "3", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(levelk(&[]).status.code(), Some(2));
}
