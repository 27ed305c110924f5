//! `levelk`: train level-k policies, simulate, sweep SAA horizons, ingest
//! trajectory data and validate driver models.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use levelk_core::airspace::{AirspaceScenario, SaaAlgorithm};
use levelk_core::harness::{
    format_report, pearson, read_report, run_episode, sweep, synthetic_drivers, write_plot_data, EpisodeMetrics,
    SweepGrid,
};
use levelk_core::io::{
    acceleration_histogram, convert_ngsim, headway_histogram, load_json, parse_trajectories, read_visits,
    write_csv, write_trajectories, write_visits, ParseMode, ParseOptions,
};
use levelk_core::levelk::{
    train_levels, AirspaceTraining, Backend, Domain, PolicyRegistry, TrafficTraining, TrainConfig, TrainingDomain,
};
use levelk_core::rl::StochasticPolicy;
use levelk_core::traffic::TrafficConfig;
use levelk_core::validation::{
    best_level_summary, build_empirical, format_histograms, format_ks_details, format_ks_reports,
    format_summaries, validate_driver, KsReport, DEFAULT_FLOOR,
};

#[derive(Parser, Debug)]
#[command(name = "levelk", version, about = "Level-k policy training, simulation and validation")]
struct Cli {
    /// Worker threads for episodes, cells and drivers [default: available parallelism].
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train levels 1..k by repeated best response to the level below.
    Train(TrainArgs),
    /// Run episodes with trained policies and write logs.
    Simulate(SimulateArgs),
    /// Sweep SAA distance and time horizons over seeded airspace runs.
    Sweep(SweepArgs),
    /// Validate a trajectory file and write it in the canonical schema.
    Ingest(IngestArgs),
    /// Test recorded drivers against levels 1..k and the uniform model.
    Validate(ValidateArgs),
    /// Derive plot data and correlation summaries from a sweep report.
    Report(ReportArgs),
    /// Memory for a dense table of states × columns values.
    MemEstimate(MemArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DomainArg {
    Airspace,
    Traffic,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Airspace => Domain::Airspace,
            DomainArg::Traffic => Domain::Traffic,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlgoArg {
    Jaakkola,
    Q,
    Nfq,
}

impl From<AlgoArg> for Backend {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Jaakkola => Backend::Jaakkola,
            AlgoArg::Q => Backend::Q,
            AlgoArg::Nfq => Backend::Nfq,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Simulation domain.
    #[arg(long, value_enum)]
    domain: DomainArg,
    /// Highest level to train.
    #[arg(long, default_value_t = 1)]
    levels: usize,
    /// Learning backend.
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for policies, visit counts and telemetry.
    #[arg(long)]
    out: PathBuf,
    /// Base seed of all training episodes.
    #[arg(long)]
    seed: Option<u64>,
    /// Episodes per level.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Simulation domain.
    #[arg(long, value_enum)]
    domain: DomainArg,
    /// Directory of trained policies; only level 0 is available without it.
    #[arg(long)]
    policies: Option<PathBuf>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Level every pilot or driver follows.
    #[arg(long)]
    level: Option<usize>,
    /// Airspace episodes to run.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Traffic drivers to record [default: vehicles per episode].
    #[arg(long)]
    drivers: Option<usize>,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// SAA algorithm of the unmanned aircraft (1 or 2).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    saa: u8,
    /// Distance horizons in km, comma separated; 0 is the SAA-off control.
    #[arg(long, value_delimiter = ',')]
    dh: Vec<f64>,
    /// Time horizons in s, comma separated.
    #[arg(long, value_delimiter = ',')]
    th: Vec<f64>,
    /// Seeded runs per cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Airspace scenario JSON [default: built-in random layout].
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// JSON run configuration; its `sweep` section sets the grid.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of trained airspace policies.
    #[arg(long)]
    policies: Option<PathBuf>,
    /// Level of every manned pilot without an explicit level.
    #[arg(long)]
    level: Option<usize>,
    /// Base seed shared by all cells.
    #[arg(long)]
    seed: Option<u64>,
    /// Report CSV.
    #[arg(long)]
    out: PathBuf,
    /// Directory for per-metric plot series.
    #[arg(long)]
    plots: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Trajectory CSV to read.
    #[arg(long)]
    input: PathBuf,
    /// Canonical trajectory CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Input uses NGSIM column names and feet.
    #[arg(long)]
    ngsim: bool,
    /// Skip malformed rows instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Number of lanes; rows outside are integrity errors.
    #[arg(long)]
    lanes: Option<usize>,
    /// Directory for headway and acceleration histograms.
    #[arg(long)]
    histograms: Option<PathBuf>,
    /// Histogram bin width (m for headway, m/s² for acceleration).
    #[arg(long, default_value_t = 1.0)]
    bin_width: f64,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Canonical trajectory CSV.
    #[arg(long)]
    data: PathBuf,
    /// Directory of trained traffic policies and visit counts.
    #[arg(long)]
    policies: PathBuf,
    /// Minimum visits in data and model, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    nlimit: Vec<u64>,
    /// KS report CSV.
    #[arg(long)]
    out: PathBuf,
    /// JSON run configuration; its `traffic` section gives the road geometry.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Highest level to compare [default: all trained levels].
    #[arg(long)]
    levels: Option<usize>,
    /// Probability floor applied before each test.
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    floor: f64,
    /// Per-state test details CSV.
    #[arg(long)]
    detail: Option<PathBuf>,
    /// Per-driver best-level summary CSV; a histogram CSV is written next to it.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Sweep report CSV.
    #[arg(long)]
    sweep: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MemArgs {
    /// Number of states.
    #[arg(long, default_value_t = 421_875)]
    states: u64,
    /// Values stored per state.
    #[arg(long, default_value_t = 16)]
    columns: u64,
    /// Bytes per value.
    #[arg(long, default_value_t = 8)]
    bytes: u64,
}

/// Contents of `--config`. Every section is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    train: TrainConfig,
    traffic: TrafficConfig,
    scenario: AirspaceScenario,
    sweep: Option<SweepGrid>,
}

fn load_config(path: Option<&Path>) -> levelk_core::Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), load_json)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use levelk_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) | E::Schema { .. } | E::Json(_) | E::Argument(_) | E::Bounds { .. } => 2,
                E::Registry(_) => 3,
                E::Integrity { .. } | E::Parse { .. } | E::Csv(_) | E::Encoding(_) => 4,
                E::UndefinedCorrelation(_) | E::Io { .. } => 1,
            };
        }
    }
    1
}

fn load_registry(dir: Option<&Path>, domain: Domain) -> levelk_core::Result<PolicyRegistry> {
    match dir {
        Some(d) => PolicyRegistry::load(d, domain),
        None => Ok(PolicyRegistry::with_anchor(domain)),
    }
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let mut tc = cfg.train;
    if let Some(a) = args.algo {
        tc.backend = a.into();
    }
    if let Some(s) = args.seed {
        tc.learning.seed = s;
    }
    if let Some(e) = args.episodes {
        tc.learning.episodes = e;
    }
    let domain: Domain = args.domain.into();
    let env: Box<dyn TrainingDomain> = match domain {
        Domain::Traffic => Box::new(TrafficTraining { config: cfg.traffic }),
        Domain::Airspace => Box::new(AirspaceTraining { scenario: cfg.scenario }),
    };
    let mut registry = PolicyRegistry::with_anchor(domain);
    let outcomes = train_levels(&mut registry, env.as_ref(), args.levels, &tc)?;
    registry.save(&args.out)?;
    let mut telemetry = Vec::new();
    for o in &outcomes {
        write_visits(&PolicyRegistry::visits_path(&args.out, domain, o.level), &o.visits)?;
        telemetry.extend(o.telemetry.iter().cloned());
    }
    write_csv(&args.out.join(domain.name()).join("telemetry.csv"), &telemetry)?;
    for o in &outcomes {
        let n = o.telemetry.len().max(1) as f64;
        let mean: f64 = o.telemetry.iter().map(|t| t.mean_reward).sum::<f64>() / n;
        println!(
            "level {}: {} episodes, mean reward {mean:.4}, final entropy {:.6}",
            o.level,
            o.telemetry.len(),
            o.telemetry.last().map_or(0.0, |t| t.entropy)
        );
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let domain: Domain = args.domain.into();
    let registry = load_registry(args.policies.as_deref(), domain)?;
    match domain {
        Domain::Traffic => {
            let level = args.level.unwrap_or(0);
            let drivers = args.drivers.unwrap_or(cfg.traffic.num_vehicles);
            let set = synthetic_drivers(&cfg.traffic, &registry, level, drivers, args.seed)?;
            let path = args.out.join("trajectories.csv");
            write_trajectories(&path, &set)?;
            println!("{} drivers, {} records -> {}", set.vehicles.len(), set.num_records(), path.display());
        }
        Domain::Airspace => {
            if args.runs == 0 {
                bail!(levelk_core::Error::Config("--runs must be positive".into()));
            }
            let mut scenario = cfg.scenario;
            if let Some(l) = args.level {
                scenario.pilot_level = l;
            }
            let mut log = Vec::new();
            let mut metrics = String::from("run,");
            metrics.push_str(&EpisodeMetrics::FIELDS.join(","));
            metrics.push('\n');
            for r in 0..args.runs {
                let seed = levelk_core::mix_seed(args.seed, r as u64);
                let m = run_episode(&scenario, &registry, seed, (r == 0).then_some(&mut log))?;
                let vals: Vec<String> = m.values().iter().map(|v| v.to_string()).collect();
                let _ = writeln!(metrics, "{r},{}", vals.join(","));
            }
            std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
            let path = args.out.join("metrics.csv");
            std::fs::write(&path, metrics).with_context(|| format!("writing {}", path.display()))?;
            write_csv(&args.out.join("flight_log.csv"), &log)?;
            println!("{} runs -> {}", args.runs, path.display());
        }
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let mut scenario = match &args.scenario {
        Some(p) => load_json::<AirspaceScenario>(p)?,
        None => cfg.scenario,
    };
    if let Some(l) = args.level {
        scenario.pilot_level = l;
    }
    let mut grid = cfg.sweep.unwrap_or(SweepGrid {
        distance_horizons: vec![0.0, 15.0, 25.0, 40.0],
        time_horizons: vec![30.0, 60.0, 120.0],
        runs_per_cell: 100,
        base_seed: 0,
    });
    if !args.dh.is_empty() {
        grid.distance_horizons = args.dh;
    }
    if !args.th.is_empty() {
        grid.time_horizons = args.th;
    }
    if let Some(r) = args.runs {
        grid.runs_per_cell = r;
    }
    if let Some(s) = args.seed {
        grid.base_seed = s;
    }
    let algorithm = if args.saa == 1 { SaaAlgorithm::Saa1 } else { SaaAlgorithm::Saa2 };
    let registry = load_registry(args.policies.as_deref(), Domain::Airspace)?;
    let cells = sweep(&grid, &scenario, algorithm, &registry)?;
    levelk_core::io::write_text(&args.out, &format_report(&cells))?;
    if let Some(dir) = &args.plots {
        write_plot_data(dir, &cells)?;
    }
    println!("{} cells x {} runs -> {}", cells.len(), grid.runs_per_cell, args.out.display());
    Ok(())
}

fn ingest(args: IngestArgs) -> anyhow::Result<()> {
    let source = if args.ngsim {
        let tmp = args.out.with_extension("ngsim.tmp.csv");
        convert_ngsim(&args.input, &tmp)?;
        tmp
    } else {
        args.input.clone()
    };
    let opts = ParseOptions {
        mode: if args.lenient { ParseMode::Lenient } else { ParseMode::Strict },
        lanes: args.lanes,
    };
    let parsed = parse_trajectories(&source, opts);
    if args.ngsim {
        let _ = std::fs::remove_file(&source);
    }
    let set = parsed?;
    for w in &set.warnings {
        eprintln!("warning: {w}");
    }
    write_trajectories(&args.out, &set)?;
    if let Some(dir) = &args.histograms {
        let headway = headway_histogram(&set, args.bin_width, None)?;
        let accel = acceleration_histogram(&set, args.bin_width)?;
        levelk_core::io::write_text(&dir.join("headway.csv"), &headway.to_csv())?;
        levelk_core::io::write_text(&dir.join("acceleration.csv"), &accel.to_csv())?;
    }
    println!(
        "{} vehicles, {} records, {} skipped rows -> {}",
        set.vehicles.len(),
        set.num_records(),
        set.skipped_rows,
        args.out.display()
    );
    Ok(())
}

fn validate(args: ValidateArgs) -> anyhow::Result<()> {
    use rayon::prelude::*;

    let cfg = load_config(args.config.as_deref())?;
    let registry = PolicyRegistry::load(&args.policies, Domain::Traffic)?;
    let max = args.levels.unwrap_or(registry.max_level(Domain::Traffic));
    if max == 0 {
        bail!(levelk_core::Error::Registry(format!(
            "no trained traffic policies in {}",
            args.policies.display()
        )));
    }
    let mut models = Vec::new();
    for level in 1..=max {
        let policy = registry.get(Domain::Traffic, level)?;
        let path = PolicyRegistry::visits_path(&args.policies, Domain::Traffic, level);
        if !path.exists() {
            bail!(levelk_core::Error::Registry(format!("visit counts {} not found", path.display())));
        }
        models.push((level, policy, read_visits(&path)?));
    }
    let states = Domain::Traffic.num_states();
    let uniform = StochasticPolicy::uniform(states, Domain::Traffic.num_actions());
    let mut uniform_visits = vec![0u64; states];
    for (_, _, v) in &models {
        for (u, x) in uniform_visits.iter_mut().zip(v) {
            *u = (*u).max(*x);
        }
    }

    let set = parse_trajectories(&args.data, ParseOptions::default())?;
    let drivers: Vec<_> = build_empirical(&set, &cfg.traffic)?.into_iter().collect();

    let mut all: Vec<KsReport> = Vec::new();
    let mut summaries = Vec::new();
    for &n_limit in &args.nlimit {
        let run = |name: &str, policy: &StochasticPolicy, visits: &[u64]| -> levelk_core::Result<Vec<KsReport>> {
            drivers
                .par_iter()
                .map(|(id, e)| validate_driver(*id, e, name, policy, visits, n_limit, args.floor))
                .collect()
        };
        let mut per_level = Vec::new();
        for (level, policy, visits) in &models {
            per_level.push((*level, run(&format!("level{level}"), policy, visits)?));
        }
        let ud = run("uniform", &uniform, &uniform_visits)?;
        let summary = best_level_summary(&per_level, &ud)?;
        for (_, r) in per_level {
            all.extend(r);
        }
        all.extend(ud);
        println!(
            "n_limit {n_limit}: {} drivers, combined above uniform for {}, mean gap {}",
            summary.drivers.len(),
            summary.fraction_above_uniform().map_or("n/a".into(), |f| format!("{:.1}%", 100.0 * f)),
            summary.mean_gap().map_or("n/a".into(), |g| format!("{g:.2} points"))
        );
        summaries.push(summary);
    }
    levelk_core::io::write_text(&args.out, &format_ks_reports(&all))?;
    if let Some(p) = &args.detail {
        levelk_core::io::write_text(p, &format_ks_details(&all))?;
    }
    if let Some(p) = &args.summary {
        levelk_core::io::write_text(p, &format_summaries(&summaries))?;
        levelk_core::io::write_text(&p.with_extension("histogram.csv"), &format_histograms(&summaries))?;
    }
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let cells = read_report(&args.sweep)?;
    write_plot_data(&args.out, &cells)?;
    let (control, enabled): (Vec<_>, Vec<_>) = cells
        .iter()
        .partition(|c| c.distance_horizon == 0.0 || c.time_horizon == 0.0);
    let mut out = String::from("distance_horizon,time_horizon,mean_violations,delta_vs_control\n");
    let base = control.first().map(|c| c.mean.separation_violations);
    for c in &cells {
        let delta = base.map(|b| format!("{:.6}", c.mean.separation_violations - b)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{:.6},{delta}",
            c.distance_horizon, c.time_horizon, c.mean.separation_violations
        );
    }
    levelk_core::io::write_text(&args.out.join("violations_vs_control.csv"), &out)?;
    let xs: Vec<f64> = enabled.iter().map(|c| c.mean.manned_trajectory_deviation).collect();
    let ys: Vec<f64> = enabled.iter().map(|c| c.mean.uas_trajectory_deviation).collect();
    let corr = match pearson(&xs, &ys) {
        Ok(r) => format!("{r:.6}"),
        Err(e) => {
            eprintln!("warning: {e}");
            String::new()
        }
    };
    levelk_core::io::write_text(
        &args.out.join("correlation.csv"),
        &format!("cells,pearson_manned_uas_deviation\n{},{corr}\n", enabled.len()),
    )?;
    println!("{} cells, manned/UAS deviation correlation {corr}", enabled.len());
    Ok(())
}

fn mem_estimate(args: MemArgs) -> anyhow::Result<()> {
    let bytes = levelk_core::harness::memory_estimate(args.states, args.columns, args.bytes);
    let mb = bytes as f64 / 1e6;
    println!("{bytes} bytes ({mb} MB)");
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Ingest(a) => ingest(a),
        Command::Validate(a) => validate(a),
        Command::Report(a) => report(a),
        Command::MemEstimate(a) => mem_estimate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(j);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| run(cli)),
        Err(e) => Err(e.into()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
