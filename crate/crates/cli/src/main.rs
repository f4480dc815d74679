mod output;
mod settings;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qring::config::Config;
use qring::ensemble::{self, regime_reports, run_trial_observed, write_jsonl};
use qring::init::RandomDraw;
use qring::Grid;
use serde_json::json;

use output::{write_diagnostics, write_snapshots, OutDir, RunManifest};
use settings::{apply_override, read_table, resolve, set, ConfigError};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qring",
    version,
    about = "Mean-field ring measurement simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write snapshots, diagnostics and its record.
    Run(Common),
    /// Run repeated trials over trigger angles and tabulate outcome frequencies.
    Sweep(Common),
    /// Print the regime-condition reports without running dynamics.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trigger angle; a comma-separated list for `sweep`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    alpha: Vec<f64>,
    /// Trials per angle.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, env = "QRING_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_final: Option<f64>,
    /// Generic override, e.g. `--set model.lambda=-0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (kind, message, code) = match self {
            Failure::Config(m) => ("config", m, EXIT_CONFIG),
            Failure::Numerical(m) => ("numerical", m, EXIT_NUMERICAL),
            Failure::Io(m) => ("io", m, EXIT_IO),
        };
        eprintln!("{}", json!({ "error": kind, "message": message }));
        ExitCode::from(code)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<qring::Error> for Failure {
    fn from(e: qring::Error) -> Self {
        match e {
            qring::Error::NumericalBlowup { .. } => Failure::Numerical(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn load(c: &Common, command: &str) -> Result<Config, Failure> {
    let mut table = match &c.config {
        Some(path) => read_table(path)?,
        None => toml::Table::new(),
    };
    let mut put = |key: &str, v: toml::Value| set(&mut table, key, v);
    if let Some(seed) = c.seed {
        let seed =
            i64::try_from(seed).map_err(|_| Failure::Config("seed must be below 2^63".into()))?;
        put("run.seed", seed.into())?;
    }
    match (command, c.alpha.as_slice()) {
        (_, []) => {}
        ("sweep", list) => put("sweep.alphas", list.to_vec().into())?,
        (_, [a]) => put("trigger.alpha", (*a).into())?,
        _ => return Err(Failure::Config("--alpha takes a single value here".into())),
    }
    if let Some(t) = c.trials {
        put("sweep.trials", i64::try_from(t).unwrap_or(i64::MAX).into())?;
    }
    if let Some(n) = c.grid_points {
        put("grid.points", i64::try_from(n).unwrap_or(i64::MAX).into())?;
    }
    if let Some(dt) = c.dt {
        put("evolve.dt", dt.into())?;
    }
    if let Some(t) = c.t_final {
        put("evolve.t_final", t.into())?;
    }
    for o in &c.overrides {
        apply_override(&mut table, o)?;
    }
    let config = resolve(table)?;
    config.validate()?;
    Ok(config)
}

fn init_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    Ok(())
}

fn cmd_run(c: &Common) -> Result<(), Failure> {
    let config = load(c, "run")?;
    let alpha = config.trigger.enabled.then_some(config.trigger.alpha);
    if alpha.is_some() {
        config.model.validate_for_measurement()?;
    }
    init_threads(c.threads)?;
    let mut manifest = RunManifest::new("run", &config, config.run.seed);
    let mut snapshots = Vec::new();
    let run = run_trial_observed(
        &config,
        alpha,
        config.run.seed,
        config.run.trial_index,
        |s| snapshots.push(s.clone()),
    )?;
    manifest.trial_wall_times.push(run.record.wall_time);

    let grid = Grid::new(config.grid.points)?;
    let hash = manifest.hash.clone();
    let mut out = OutDir::create(&c.out_dir)?;
    out.write("snapshots.csv", |w| {
        write_snapshots(w, &hash, &grid, &snapshots)
    })?;
    out.write("diagnostics.csv", |w| write_diagnostics(w, &hash, &run.log))?;
    out.write("trial.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &run.record)?;
        writeln!(w)
    })?;
    out.finish(manifest)?;

    let o = &run.record.outcome;
    println!(
        "{}",
        json!({
            "system_side": o.system_side,
            "meter_side": o.meter_side,
            "consistent": o.consistent,
            "meter_reading": o.meter_reading,
            "energy_drift": run.record.energy_drift,
            "out_dir": c.out_dir,
        })
    );
    match run.record.failure {
        Some(msg) => Err(Failure::Numerical(msg)),
        None => Ok(()),
    }
}

fn cmd_sweep(c: &Common) -> Result<(), Failure> {
    let config = load(c, "sweep")?;
    config.validate_sweep()?;
    config.model.validate_for_measurement()?;
    init_threads(c.threads)?;
    let mut manifest = RunManifest::new("sweep", &config, config.run.seed);
    let result = ensemble::sweep(
        &config,
        &config.sweep.alphas,
        config.sweep.trials,
        config.run.seed,
    )?;
    manifest.trial_wall_times = result.records.iter().map(|r| r.wall_time).collect();

    let mut out = OutDir::create(&c.out_dir)?;
    out.write("frequency.csv", |w| result.table.write_csv(w))?;
    out.write("trials.jsonl", |w| write_jsonl(&result.records, w))?;
    out.finish(manifest)?;

    let failed = result.records.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        log::warn!("{failed} trials failed numerically; counted as undecided");
    }
    if let Ok(d) = ensemble::born_deviation(&result.table) {
        println!(
            "{}",
            json!({ "born_deviation": d, "failed_trials": failed, "out_dir": c.out_dir })
        );
    }
    Ok(())
}

fn cmd_check(c: &Common) -> Result<(), Failure> {
    let config = load(c, "check")?;
    let draw = RandomDraw::generate(
        qring::init::trial_seed(config.run.seed, config.run.trial_index),
        config.model.n_apparatus,
        config.model.sigma,
    );
    let alpha = config.trigger.enabled.then_some(config.trigger.alpha);
    let state = ensemble::prepare(&config, alpha, &draw)?;
    let reports = regime_reports(&config, &state);
    let body = json!({
        "collective": reports.collective,
        "trigger": reports.trigger,
        "timescale": reports.timescale,
        "timescale_log_ratio": reports.timescale.log_ratio(),
        "warnings": reports.warnings(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&body).expect("reports serialize")
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprint!("{e}");
            return Failure::Config(e.kind().to_string()).report();
        }
    };
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Check(c) => cmd_check(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
