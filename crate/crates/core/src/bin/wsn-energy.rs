use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wsn_energy::energy::ConstituentMask;
use wsn_energy::io;
use wsn_energy::pipeline::{self, FitOptions};
use wsn_energy::policy::select_tasks;
use wsn_energy::sim;
use wsn_energy::{Error, Result, ScenarioConfig};

/// Constituent energy modeling for wireless sensor networks.
#[derive(Parser)]
#[command(name = "wsn-energy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded scenario and write its slice trace.
    Simulate(SimulateArgs),
    /// Fit constituent coefficients to a trace or sweep file and write a report.
    Fit(FitArgs),
    /// Run seeded scenarios over sampled parameters and write one row per run.
    Sweep(SweepArgs),
    /// Select and order tasks under a battery budget.
    Budget(BudgetArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario TOML; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace CSV to write.
    #[arg(long)]
    output: PathBuf,
    /// Overrides sim.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    /// Trace or sweep CSV.
    #[arg(long)]
    input: PathBuf,
    /// Report CSV to write.
    #[arg(long)]
    output: PathBuf,
    /// Constituents to fit: "core", "all", or a comma list.
    #[arg(long, default_value = "core")]
    mask: ConstituentMask,
    /// Also fit every window of this many consecutive rows.
    #[arg(long)]
    window: Option<usize>,
    /// Leading fraction of rows used for fitting; the rest are held out.
    #[arg(long, default_value_t = 1.0)]
    train_fraction: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario TOML with a [sweep] section; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Observation CSV to write.
    #[arg(long)]
    output: PathBuf,
    /// Master seed; overrides sweep.seed. A sweep needs one of the two.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides sweep.runs.
    #[arg(long)]
    runs: Option<u32>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Task list TOML.
    #[arg(long)]
    input: PathBuf,
    /// Fitted model: a report written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Residual battery in joules; overrides the task file.
    #[arg(long)]
    battery: Option<f64>,
    /// Schedule CSV to write.
    #[arg(long)]
    output: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::from_path(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    let out = sim::run(&cfg)?;
    io::write_trace(&out.trace, create(&args.output)?)?;
    let alive = out.trace.records.last().map_or(0, |r| r.alive_nodes);
    println!("seed: {}", cfg.sim.seed);
    println!("slices: {}", out.trace.len());
    println!("energy_j: {}", out.trace.total_energy());
    println!("alive_nodes: {alive}");
    println!("delivered: {}", out.delivered());
    println!("dropped: {}", out.dropped());
    Ok(ExitCode::SUCCESS)
}

fn fit(args: &FitArgs) -> Result<ExitCode> {
    let file = fs::File::open(&args.input).map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
    let obs = io::read_observations(file, args.mask)?;
    let opts = FitOptions {
        mask: args.mask,
        train_fraction: args.train_fraction,
        window: args.window,
    };
    let report = pipeline::fit_observations(&obs, &opts)?;
    io::write_report(&report, create(&args.output)?)?;
    for c in args.mask.active() {
        println!(
            "alpha_{}: {} (share {})",
            c.name(),
            report.fit.coefficients.alpha[c.index()],
            report.shares[c.index()]
        );
    }
    println!("mape_pct: {}", report.errors.mape_pct);
    println!("max_pct_error: {}", report.errors.max_ape_pct);
    println!("dominant_constituent: {}", report.dominant.name());
    for w in &report.fit.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(r) = &report.rolling {
        println!("windows: {} fitted, {} skipped", r.fits.len(), r.skipped.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: &SweepArgs) -> Result<ExitCode> {
    let cfg = load_config(args.config.as_deref())?;
    let seed = args
        .seed
        .or(cfg.sweep.seed)
        .ok_or_else(|| Error::Parse("a sweep needs a master seed: pass --seed or set sweep.seed".into()))?;
    let runs = args.runs.unwrap_or(cfg.sweep.runs);
    let rows = pipeline::sweep(&cfg, seed, runs)?;
    let params: Vec<String> = cfg.sweep.ranges.keys().cloned().collect();
    io::write_observations(&rows, &params, create(&args.output)?)?;
    println!("seed: {seed}");
    println!("runs: {}", rows.len());
    println!("energy_j: {}", rows.iter().map(|r| r.energy_j).sum::<f64>());
    Ok(ExitCode::SUCCESS)
}

fn budget(args: &BudgetArgs) -> Result<ExitCode> {
    let tasks = io::TaskFile::from_path(&args.input)?;
    let model = io::read_model_file(&args.model)?;
    let problem = tasks.problem(model, args.battery)?;
    let schedule = select_tasks(&problem)?;
    io::write_schedule(&schedule, problem.battery, create(&args.output)?)?;
    let r = &schedule.report;
    println!("feasible: {}", r.feasible);
    println!("selected: {}", schedule.order.len());
    println!("total_cost_j: {}", r.total_cost);
    println!("total_importance: {}", r.total_importance);
    if r.feasible {
        return Ok(ExitCode::SUCCESS);
    }
    for f in &r.failures {
        eprintln!("infeasible: constraint {} cannot be met", f.constraint());
    }
    Ok(ExitCode::from(2))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Sweep(a) => sweep(a),
        Command::Budget(a) => budget(a),
    };
    match result {
        Ok(code) => {
            let _ = std::io::stdout().flush();
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
