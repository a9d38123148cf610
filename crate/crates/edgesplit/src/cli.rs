//! Command-line interface: generate fleets, optimize schedules, simulate
//! rounds and compare strategies.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 for unreadable or invalid
//! input files, 4 for solver or simulation failures.

use crate::cost;
use crate::profiles::{self, FleetProfile, ProfileError, SyntheticSpec};
use crate::sched::{self, SolveOptions, SolveReport};
use crate::sim::{self, Strategy};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Input(#[from] ProfileError),
    #[error("{0}")]
    Solver(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Solver(_) | CliError::Output { .. } => 4,
        }
    }
}

impl From<sched::SolveError> for CliError {
    fn from(err: sched::SolveError) -> Self {
        CliError::Solver(err.to_string())
    }
}

impl From<cost::CostError> for CliError {
    fn from(err: cost::CostError) -> Self {
        CliError::Solver(err.to_string())
    }
}

impl From<sim::SimError> for CliError {
    fn from(err: sim::SimError) -> Self {
        CliError::Solver(err.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Edgesplit,
    Splitfed,
    Fedavg,
    AdaptiveFl,
}

impl From<StrategyArg> for Strategy {
    fn from(arg: StrategyArg) -> Strategy {
        match arg {
            StrategyArg::Edgesplit => Strategy::EdgeSplit,
            StrategyArg::Splitfed => Strategy::SplitFed,
            StrategyArg::Fedavg => Strategy::FedAvg,
            StrategyArg::AdaptiveFl => Strategy::AdaptiveFl,
        }
    }
}

/// Split-learning schedule optimizer and round-time simulator.
#[derive(Debug, Parser)]
#[command(name = "edgesplit", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic heterogeneous fleet file.
    GenProfiles(GenProfilesArgs),
    /// Jointly optimize cut points and bandwidth shares for a fleet.
    Optimize(OptimizeArgs),
    /// Simulate one training round under a strategy.
    Simulate(SimulateArgs),
    /// Run all strategies and compare per-round makespans.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct GenProfilesArgs {
    /// Synthetic spec file; overrides every shape flag below.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Number of devices M.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    devices: u32,
    /// Device speed classes as core counts; a c-core device runs
    /// max_cores/c times slower than the fastest class.
    #[arg(long, default_value = "1,3,5,12", value_delimiter = ',')]
    classes: Vec<f64>,
    /// Number of feasible cut layers N.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    cuts: u32,
    /// Total bandwidth budget in bits/second.
    #[arg(long, default_value_t = 30_000_000.0)]
    bandwidth_bps: f64,
    /// Mini-batches per training round.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    batches: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the fleet file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    /// Fleet file to optimize.
    #[arg(long)]
    fleet: PathBuf,
    /// Override the fleet's bandwidth budget, bits/second.
    #[arg(long)]
    bandwidth_bps: Option<f64>,
    /// Override the fleet's batches per round.
    #[arg(long)]
    batches: Option<u64>,
    /// Iteration cap for the alternating solver.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    max_iters: u32,
    /// Also run the brute-force oracle and report the optimality gap.
    #[arg(long)]
    oracle: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
    /// Write output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    fleet: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Include the per-device event log.
    #[arg(long)]
    events: bool,
    #[arg(long)]
    bandwidth_bps: Option<f64>,
    #[arg(long)]
    batches: Option<u64>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    max_iters: u32,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    fleet: PathBuf,
    /// Strategies to compare; defaults to all four.
    #[arg(long, value_enum, value_delimiter = ',')]
    strategies: Vec<StrategyArg>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    rounds: u64,
    #[arg(long)]
    bandwidth_bps: Option<f64>,
    #[arg(long)]
    batches: Option<u64>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    max_iters: u32,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    pub fn run(self) -> Result<(), CliError> {
        match self.command {
            Command::GenProfiles(args) => cmd_gen_profiles(args),
            Command::Optimize(args) => cmd_optimize(args),
            Command::Simulate(args) => cmd_simulate(args),
            Command::Compare(args) => cmd_compare(args),
        }
    }
}

fn load_with_overrides(
    path: &Path,
    bandwidth_bps: Option<f64>,
    batches: Option<u64>,
) -> Result<FleetProfile, CliError> {
    let mut fleet = profiles::load_fleet(path)?;
    if let Some(b) = bandwidth_bps {
        if !(b.is_finite() && b > 0.0) {
            return Err(CliError::Usage(format!(
                "--bandwidth-bps must be > 0, got {b}"
            )));
        }
        fleet.total_bandwidth_bps = b;
    }
    if let Some(b) = batches {
        if b < 1 {
            return Err(CliError::Usage("--batches must be >= 1".into()));
        }
        fleet.batches_per_round = b;
    }
    Ok(fleet)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve_options(max_iters: u32) -> SolveOptions {
    SolveOptions {
        max_iterations: max_iters as usize,
        ..SolveOptions::default()
    }
}

fn cmd_gen_profiles(args: GenProfilesArgs) -> Result<(), CliError> {
    let spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str::<SyntheticSpec>(&text).map_err(ProfileError::Parse)?
        }
        None => {
            if args.classes.is_empty() || args.classes.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(CliError::Usage(
                    "--classes must be a non-empty list of positive core counts".into(),
                ));
            }
            let mut spec = SyntheticSpec::heterogeneous(
                args.devices as usize,
                &args.classes,
                args.cuts as usize,
            );
            spec.total_bandwidth_bps = args.bandwidth_bps;
            spec.batches_per_round = args.batches;
            spec
        }
    };
    let fleet = profiles::generate_fleet(&spec, args.seed)?;
    fleet.save(&args.out)?;
    println!(
        "wrote {}: M={} devices, N={} cuts, B={} bps, b={} batches/round, seed={}",
        args.out.display(),
        fleet.num_devices(),
        fleet.num_cuts(),
        fleet.total_bandwidth_bps,
        fleet.batches_per_round,
        args.seed
    );
    Ok(())
}

#[derive(Serialize)]
struct OracleSection {
    objective_s: f64,
    cuts: Vec<usize>,
    bandwidth_bps: Vec<f64>,
    /// (solver objective - oracle objective) / oracle objective.
    relative_gap: f64,
}

#[derive(Serialize)]
struct OptimizeOutput<'a> {
    #[serde(flatten)]
    report: &'a SolveReport,
    device_ids: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleSection>,
}

fn cmd_optimize(args: OptimizeArgs) -> Result<(), CliError> {
    let fleet = load_with_overrides(&args.fleet, args.bandwidth_bps, args.batches)?;
    let table = cost::build_cost_table(&fleet);
    let report = sched::solve(&table, fleet.total_bandwidth_bps, &solve_options(args.max_iters))?;

    let oracle = if args.oracle {
        let optimum = sched::brute_force_oracle(&table, fleet.total_bandwidth_bps)?;
        let relative_gap = if optimum.objective_s > 0.0 {
            (report.schedule.objective_s - optimum.objective_s) / optimum.objective_s
        } else {
            0.0
        };
        Some(OracleSection {
            objective_s: optimum.objective_s,
            cuts: optimum.cuts,
            bandwidth_bps: optimum.bandwidth_bps,
            relative_gap,
        })
    } else {
        None
    };

    let device_ids: Vec<String> = fleet.devices.iter().map(|d| d.device_id.clone()).collect();
    let output = OptimizeOutput {
        report: &report,
        device_ids,
        oracle,
    };

    let text = match args.format {
        OutputFormat::Json => to_json(&output),
        OutputFormat::Csv => {
            let mut out = String::from("device_id,cut,bandwidth_bps,objective_s\n");
            for (i, id) in output.device_ids.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    id,
                    report.schedule.cuts[i],
                    report.schedule.bandwidth_bps[i],
                    report.schedule.objective_s
                ));
            }
            out
        }
        OutputFormat::Table => {
            let mut out = String::new();
            out.push_str(&format!("objective_s: {:.6}\n", report.schedule.objective_s));
            out.push_str(&format!(
                "iterations: {} (terminated by {})\n",
                report.iterations,
                match report.terminated_by {
                    sched::Termination::NoImprovement => "no-improvement",
                    sched::Termination::IterationCap => "iteration-cap",
                }
            ));
            let trace: Vec<String> = report
                .objective_trace
                .iter()
                .map(|t| format!("{t:.6}"))
                .collect();
            out.push_str(&format!("trace: {}\n", trace.join(" ")));
            out.push_str(&format!("{:<16} {:>4} {:>18}\n", "device", "cut", "bandwidth_bps"));
            for (i, id) in output.device_ids.iter().enumerate() {
                out.push_str(&format!(
                    "{:<16} {:>4} {:>18.3}\n",
                    id, report.schedule.cuts[i], report.schedule.bandwidth_bps[i]
                ));
            }
            if let Some(oracle) = &output.oracle {
                out.push_str(&format!(
                    "oracle objective_s: {:.6} (cuts {:?}), relative gap: {:.3e}\n",
                    oracle.objective_s, oracle.cuts, oracle.relative_gap
                ));
            }
            out
        }
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let fleet = load_with_overrides(&args.fleet, args.bandwidth_bps, args.batches)?;
    let strategy: Strategy = args.strategy.into();
    let schedule = sim::resolve_strategy(&fleet, strategy, &solve_options(args.max_iters))?;
    let timeline = sim::simulate_round(&fleet, &schedule, strategy)?;
    let breakdown = sim::strategy_breakdown(&fleet, &schedule, strategy)?;

    let text = match args.format {
        OutputFormat::Json => to_json(&timeline),
        OutputFormat::Csv => breakdown.to_csv(),
        OutputFormat::Table => {
            let mut out = String::new();
            out.push_str(&format!("strategy: {strategy}\n"));
            out.push_str(&format!(
                "{:<16} {:>4} {:>18} {:>14}\n",
                "device", "cut", "bandwidth_bps", "completion_s"
            ));
            for (dev, &share) in timeline.devices.iter().zip(&schedule.bandwidth_bps) {
                out.push_str(&format!(
                    "{:<16} {:>4} {:>18.3} {:>14.6}\n",
                    dev.device_id, dev.cut, share, dev.completion_s
                ));
            }
            let rel = (timeline.makespan_s - timeline.analytic_makespan_s).abs()
                / timeline.analytic_makespan_s.max(1e-12);
            out.push_str(&format!("makespan_s: {:.6}\n", timeline.makespan_s));
            out.push_str(&format!(
                "analytic makespan_s: {:.6} (relative difference {:.3e})\n",
                timeline.analytic_makespan_s, rel
            ));
            if args.events {
                out.push_str(&format!(
                    "{:<16} {:>6} {:<18} {:>14} {:>14}\n",
                    "device", "batch", "event", "start_s", "end_s"
                ));
                for dev in &timeline.devices {
                    for ev in &dev.events {
                        let batch = ev
                            .batch
                            .map(|b| b.to_string())
                            .unwrap_or_else(|| "-".to_string());
                        out.push_str(&format!(
                            "{:<16} {:>6} {:<18} {:>14.6} {:>14.6}\n",
                            dev.device_id, batch, ev.kind.to_string(), ev.start_s, ev.end_s
                        ));
                    }
                }
            }
            out
        }
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let fleet = load_with_overrides(&args.fleet, args.bandwidth_bps, args.batches)?;
    let strategies: Vec<Strategy> = if args.strategies.is_empty() {
        Strategy::ALL.to_vec()
    } else {
        args.strategies.iter().map(|&s| s.into()).collect()
    };
    let report = sim::run_experiment(
        &fleet,
        &strategies,
        args.rounds,
        &solve_options(args.max_iters),
    )?;

    let text = match args.format {
        OutputFormat::Json => to_json(&report),
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Table => {
            let mut out = String::new();
            out.push_str(&format!(
                "{:<12} {:>14} {:>14}  {}\n",
                "strategy", "makespan_s", "acceleration", "best partition points"
            ));
            for run in &report.runs {
                let cuts: Vec<String> = run.cuts.iter().map(|c| c.to_string()).collect();
                out.push_str(&format!(
                    "{:<12} {:>14.6} {:>13.2}x  [{}]\n",
                    run.strategy.to_string(),
                    run.mean_makespan_s,
                    run.acceleration_vs_fedavg,
                    cuts.join(",")
                ));
            }
            out
        }
    };
    emit(args.out.as_deref(), &text)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
