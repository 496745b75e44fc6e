use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use atm_core::anytime::{ClockMode, StopReason};
use atm_harness::{parse_rates, parse_seeds, run_scenario, sweep_failure_rates, Outputs, RunConfig, Scenario};

/// Anytime task-and-motion planner for inspection scenarios.
#[derive(Parser)]
#[command(name = "atm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and write its profile and policy tree.
    Plan(PlanArgs),
    /// Run a scenario over several failure rates and seeds.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Clock {
    /// Deterministic planner work units (1 unit = 1 microsecond).
    Work,
    Wall,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML. Alternatively give the three model files.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    workspace: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    /// Seconds on the selected clock.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    replan_bias: f64,
    #[arg(long, value_enum, default_value_t = Clock::Work)]
    clock: Clock,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    failure_rate: Option<f64>,
    #[arg(long, default_value = "profile.csv")]
    profile_out: PathBuf,
    #[arg(long, default_value = "tree.csv")]
    tree_out: PathBuf,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated failure rates.
    #[arg(long, default_value = "0.05,0.1,0.2")]
    rates: String,
    /// `1..5` or a comma-separated list.
    #[arg(long, default_value = "1..5")]
    seeds: String,
    #[arg(long, default_value = "sweep")]
    out_dir: PathBuf,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let files = [&self.domain, &self.problem, &self.workspace];
        match (&self.scenario, files) {
            (Some(path), [None, None, None]) => Scenario::load(path),
            (None, [Some(d), Some(p), Some(w)]) => Scenario::from_files(d, p, w),
            _ => bail!("give either --scenario or all of --domain, --problem and --workspace"),
        }
    }

    fn config(&self, seed: u64) -> RunConfig {
        RunConfig {
            threshold: self.threshold,
            seed,
            time_limit: self.time_limit.unwrap_or(f64::INFINITY),
            replan_bias: self.replan_bias,
            horizon: self.horizon,
            clock: match self.clock {
                Clock::Work => ClockMode::Work,
                Clock::Wall => ClockMode::Wall,
            },
            ..RunConfig::default()
        }
    }
}

fn plan(args: PlanArgs) -> Result<ExitCode> {
    let mut scenario = args.common.scenario()?;
    if let Some(f) = args.failure_rate {
        scenario = scenario.with_failure_rate(f);
        scenario.validate()?;
    }
    let outputs = Outputs { profile: args.profile_out, tree: args.tree_out, report: args.report_out };
    let run = run_scenario(&scenario, &args.common.config(args.seed), Some(&outputs))?;
    let r = &run.report;
    println!(
        "{}: proportion refined {:.4} after {:.6} s ({}), {} replans, {} backtracks",
        r.scenario, r.proportion_refined, r.seconds, r.stop, r.replans, r.backtracks
    );
    Ok(exit_code(run.result.stop))
}

/// 0 when the threshold is met; 2 when the run stopped short of it.
fn exit_code(stop: StopReason) -> ExitCode {
    match stop {
        StopReason::ThresholdReached => ExitCode::SUCCESS,
        StopReason::ResourceLimit | StopReason::QueueEmpty => ExitCode::from(2),
    }
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let scenario = args.common.scenario()?;
    let rates = parse_rates(&args.rates)?;
    let seeds = parse_seeds(&args.seeds)?;
    let sweep = sweep_failure_rates(&scenario, &rates, &seeds, &args.common.config(0), Some(&args.out_dir))?;
    let mut worst = ExitCode::SUCCESS;
    for run in &sweep.runs {
        match &run.outcome {
            Ok(r) => {
                println!(
                    "rate {} seed {}: {:.4} ({})",
                    run.failure_rate, run.seed, r.report.proportion_refined, r.report.stop
                );
                if r.result.stop != StopReason::ThresholdReached && worst == ExitCode::SUCCESS {
                    worst = ExitCode::from(2);
                }
            }
            Err(e) => {
                eprintln!("rate {} seed {}: error: {e}", run.failure_rate, run.seed);
                worst = ExitCode::FAILURE;
            }
        }
    }
    print!("{}", sweep.aggregate_csv());
    Ok(worst)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Plan(a) => plan(a),
        Command::Sweep(a) => sweep(a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
