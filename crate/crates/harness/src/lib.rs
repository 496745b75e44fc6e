//! Scenario files, single planner runs, failure-rate sweeps and the files
//! they leave behind.
//!
//! A scenario is a small TOML file naming a domain, a problem and a
//! workspace, plus the battery model and generator budgets:
//!
//! ```toml
//! domain = "hangar.sdom"
//! problem = "hangar.sprob"
//! workspace = "hangar.wspc"
//! failure_rate = 0.05
//! envelope_half_width = 5.0
//!
//! [budgets]
//! move = 10
//!
//! [battery]
//! capacity = 400.0
//! ```
//!
//! Relative paths resolve against the scenario file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use atm_core::abstraction::{AbstractModel, BatteryFlag, Retained};
use atm_core::anytime::{
    atm_mdp_solve, profile_csv, AnytimeConfig, AnytimeResult, ClockMode, ConcreteContext, ProfileSample,
    RefineEventKind, StopReason, DEFAULT_BUDGET,
};
use atm_core::geom::{parse_workspace, BatteryModel, Pose, Workspace};
use atm_core::lang::{parse_domain, parse_problem, parse_rational, Domain, Problem};
use atm_core::ssp::FailureKind;

/// Fractions of a run's total time at which sweeps report coverage.
pub const TIME_FRACTIONS: [f64; 4] = [0.1, 0.2, 0.4, 1.0];

/// Directory holding the shipped hangar scenario.
pub fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn shipped_scenario() -> PathBuf {
    scenarios_dir().join("hangar.toml")
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    domain: PathBuf,
    problem: PathBuf,
    workspace: PathBuf,
    #[serde(default)]
    failure_rate: Option<f64>,
    #[serde(default = "default_half_width")]
    envelope_half_width: f64,
    #[serde(default = "default_budget")]
    default_budget: usize,
    #[serde(default)]
    budgets: BTreeMap<String, usize>,
    #[serde(default)]
    battery: BatterySpec,
}

fn default_half_width() -> f64 {
    2.0
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatterySpec {
    pub cost_per_meter: f64,
    pub inspect_overhead: f64,
    pub capacity: f64,
    pub reserve: f64,
    pub flag_threshold: f64,
    /// Charge at the start; falls back to the problem's initial
    /// `batteryLevel`, then to `capacity`.
    pub initial: Option<f64>,
    pub fluent: String,
}

impl Default for BatterySpec {
    fn default() -> Self {
        let m = BatteryModel::default();
        BatterySpec {
            cost_per_meter: m.cost_per_meter,
            inspect_overhead: m.inspect_overhead,
            capacity: m.capacity,
            reserve: m.reserve,
            flag_threshold: m.reserve,
            initial: None,
            fluent: "batteryLevel".into(),
        }
    }
}

impl BatterySpec {
    pub fn model(&self) -> BatteryModel {
        BatteryModel {
            cost_per_meter: self.cost_per_meter,
            inspect_overhead: self.inspect_overhead,
            capacity: self.capacity,
            reserve: self.reserve,
        }
    }
}

/// A loaded, validated scenario. The domain keeps the probabilities it was
/// written with; `failure_rate`, when set, replaces them at model build time.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub domain: Domain,
    pub problem: Problem,
    pub workspace: Workspace,
    pub failure_rate: Option<f64>,
    pub envelope_half_width: f64,
    pub default_budget: usize,
    pub budgets: BTreeMap<String, usize>,
    pub battery: BatterySpec,
    pub start: Option<Pose>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = read(path)?;
        let file: ScenarioFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut s = Scenario::from_files(
            &base.join(&file.domain),
            &base.join(&file.problem),
            &base.join(&file.workspace),
        )
        .with_context(|| format!("loading scenario {}", path.display()))?;
        s.name = path.file_stem().map_or("scenario".into(), |n| n.to_string_lossy().into_owned());
        s.failure_rate = file.failure_rate;
        s.envelope_half_width = file.envelope_half_width;
        s.default_budget = file.default_budget;
        s.budgets = file.budgets;
        s.battery = file.battery;
        s.validate()?;
        Ok(s)
    }

    /// Builds a scenario straight from the three model files with default
    /// battery, budget and envelope settings.
    pub fn from_files(domain: &Path, problem: &Path, workspace: &Path) -> Result<Scenario> {
        let d = parse_domain(&read(domain)?).with_context(|| format!("in {}", domain.display()))?;
        let p = parse_problem(&read(problem)?, &d).with_context(|| format!("in {}", problem.display()))?;
        let w = parse_workspace(&read(workspace)?).with_context(|| format!("in {}", workspace.display()))?;
        let s = Scenario {
            name: p.name.clone(),
            domain: d,
            problem: p,
            workspace: w,
            failure_rate: None,
            envelope_half_width: default_half_width(),
            default_budget: DEFAULT_BUDGET,
            budgets: BTreeMap::new(),
            battery: BatterySpec::default(),
            start: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.failure_rate {
            ensure!(f > 0.0 && f < 1.0, "failure rate {f} outside (0, 1)");
        }
        ensure!(
            self.envelope_half_width.is_finite() && self.envelope_half_width > 0.0,
            "envelope half-width must be positive"
        );
        ensure!(self.default_budget > 0, "generator budgets must be positive");
        if let Some((name, _)) = self.budgets.iter().find(|(_, b)| **b == 0) {
            bail!("generator budget for `{name}` must be positive");
        }
        for name in self.budgets.keys() {
            ensure!(self.domain.action(name).is_some(), "budget for unknown action `{name}`");
        }
        self.battery.model().validate()?;
        Ok(())
    }

    pub fn with_failure_rate(&self, rate: f64) -> Scenario {
        Scenario { failure_rate: Some(rate), ..self.clone() }
    }

    pub fn initial_battery(&self) -> f64 {
        self.battery
            .initial
            .or_else(|| self.problem.numeric_init.get(&self.battery.fluent).copied())
            .unwrap_or(self.battery.capacity)
    }

    /// The abstract model, with the failure rate applied and the horizon
    /// optionally overridden.
    pub fn model(&self, horizon: Option<usize>) -> Result<AbstractModel> {
        let domain = match self.failure_rate {
            Some(f) => {
                let exact = parse_rational(&format!("{f}")).with_context(|| format!("failure rate {f}"))?;
                self.domain.with_failure_rate(&exact)
            }
            None => self.domain.clone(),
        };
        let mut problem = self.problem.clone();
        if let Some(h) = horizon {
            problem.horizon = h;
        }
        problem.numeric_init.insert(self.battery.fluent.clone(), self.initial_battery());
        let flag = BatteryFlag {
            fluent: self.battery.fluent.clone(),
            threshold: self.battery.flag_threshold,
        };
        Ok(AbstractModel::new(&domain, &problem, Retained::all_discrete(&domain, Some(flag)))?)
    }

    pub fn context(&self) -> Result<ConcreteContext> {
        let mut ctx = ConcreteContext::new(self.workspace.clone(), self.battery.model())?;
        ctx.initial_battery = self.initial_battery();
        ctx.envelope_half_width = self.envelope_half_width;
        ctx.default_budget = self.default_budget;
        ctx.budgets = self.budgets.clone();
        if let Some(p) = self.start {
            ctx.start = p;
        }
        Ok(ctx)
    }
}

/// Planner settings for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub threshold: f64,
    pub seed: u64,
    pub time_limit: f64,
    pub replan_bias: f64,
    pub horizon: Option<usize>,
    pub backtrack_cap: usize,
    pub clock: ClockMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        let a = AnytimeConfig::default();
        RunConfig {
            threshold: a.threshold,
            seed: a.seed,
            time_limit: a.time_limit,
            replan_bias: a.replan_bias,
            horizon: None,
            backtrack_cap: a.backtrack_cap,
            clock: a.clock,
        }
    }
}

impl RunConfig {
    pub fn anytime(&self) -> AnytimeConfig {
        AnytimeConfig {
            threshold: self.threshold,
            replan_bias: self.replan_bias,
            time_limit: self.time_limit,
            seed: self.seed,
            backtrack_cap: self.backtrack_cap,
            clock: self.clock,
            ..AnytimeConfig::default()
        }
    }
}

/// One line of the per-path refinement log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub leaf: usize,
    pub t_seconds: f64,
    pub outcome: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub failure_rate: Option<f64>,
    pub seed: u64,
    pub threshold: f64,
    pub stop: String,
    pub proportion_refined: f64,
    /// Seconds on the run's clock, unrolling included.
    pub seconds: f64,
    pub wall_seconds: f64,
    pub work_units: u64,
    pub replans: usize,
    pub backtracks: usize,
    pub leaves: usize,
    pub dead_ends: usize,
    pub profile_path: Option<PathBuf>,
    pub tree_path: Option<PathBuf>,
    pub log: Vec<LogEntry>,
}

pub fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::ThresholdReached => "thresholdReached",
        StopReason::QueueEmpty => "queueEmpty",
        StopReason::ResourceLimit => "resourceLimit",
    }
}

fn describe(kind: &RefineEventKind) -> String {
    match kind {
        RefineEventKind::Success => "success".into(),
        RefineEventKind::Backtrack { to } => format!("backtrack to {to}"),
        RefineEventKind::Replan { at, kind, forced } => {
            let why = match kind {
                FailureKind::InsufficientBattery { deficit } => format!("insufficientBattery {deficit:.3}"),
                FailureKind::NoCollisionFreePath { action } => format!("noCollisionFreePath {action}"),
            };
            let forced = if *forced { " forced" } else { "" };
            format!("replan at {at} ({why}){forced}")
        }
        RefineEventKind::Interrupted => "interrupted".into(),
    }
}

/// A finished run: the planner's result and its report.
#[derive(Clone, Debug)]
pub struct Run {
    pub result: AnytimeResult,
    pub report: RunReport,
}

/// Where a run writes its artifacts.
#[derive(Clone, Debug)]
pub struct Outputs {
    pub profile: PathBuf,
    pub tree: PathBuf,
    pub report: Option<PathBuf>,
}

impl Outputs {
    /// `<stem>.profile.csv`, `<stem>.tree.csv` and `<stem>.report.json` in `dir`.
    pub fn in_dir(dir: &Path, stem: &str) -> Outputs {
        Outputs {
            profile: dir.join(format!("{stem}.profile.csv")),
            tree: dir.join(format!("{stem}.tree.csv")),
            report: Some(dir.join(format!("{stem}.report.json"))),
        }
    }
}

/// Writes via a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("writing {}", path.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Solves and refines one scenario. The clock starts before the abstract
/// model is solved, so unrolling counts toward the reported time.
pub fn run_scenario(scenario: &Scenario, config: &RunConfig, outputs: Option<&Outputs>) -> Result<Run> {
    let model = scenario.model(config.horizon)?;
    let ctx = scenario.context()?;
    let result = atm_mdp_solve(&model, &ctx, &config.anytime())
        .with_context(|| format!("planning scenario {} (seed {})", scenario.name, config.seed))?;
    let tree = &result.tree;
    let leaves = tree.leaves();
    let mut report = RunReport {
        scenario: scenario.name.clone(),
        failure_rate: scenario.failure_rate,
        seed: config.seed,
        threshold: config.threshold,
        stop: stop_name(result.stop).into(),
        proportion_refined: result.proportion_refined(),
        seconds: result.profile.last().map_or(0.0, |s| s.t_seconds),
        wall_seconds: result.wall_seconds,
        work_units: result.work_units,
        replans: result.replans(),
        backtracks: result.backtracks(),
        dead_ends: leaves.iter().filter(|l| tree.node(**l).dead_end).count(),
        leaves: leaves.len(),
        profile_path: None,
        tree_path: None,
        log: result
            .events
            .iter()
            .map(|e| LogEntry {
                iteration: e.iteration,
                leaf: e.leaf,
                t_seconds: e.t_seconds,
                outcome: describe(&e.kind),
            })
            .collect(),
    };
    if let Some(out) = outputs {
        write_atomic(&out.profile, profile_csv(&result.profile).as_bytes())?;
        write_atomic(&out.tree, result.tree.serialize().as_bytes())?;
        report.profile_path = Some(out.profile.clone());
        report.tree_path = Some(out.tree.clone());
        if let Some(path) = &out.report {
            write_atomic(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
        }
    }
    Ok(Run { result, report })
}

/// Refined proportion at `fraction` of the profile's final time: the last
/// sample taken no later than that.
pub fn proportion_at(profile: &[ProfileSample], fraction: f64) -> f64 {
    let Some(last) = profile.last() else { return 0.0 };
    let cutoff = fraction * last.t_seconds;
    profile
        .iter()
        .take_while(|s| s.t_seconds <= cutoff + 1e-12)
        .last()
        .map_or(0.0, |s| s.proportion_refined)
}

#[derive(Debug)]
pub struct SweepRun {
    pub failure_rate: f64,
    pub seed: u64,
    /// Failed runs keep their error so the others survive.
    pub outcome: Result<Run, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub failure_rate: f64,
    pub time_fraction: f64,
    pub mean_proportion_refined: f64,
    pub runs: usize,
}

#[derive(Debug)]
pub struct Sweep {
    pub runs: Vec<SweepRun>,
    pub aggregate: Vec<AggregateRow>,
}

impl Sweep {
    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("failure_rate,time_fraction,mean_proportion_refined,runs\n");
        for r in &self.aggregate {
            out.push_str(&format!(
                "{},{},{:.6},{}\n",
                r.failure_rate, r.time_fraction, r.mean_proportion_refined, r.runs
            ));
        }
        out
    }

    pub fn mean_at(&self, rate: f64, fraction: f64) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|r| r.failure_rate == rate && r.time_fraction == fraction)
            .map(|r| r.mean_proportion_refined)
    }
}

/// Stem for the files of one sweep run.
pub fn run_stem(rate: f64, seed: u64) -> String {
    format!("rate{rate}_seed{seed}")
}

/// Runs every (rate, seed) pair in parallel and averages the refined
/// proportion at each of [`TIME_FRACTIONS`]. With `out_dir`, every run's
/// artifacts and `aggregate.csv` are written there.
pub fn sweep_failure_rates(
    base: &Scenario,
    rates: &[f64],
    seeds: &[u64],
    config: &RunConfig,
    out_dir: Option<&Path>,
) -> Result<Sweep> {
    ensure!(!rates.is_empty(), "no failure rates given");
    ensure!(!seeds.is_empty(), "no seeds given");
    let jobs: Vec<(f64, u64)> = rates.iter().flat_map(|r| seeds.iter().map(move |s| (*r, *s))).collect();
    let runs: Vec<SweepRun> = jobs
        .par_iter()
        .map(|&(rate, seed)| {
            let scenario = base.with_failure_rate(rate);
            let cfg = RunConfig { seed, ..config.clone() };
            let outputs = out_dir.map(|d| Outputs::in_dir(d, &run_stem(rate, seed)));
            let outcome = scenario
                .validate()
                .and_then(|_| run_scenario(&scenario, &cfg, outputs.as_ref()))
                .map_err(|e| format!("{e:#}"));
            SweepRun { failure_rate: rate, seed, outcome }
        })
        .collect();
    let mut aggregate = Vec::new();
    for &rate in rates {
        let profiles: Vec<&[ProfileSample]> = runs
            .iter()
            .filter(|r| r.failure_rate == rate)
            .filter_map(|r| r.outcome.as_ref().ok())
            .map(|r| r.result.profile.as_slice())
            .collect();
        for &fraction in &TIME_FRACTIONS {
            let mean = if profiles.is_empty() {
                f64::NAN
            } else {
                profiles.iter().map(|p| proportion_at(p, fraction)).sum::<f64>() / profiles.len() as f64
            };
            aggregate.push(AggregateRow {
                failure_rate: rate,
                time_fraction: fraction,
                mean_proportion_refined: mean,
                runs: profiles.len(),
            });
        }
    }
    let sweep = Sweep { runs, aggregate };
    if let Some(dir) = out_dir {
        write_atomic(&dir.join("aggregate.csv"), sweep.aggregate_csv().as_bytes())?;
    }
    Ok(sweep)
}

/// Parses `1..5` (inclusive), `1,2,7` or a single seed.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range `{text}`"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad seed range `{text}`"))?;
        ensure!(a <= b, "empty seed range `{text}`");
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed `{s}`")))
        .collect()
}

pub fn parse_rates(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let r: f64 = s.trim().parse().with_context(|| format!("bad failure rate `{s}`"))?;
            ensure!(r > 0.0 && r < 1.0, "failure rate {r} outside (0, 1)");
            Ok(r)
        })
        .collect()
}
