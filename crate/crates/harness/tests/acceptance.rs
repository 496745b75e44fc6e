//! Acceptance suite. Runs as a plain binary so that every criterion prints a
//! verdict line; the process fails if any criterion does.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use atm_core::abstraction::AbstractState;
use atm_core::anytime::{
    estimate_path_costs, greedy_schedule, AnytimeResult, Clock, ClockMode, PartialTraj, QueueEntry, RefineOutcome,
    Refiner,
};
use atm_core::geom::{collision_free, parse_workspace, Pose, Workspace};
use atm_core::lang::GroundedFact;
use atm_core::ssp::{
    build_ssp, extract_policy_tree, solve, FailureKind, PolicyTree, SspAction, SspInstance, Transition,
    DEFAULT_STATE_CAP,
};
use atm_harness::{run_stem, shipped_scenario, sweep_failure_rates, RunConfig, Scenario, Sweep};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn check(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// Random SSPs and an exact expectimax oracle.

fn fact_state(i: usize) -> AbstractState {
    AbstractState::new([GroundedFact::new("s", &[&i.to_string()])])
}

fn random_ssp(rng: &mut ChaCha8Rng) -> SspInstance {
    let n = rng.gen_range(2..=200);
    let k = rng.gen_range(1..=6);
    let horizon = rng.gen_range(1..=5);
    let actions: Vec<SspAction> = (0..k)
        .map(|id| SspAction { id, name: format!("a{id}"), args: vec![], cost: rng.gen_range(1..=5) as f64 })
        .collect();
    let goal: Vec<bool> = (0..n).map(|s| s != 0 && rng.gen_bool(0.15)).collect();
    let mut transitions = vec![Vec::new(); n];
    for s in (0..n).filter(|s| !goal[*s]) {
        let first = rng.gen_range(0..k);
        for a in 0..k {
            if a != first && !rng.gen_bool(0.6) {
                continue;
            }
            let m = rng.gen_range(1..=3.min(n));
            let mut targets: Vec<usize> = Vec::new();
            while targets.len() < m {
                let t = rng.gen_range(0..n);
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            let weights: Vec<i64> = targets.iter().map(|_| rng.gen_range(1..=9)).collect();
            let total: i64 = weights.iter().sum();
            let outcomes = targets
                .iter()
                .zip(&weights)
                .map(|(t, w)| (BigRational::new(BigInt::from(*w), BigInt::from(total)), *t))
                .collect();
            transitions[s].push(Transition::new(a, outcomes));
        }
    }
    let reward = goal.iter().map(|g| if *g { 0.0 } else { -1.0 }).collect();
    let ssp = SspInstance {
        states: (0..n).map(fact_state).collect(),
        actions,
        transitions,
        goal,
        reward,
        horizon,
        initial: 0,
    };
    ssp.validate().expect("generated SSP is well formed");
    ssp
}

/// Exact value over explicit recursion on (state, steps to go). `None`
/// stands for negative infinity.
fn expectimax(
    ssp: &SspInstance,
    s: usize,
    i: usize,
    memo: &mut HashMap<(usize, usize), Option<BigRational>>,
) -> Option<BigRational> {
    if ssp.goal[s] {
        return Some(BigRational::zero());
    }
    if i == 0 {
        return Some(-BigRational::one());
    }
    if let Some(v) = memo.get(&(s, i)) {
        return v.clone();
    }
    let mut best: Option<BigRational> = None;
    for t in &ssp.transitions[s] {
        let mut q = Some(-BigRational::from_integer(BigInt::from(ssp.actions[t.action].cost as i64)));
        for (p, next) in &t.outcomes {
            q = match (q, expectimax(ssp, *next, i - 1, memo)) {
                (Some(acc), Some(v)) => Some(acc + p * v),
                _ => None,
            };
        }
        if let Some(q) = q {
            if best.as_ref().is_none_or(|b| q > *b) {
                best = Some(q);
            }
        }
    }
    memo.insert((s, i), best.clone());
    best
}

fn random_ssps() -> Vec<SspInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..50).map(|_| random_ssp(&mut rng)).collect()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (idx, ssp) in random_ssps().iter().enumerate() {
        let v = solve(ssp);
        let mut memo = HashMap::new();
        for i in 0..=ssp.horizon {
            for s in 0..ssp.states.len() {
                let got = v.get(s, i);
                match expectimax(ssp, s, i, &mut memo) {
                    None if got == f64::NEG_INFINITY => {}
                    None => return Err(format!("ssp {idx}: state {s} at {i} should be -inf, got {got}")),
                    Some(exact) => {
                        let exact: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
                        let err = (got - exact).abs();
                        if err > 1e-12 {
                            return Err(format!("ssp {idx}: state {s} at {i}: {got} vs {exact}"));
                        }
                        worst = worst.max(err);
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(10),
        format!("50 SSPs, max error {worst:.1e}, {:.2} s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------

fn conservation(tree: &PolicyTree) -> Result<(), String> {
    let mut leaf_mass = 0.0;
    for id in tree.live_nodes() {
        let n = tree.node(id);
        if n.is_leaf() {
            leaf_mass += num_traits::ToPrimitive::to_f64(&n.path_probability).unwrap();
            continue;
        }
        let sum = n
            .children
            .iter()
            .fold(BigRational::zero(), |acc, c| acc + &tree.node(*c).outcome_probability);
        if !sum.is_one() {
            return Err(format!("children of node {id} sum to {sum}"));
        }
    }
    if (leaf_mass - 1.0).abs() > 1e-9 {
        return Err(format!("leaf mass {leaf_mass}"));
    }
    Ok(())
}

fn criterion_2() -> Check {
    let mut trees = 0;
    for ssp in random_ssps() {
        let tree = extract_policy_tree(&ssp, &solve(&ssp)).map_err(|e| e.to_string())?;
        conservation(&tree)?;
        trees += 1;
    }
    let base = Scenario::load(&shipped_scenario()).map_err(|e| format!("{e:#}"))?;
    for rate in [0.05, 0.1, 0.2] {
        let model = base.with_failure_rate(rate).model(None).map_err(|e| format!("{e:#}"))?;
        let ssp = build_ssp(&model, model.initial.clone(), model.problem.horizon, &Default::default(), DEFAULT_STATE_CAP)
            .map_err(|e| e.to_string())?;
        conservation(&extract_policy_tree(&ssp, &solve(&ssp)).map_err(|e| e.to_string())?)?;
        trees += 1;
    }
    // Trees after replanning splices.
    for run in &sweep().1.runs {
        let r = run.outcome.as_ref().map_err(|e| e.clone())?;
        conservation(&r.result.tree)?;
        trees += 1;
    }
    Ok(format!("{trees} trees conserve probability"))
}

// ---------------------------------------------------------------------------

fn knapsack(entries: &[QueueEntry], budget: f64) -> f64 {
    let mut best = 0.0f64;
    for mask in 0u32..1 << entries.len() {
        let (mut c, mut p) = (0.0, 0.0);
        for (i, e) in entries.iter().enumerate() {
            if mask >> i & 1 == 1 {
                c += e.c;
                p += e.p;
            }
        }
        if c <= budget + 1e-9 {
            best = best.max(p);
        }
    }
    best
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = f64::INFINITY;
    let mut budgets = 0;
    for instance in 0..100 {
        let n = rng.gen_range(1..=12);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let entries: Vec<QueueEntry> = raw
            .iter()
            .enumerate()
            .map(|(leaf, p)| QueueEntry { leaf, p: p / total, c: rng.gen_range(1.0..100.0) })
            .collect();
        for (t, covered) in greedy_schedule(&entries) {
            let opt = knapsack(&entries, t);
            budgets += 1;
            worst = worst.min(covered / opt);
            if covered + 1e-12 < 0.5 * opt {
                return Err(format!("instance {instance}, budget {t}: greedy {covered} vs optimum {opt}"));
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(30),
        format!(
            "{budgets} prefix budgets, worst greedy/optimum ratio {worst:.3}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// The shared sweep used by criteria 2, 4, 7 and 8.

const RATES: [f64; 3] = [0.05, 0.1, 0.2];
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn sweep_config() -> RunConfig {
    RunConfig { threshold: 0.99, ..RunConfig::default() }
}

fn run_sweep() -> (TempDir, Sweep) {
    let base = Scenario::load(&shipped_scenario()).expect("shipped scenario");
    let dir = tempfile::tempdir().expect("temp dir");
    let sweep = sweep_failure_rates(&base, &RATES, &SEEDS, &sweep_config(), Some(dir.path())).expect("sweep");
    (dir, sweep)
}

fn sweep() -> &'static (TempDir, Sweep) {
    static SWEEP: OnceLock<(TempDir, Sweep)> = OnceLock::new();
    SWEEP.get_or_init(run_sweep)
}

fn results() -> Result<Vec<(f64, u64, &'static AnytimeResult)>, String> {
    sweep()
        .1
        .runs
        .iter()
        .map(|r| match &r.outcome {
            Ok(run) => Ok((r.failure_rate, r.seed, &run.result)),
            Err(e) => Err(format!("rate {} seed {}: {e}", r.failure_rate, r.seed)),
        })
        .collect()
}

fn criterion_4() -> Check {
    for (rate, seed, r) in results()? {
        for w in r.profile.windows(2) {
            if w[1].proportion_refined < w[0].proportion_refined || w[1].t_seconds <= w[0].t_seconds {
                return Err(format!("rate {rate} seed {seed}: profile not monotone at t={}", w[1].t_seconds));
            }
        }
    }
    let s = &sweep().1;
    let at = |rate| s.mean_at(rate, 0.4).unwrap_or(f64::NAN);
    let (low, mid, high) = (at(0.05), at(0.1), at(0.2));
    check(
        high >= 0.75,
        format!("profiles monotone; mean at 40% of runtime: 5% {low:.3}, 10% {mid:.3}, 20% {high:.3} (need >= 0.75)"),
    )
}

// ---------------------------------------------------------------------------

fn cheapest_direct_inspection(s: &Scenario, regions: &[&str]) -> f64 {
    // Straight-line lower bound: fly to the nearest point of the inspection
    // region, then pay at least the fixed inspection overhead.
    let start = s.context().unwrap().start;
    regions
        .iter()
        .map(|region| {
            let r = s.workspace.region(region).unwrap();
            let (min, max) = r.polygon.iter().fold(
                (Pose::new(f64::INFINITY, f64::INFINITY), Pose::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
                |(lo, hi), p| (Pose::new(lo.x.min(p.x), lo.y.min(p.y)), Pose::new(hi.x.max(p.x), hi.y.max(p.y))),
            );
            let nearest = Pose::new(start.x.clamp(min.x, max.x), start.y.clamp(min.y, max.y));
            s.battery.cost_per_meter * start.distance(&nearest) + s.battery.inspect_overhead
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion_5() -> Check {
    let started = Instant::now();
    let mut s = Scenario::load(&shipped_scenario()).map_err(|e| format!("{e:#}"))?;
    let bound = cheapest_direct_inspection(&s, &["NearLeftWing", "NearRightWing"]);
    s.battery.initial = Some(30.0);
    if 30.0 >= bound {
        return Err(format!("initial charge 30 is not below the cheapest inspection bound {bound:.2}"));
    }
    let cfg = RunConfig { threshold: 0.9, seed: 3, ..RunConfig::default() };
    let run = atm_harness::run_scenario(&s, &cfg, None).map_err(|e| format!("{e:#}"))?;
    let r = &run.result;
    let battery_replans: Vec<usize> = r
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            atm_core::anytime::RefineEventKind::Replan { at, kind: FailureKind::InsufficientBattery { .. }, .. } => {
                Some(*at)
            }
            _ => None,
        })
        .collect();
    let Some(&at) = battery_replans.first() else {
        return Err("no insufficientBattery replan".into());
    };
    let dock = GroundedFact::new("at", &["Dock"]);
    let mut spliced = r.tree.descendants(at);
    spliced.push(at);
    let via_dock = spliced.iter().any(|n| {
        let node = r.tree.node(*n);
        node.action_label.as_deref().is_some_and(|l| l.starts_with("recharge")) && node.state.holds(&dock)
    });
    let elapsed = started.elapsed();
    check(
        via_dock && run.report.proportion_refined >= cfg.threshold && elapsed < Duration::from_secs(60),
        format!(
            "charge 30 < bound {bound:.2}; {} battery replans, first at node {at} recharges at the dock: {via_dock}; \
             refined {:.3}; {:.2} s",
            battery_replans.len(),
            run.report.proportion_refined,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------

const WALLS: &str = "
obstacle WallS 34.4 25.4 39.6 25.4 39.6 25.7 34.4 25.7
obstacle WallN 34.4 31.3 39.6 31.3 39.6 31.6 34.4 31.6
obstacle WallW 34.4 25.4 34.7 25.4 34.7 31.6 34.4 31.6
obstacle WallE 39.3 25.4 39.6 25.4 39.6 31.6 39.3 31.6
";

fn walled_workspace() -> Workspace {
    let text = std::fs::read_to_string(shipped_scenario().with_file_name("hangar.wspc")).unwrap();
    parse_workspace(&format!("{text}{WALLS}")).unwrap()
}

fn criterion_6() -> Check {
    let mut s = Scenario::load(&shipped_scenario()).map_err(|e| format!("{e:#}"))?;
    s.workspace = walled_workspace();
    s.start = Some(Pose::new(37.0, 11.5));
    s.problem.init.remove(&GroundedFact::new("at", &["Dock"]));
    s.problem.init.insert(GroundedFact::new("at", &["NearRightWing"]));
    s.budgets.insert("move".into(), 2);
    let model = s.model(None).map_err(|e| format!("{e:#}"))?;
    let mut ctx = s.context().map_err(|e| format!("{e:#}"))?;
    ctx.planner.max_iterations = 1000;
    let ssp = build_ssp(&model, model.initial.clone(), model.problem.horizon, &Default::default(), DEFAULT_STATE_CAP)
        .map_err(|e| e.to_string())?;
    let tree = extract_policy_tree(&ssp, &solve(&ssp)).map_err(|e| e.to_string())?;
    let root = tree.root().action_label.clone().unwrap_or_default();
    let found = tree.root().children[0];
    let to_left = tree.node(found).action_label.clone().unwrap_or_default();
    if root != "inspect(RightWing NearRightWing)" || !to_left.starts_with("move(NearRightWing NearLeftWing") {
        return Err(format!("unexpected policy prefix {root} then {to_left}"));
    }

    let (mut replans, mut backtracks) = (0usize, 0usize);
    for seed in 0..500u64 {
        let cfg = RunConfig { seed, ..RunConfig::default() }.anytime();
        let mut refiner = Refiner::new(&model, &ctx, &cfg, Clock::new(ClockMode::Work));
        let partial = PartialTraj::default();
        let leaf = estimate_path_costs(&tree, &partial, |n| refiner.node_measure(&tree, n))
            .pop()
            .ok_or("empty queue")?
            .leaf;
        match refiner.refine_path(&tree, &partial, &tree.path_to(leaf)) {
            RefineOutcome::Replan { reason, forced: false, .. }
                if reason.node == found && matches!(reason.kind, FailureKind::NoCollisionFreePath { .. }) =>
            {
                replans += 1
            }
            RefineOutcome::Backtrack { node: 0, .. } => backtracks += 1,
            other => return Err(format!("seed {seed}: unexpected outcome {other:?}")),
        }
    }
    let fraction = replans as f64 / (replans + backtracks) as f64;
    check(
        (fraction - 0.5).abs() <= 0.05,
        format!("{replans} replans, {backtracks} backtracks, replan fraction {fraction:.3}"),
    )
}

// ---------------------------------------------------------------------------

fn criterion_7() -> Check {
    let base = Scenario::load(&shipped_scenario()).map_err(|e| format!("{e:#}"))?;
    let ctx = base.context().map_err(|e| format!("{e:#}"))?;
    let step = ctx.planner.collision_step / 10.0;
    let (mut checked, mut violations) = (0, 0);
    for (rate, seed, r) in results()? {
        for (node, refined) in r.partial.iter() {
            for b in &refined.branches {
                checked += 1;
                if !collision_free(&b.trajectory, &base.workspace, step) {
                    violations += 1;
                    eprintln!("rate {rate} seed {seed}: node {node} trajectory collides");
                }
            }
        }
    }
    check(
        violations == 0 && checked > 0,
        format!("{checked} trajectories at spacing {step:.4} m, {violations} violations"),
    )
}

// ---------------------------------------------------------------------------

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut compared = 0;
    for rate in RATES {
        for seed in SEEDS {
            let stem = run_stem(rate, seed);
            for suffix in ["profile.csv", "tree.csv"] {
                let name = format!("{stem}.{suffix}");
                let x = std::fs::read(a.join(&name)).map_err(|e| format!("{name}: {e}"))?;
                let y = std::fs::read(b.join(&name)).map_err(|e| format!("{name}: {e}"))?;
                if x != y {
                    return Err(format!("{name} differs between sweeps"));
                }
                compared += 1;
            }
        }
    }
    let agg = |d: &Path| std::fs::read(d.join("aggregate.csv")).map_err(|e| e.to_string());
    if agg(a)? != agg(b)? {
        return Err("aggregate.csv differs between sweeps".into());
    }
    Ok(compared + 1)
}

fn criterion_8() -> Check {
    let (first, _) = sweep();
    let (second, _) = run_sweep();
    let files = compare_dirs(first.path(), second.path())?;
    Ok(format!("{files} files byte-identical across two sweeps"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 8] = [
        ("Bellman correctness", criterion_1),
        ("policy-tree conservation", criterion_2),
        ("greedy coverage bound", criterion_3),
        ("anytime profile shape", criterion_4),
        ("failure-feedback loop", criterion_5),
        ("backtrack/replan ratio", criterion_6),
        ("motion-plan validity", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
