use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use dsa_core::driver::{
    build_ledger, dsa_solve, parse_override, plan_samples, ConstantsLedger, Overrides, Regime, SamplePlan,
    SolveOptions, SolveReport, StageRunner, REPORT_VERSION,
};
use dsa_core::instances;
use dsa_core::model::{parse_problem, MultistageProblem, SeededStream};
use dsa_core::numerics::DenseVector;
use dsa_core::oracle::{check_eps_subgradient, ExactValueFn, NodeRef, PdhgOptions, ReferenceEngine};
use dsa_core::parallel::{self, Execution};
use dsa_core::rates::rate_experiment;
use dsa_core::saddle::ScheduleVariant;
use dsa_core::Error;

#[derive(Parser)]
#[command(name = "dsa", version, about = "Nested stochastic primal-dual solver for multi-stage conic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-stage sample budgets for a target accuracy.
    Plan(Common),
    /// Plan and run the nested recursion.
    Solve(SolveArgs),
    /// Check a solve report against the exact reference solution.
    Verify(VerifyArgs),
    /// Measured gap against the a-priori bound over a grid of N.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Common {
    #[arg(short, long)]
    problem: PathBuf,
    #[arg(short, long, default_value_t = 0.25)]
    epsilon: f64,
    /// general | strong (default: strong when every stage is strongly convex)
    #[arg(long)]
    regime: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Ledger constant override, KEY.stage=VALUE
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replications: usize,
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(short, long)]
    problem: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Tolerance for the checks (default: the report's planning ε)
    #[arg(short, long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples for the stage-2 subgradient check
    #[arg(long, default_value_t = 20)]
    replications: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// One-stage problem file (default: the bundled instance)
    #[arg(short, long)]
    problem: Option<PathBuf>,
    /// Bundled instance: bilinear | strong | tiny1
    #[arg(long, default_value = "bilinear")]
    instance: String,
    #[arg(long)]
    variant: Option<String>,
    /// Comma-separated iteration counts
    #[arg(long, default_value = "10,32,100,316,1000")]
    grid: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// A failure class and its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::Parse { .. } | Error::Validation(_) | Error::Usage(_) | Error::Dimension(_) => 2,
            Error::Planning(_) | Error::Ledger(_) | Error::Config(_) | Error::NoNonzeroSingularValue(_) => 3,
            Error::Infeasible { .. } => 4,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dsa: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_problem(path: &Path) -> Outcome<MultistageProblem> {
    let bytes = std::fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_problem(&bytes)?)
}

/// Write-temp-then-rename, or standard output without a path.
fn emit(output: Option<&Path>, text: &str) -> Outcome<()> {
    use std::io::Write;
    let Some(path) = output else {
        let mut out = std::io::stdout().lock();
        return match writeln!(out, "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure {
                code: 1,
                message: format!("cannot write to stdout: {e}"),
            }),
            _ => Ok(()),
        };
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Failure {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.write_all(b"\n").map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn regime_for(problem: &MultistageProblem, name: Option<&str>) -> Outcome<Regime> {
    match name {
        None => Ok(if problem.strongly_convex() { Regime::Strong } else { Regime::General }),
        Some(s) => Regime::parse(s).ok_or_else(|| Failure::input(format!("unknown regime `{s}` (general | strong)"))),
    }
}

struct Planned {
    problem: MultistageProblem,
    ledger: ConstantsLedger,
    plan: SamplePlan,
}

fn prepare(c: &Common) -> Outcome<Planned> {
    if !(c.epsilon > 0.0 && c.epsilon.is_finite()) {
        return Err(Failure::input(format!("epsilon must be positive, got {}", c.epsilon)));
    }
    let problem = load_problem(&c.problem)?;
    let mut overrides = Overrides::new();
    for o in &c.overrides {
        let (k, v) = parse_override(o)?;
        overrides.insert(k, v);
    }
    let regime = regime_for(&problem, c.regime.as_deref())?;
    let ledger = build_ledger(&problem, &overrides)?;
    let plan = plan_samples(&ledger, c.epsilon, regime)?;
    Ok(Planned { problem, ledger, plan })
}

fn cmd_plan(a: Common) -> Outcome<()> {
    let p = prepare(&a)?;
    let doc = json!({
        "report_version": REPORT_VERSION,
        "epsilon": p.plan.epsilon,
        "regime": p.plan.regime,
        "budgets": p.plan.budgets,
        "raw": p.plan.raw,
        "formulas": p.plan.formulas,
        "ledger": p.ledger,
    });
    emit(a.output.as_deref(), &to_json(&doc))
}

fn cmd_solve(a: SolveArgs) -> Outcome<()> {
    if a.replications == 0 {
        return Err(Failure::input("replications must be at least 1"));
    }
    let p = prepare(&a.common)?;
    ReferenceEngine::new(&p.problem).feasibility_precheck()?;
    let opts = SolveOptions { trace: a.trace };
    if a.replications == 1 {
        let report = dsa_solve(&p.problem, &p.plan, &p.ledger, a.seed, opts)?;
        return emit(a.common.output.as_deref(), &to_json(&report));
    }
    let reports: Vec<SolveReport> = parallel::replicate(a.seed, a.replications, |_, seed| {
        dsa_solve(&p.problem, &p.plan, &p.ledger, seed, opts)
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let doc = json!({
        "report_version": REPORT_VERSION,
        "seed": a.seed,
        "replications": reports,
    });
    emit(a.common.output.as_deref(), &to_json(&doc))
}

#[derive(Serialize)]
struct SubgradientSummary {
    pass: bool,
    worst_violation: f64,
    eps: f64,
    replications: usize,
}

fn cmd_verify(a: VerifyArgs) -> Outcome<()> {
    let problem = load_problem(&a.problem)?;
    let text = std::fs::read(&a.report)
        .map_err(|e| Failure::input(format!("cannot read report {}: {e}", a.report.display())))?;
    let report: SolveReport = serde_json::from_slice(&text)
        .map_err(|e| Failure::input(format!("report {} is not a solve report: {e}", a.report.display())))?;
    if report.report_version != REPORT_VERSION {
        return Err(Failure::input(format!("unsupported report_version {}", report.report_version)));
    }
    if report.ledger.horizon() != problem.horizon {
        return Err(Failure::input("report and problem have different horizons"));
    }
    let eps = a.epsilon.unwrap_or(report.plan.epsilon);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Failure::input(format!("epsilon must be positive, got {eps}")));
    }
    let n1 = problem.stage(1).n;
    let m1 = problem.stage(1).m;
    if report.x_bar_1.len() != n1 || report.y_bar_1.len() != m1 || report.delta.len() != m1 {
        return Err(Failure::input("report vectors do not match the first-stage dimensions"));
    }
    if !problem.stage(1).set().contains(&report.x_bar_1) {
        return Err(Failure { code: 5, message: "x̄¹ lies outside X¹".into() });
    }

    let engine = ReferenceEngine::with_options(&problem, PdhgOptions::default());
    let opt = engine.first_stage_optimum()?;
    let root = NodeRef::root();
    let radius = 2.0 * report.ledger.stage(1).dual_radius;
    let gap = engine.eval_gap_delta(root, &[], &report.x_bar_1, &report.y_bar_1, &report.delta, radius, &opt.y)?;
    let value = engine.stage_cost(root, &report.x_bar_1)?;
    let objective_error = (value - opt.value).abs();

    // Stage-2 value function at x̄¹: sampled subgradient mean against the
    // exact function on the extreme points of X¹.
    let subgradient = if problem.horizon >= 2 {
        let mut runner = StageRunner::new(&problem, &report.plan, &report.ledger)?;
        let reps = a.replications.max(2);
        let mut samples = Vec::with_capacity(reps);
        for r in 0..reps {
            let stream = SeededStream::new(parallel::replication_seed(a.seed, r));
            samples.push(runner.sample_subgradient(2, 0, &report.x_bar_1, &stream)?);
        }
        let grid = problem.stage(1).set().extreme_points();
        let (mean, sigma) = mean_and_margin(&samples, &report.x_bar_1, &grid);
        let t = problem.horizon as f64;
        let tol = (t - 1.0) * eps / t + 3.0 * sigma;
        let mut v = ExactValueFn::new(&engine, 2, Some(0));
        let check = check_eps_subgradient(&mut v, &report.x_bar_1, &mean, tol, &grid)?;
        Some(SubgradientSummary {
            pass: check.pass,
            worst_violation: check.worst_violation,
            eps: tol,
            replications: reps,
        })
    } else {
        None
    };

    let checks = json!({
        "objective_error": objective_error <= eps,
        "gap_star": gap.gap_star <= eps,
        "gap_delta": gap.gap_delta <= eps,
        "feasibility": gap.feasibility_residual <= 1e-9,
        "eps_subgradient": subgradient.as_ref().is_none_or(|s| s.pass),
    });
    let pass = checks.as_object().unwrap().values().all(|v| v.as_bool() == Some(true));
    let doc = json!({
        "report_version": REPORT_VERSION,
        "epsilon": eps,
        "optimal_value": opt.value,
        "candidate_value": value,
        "objective_error": objective_error,
        "gap": gap,
        "eps_subgradient": subgradient,
        "checks": checks,
        "pass": pass,
    });
    emit(a.output.as_deref(), &to_json(&doc))?;
    if pass {
        Ok(())
    } else {
        Err(Failure {
            code: 5,
            message: format!(
                "verification failed (objective error {objective_error:.3e}, gap_* {:.3e}, gap_δ {:.3e}, residual {:.3e})",
                gap.gap_star, gap.gap_delta, gap.feasibility_residual
            ),
        })
    }
}

/// Sample mean and the standard error of ⟨ĝ, u′ − u⟩, maximized over the grid.
fn mean_and_margin(samples: &[DenseVector], u: &[f64], grid: &[DenseVector]) -> (DenseVector, f64) {
    let r = samples.len() as f64;
    let mut mean = DenseVector::zeros(u.len());
    for s in samples {
        mean.axpy(1.0 / r, s);
    }
    let mut sigma: f64 = 0.0;
    for up in grid {
        let d: Vec<f64> = up.iter().zip(u).map(|(a, b)| a - b).collect();
        let vals: Vec<f64> = samples.iter().map(|s| s.dot(&d)).collect();
        let m = vals.iter().sum::<f64>() / r;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r - 1.0);
        sigma = sigma.max((var / r).sqrt());
    }
    (mean, sigma)
}

fn cmd_bench(a: BenchArgs) -> Outcome<()> {
    let grid: Vec<usize> = a
        .grid
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().ok().filter(|n| *n > 0))
        .collect::<Option<_>>()
        .ok_or_else(|| Failure::input(format!("grid `{}` is not a list of positive integers", a.grid)))?;
    if grid.is_empty() {
        return Err(Failure::input("empty N grid"));
    }
    let problem = match &a.problem {
        Some(p) => load_problem(p)?,
        None => instances::bundled(&a.instance)?,
    };
    let variant = match &a.variant {
        Some(v) => ScheduleVariant::parse(v).ok_or_else(|| Failure::input(format!("unknown variant `{v}`")))?,
        None if problem.strongly_convex() => ScheduleVariant::StrongAggressive,
        None => ScheduleVariant::GenAggressive,
    };
    let rows = rate_experiment(&problem, variant, &grid, Execution::default())?;
    let mut csv = String::from("variant,N,measured_gap,theoretical_bound,ratio");
    for r in rows {
        csv.push_str(&format!(
            "\n{},{},{:e},{:e},{:e}",
            r.variant.name(),
            r.n,
            r.measured_gap,
            r.theoretical_bound,
            r.ratio
        ));
    }
    emit(a.output.as_deref(), &csv)
}
