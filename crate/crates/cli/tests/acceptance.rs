//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the verdict lines
//! are always visible.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dsa_core::driver::{build_ledger, dsa_solve, plan_samples, Overrides, Regime, SolveOptions, StageRunner};
use dsa_core::geometry::Cone;
use dsa_core::instances;
use dsa_core::model::{parse_problem, splitmix64, MultistageProblem, SeededStream};
use dsa_core::numerics::{norm2, sigma_min_nonzero, spectral_norm, DenseVector};
use dsa_core::oracle::{check_eps_subgradient, ExactValueFn, NodeRef, ReferenceEngine};
use dsa_core::parallel::{self, replicate};
use dsa_core::rates::{loglog_slope, rate_experiment};
use dsa_core::saddle::{check_conditions, make_schedule, ScheduleConstants, ScheduleVariant};

const GRID: [usize; 5] = [10, 32, 100, 316, 1000];

type Check = Result<String, String>;

/// Label, runner and runtime budget in seconds.
type Criterion = (&'static str, fn() -> Check, u64);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Shared harness of the two rate criteria; `bound` is the closed form
/// evaluated independently of the library's bound table.
fn rate_check(problem: &MultistageProblem, variant: ScheduleVariant, bound: impl Fn(usize, f64) -> f64, slope_max: f64) -> Check {
    let engine = ReferenceEngine::new(problem);
    let y_star = engine.first_stage_optimum().map_err(fail)?.y;
    let dual_sq = norm2(&y_star).powi(2);
    let pts = rate_experiment(problem, variant, &GRID, Default::default()).map_err(fail)?;
    let mut worst: f64 = 0.0;
    for p in &pts {
        let b = bound(p.n, dual_sq);
        if p.measured_gap > b {
            return Err(format!("N = {}: gap {:.3e} exceeds bound {:.3e}", p.n, p.measured_gap, b));
        }
        worst = worst.max(p.measured_gap / b);
    }
    let slope = loglog_slope(&pts).ok_or("fewer than two positive gaps")?;
    ensure(slope <= slope_max, format!("max gap/bound {worst:.3}, log-log slope {slope:.3} (≤ {slope_max})"))
}

fn ac1() -> Check {
    let p = instances::bilinear();
    let t = p.stage(1);
    let norm_a = spectral_norm(&p.first_stage.a).map_err(fail)?;
    let (alpha, omega_sq) = (t.prox.modulus_alpha, t.prox.diameter_sq_omega);
    rate_check(
        &p,
        ScheduleVariant::GenAggressive,
        |n, r2| 2f64.sqrt() * norm_a * (2.0 * omega_sq + r2) / (alpha.sqrt() * n as f64),
        -0.9,
    )
}

fn ac2() -> Check {
    let p = instances::strong_quadratic();
    let t = p.stage(1);
    let norm_a = spectral_norm(&p.first_stage.a).map_err(fail)?;
    let (alpha, mu) = (t.prox.modulus_alpha, t.mu());
    rate_check(
        &p,
        ScheduleVariant::StrongAggressive,
        |n, r2| 8.0 * norm_a * norm_a * r2 / (alpha * mu * (n * (n + 1)) as f64),
        -1.8,
    )
}

/// Mean of the sampled subgradients and the largest standard error of
/// ⟨ĝ, u′ − u⟩ over the check grid.
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

fn ac3() -> Check {
    const EPS: f64 = 0.3;
    const REPS: usize = 200;
    let p = instances::bundled("tiny3").map_err(fail)?;
    let ledger = build_ledger(&p, &Overrides::new()).map_err(fail)?;
    let plan = plan_samples(&ledger, EPS, Regime::Strong).map_err(fail)?;
    let engine = ReferenceEngine::new(&p);
    let set = p.stage(2).set();
    let mut grid = set.extreme_points();
    grid.extend((0..=20).map(|i| DenseVector::from(vec![i as f64 / 20.0])));

    let points: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();
    let results = parallel::map(&points, |&u| -> Result<(f64, f64, bool), String> {
        let mut runner = StageRunner::new(&p, &plan, &ledger).map_err(fail)?;
        let mut samples = Vec::with_capacity(REPS);
        for r in 0..REPS {
            let stream = SeededStream::new(parallel::replication_seed(u.to_bits(), r));
            samples.push(runner.sample_subgradient(3, 0, &[u], &stream).map_err(fail)?);
        }
        let (mean, sigma) = mean_and_margin(&samples, &[u], &grid);
        let eps = EPS / 3.0 + 3.0 * sigma;
        let mut v = ExactValueFn::new(&engine, 3, Some(0));
        let c = check_eps_subgradient(&mut v, &[u], &mean, eps, &grid).map_err(fail)?;
        Ok((c.worst_violation, eps, c.pass))
    });
    let mut worst = f64::NEG_INFINITY;
    for (u, r) in points.iter().zip(results) {
        let (violation, eps, pass) = r?;
        if !pass {
            return Err(format!("u = {u:.2}: violation {violation:.3e} at eps {eps:.3}"));
        }
        worst = worst.max(violation);
    }
    Ok(format!("10 points × {REPS} replications, worst violation {worst:.3e}"))
}

fn ac4() -> Check {
    const EPS: f64 = 0.25;
    let p = instances::bundled("tiny3").map_err(fail)?;
    let ledger = build_ledger(&p, &Overrides::new()).map_err(fail)?;
    let regime = if p.strongly_convex() { Regime::Strong } else { Regime::General };
    let plan = plan_samples(&ledger, EPS, regime).map_err(fail)?;
    let engine = ReferenceEngine::new(&p);
    let opt = engine.first_stage_optimum().map_err(fail)?;
    let first = &p.first_stage;
    let cone: &Cone = &p.stage(1).cone;

    let runs = replicate(2024, 20, |_, seed| dsa_solve(&p, &plan, &ledger, seed, SolveOptions::default()));
    let (mut err_sum, mut delta_sum, mut worst_residual) = (0.0, 0.0, 0.0f64);
    for r in runs {
        let r = r.map_err(fail)?;
        let value = engine.stage_cost(NodeRef::root(), &r.x_bar_1).map_err(fail)?;
        err_sum += (value - opt.value).abs();
        delta_sum += norm2(&r.delta);
        let ax = first.a.matvec(&r.x_bar_1);
        let slack: Vec<f64> = (0..ax.dim()).map(|i| ax[i] - first.b[i] - r.delta[i]).collect();
        let residual = cone.distance(&slack).map_err(fail)?;
        worst_residual = worst_residual.max(residual);
    }
    let (err, delta) = (err_sum / 20.0, delta_sum / 20.0);
    ensure(
        err <= EPS && delta <= EPS && worst_residual <= 1e-9,
        format!(
            "budgets {:?}, mean objective error {err:.3e}, mean ‖δ‖ {delta:.3e}, worst residual {worst_residual:.1e}",
            plan.budgets
        ),
    )
}

fn ac5() -> Check {
    let p = instances::bundled("tiny3").map_err(fail)?;
    let ledger = build_ledger(&p, &Overrides::new()).map_err(fail)?;
    let mut lines = Vec::new();
    for eps in [0.01, 0.005, 0.001] {
        let plan = |e, regime| plan_samples(&ledger, e, regime).map_err(fail);
        let (g, g2) = (plan(eps, Regime::General)?, plan(eps / 2.0, Regime::General)?);
        let (s, s2) = (plan(eps, Regime::Strong)?, plan(eps / 2.0, Regime::Strong)?);
        let prod = |pl: &dsa_core::driver::SamplePlan| (pl.budgets[0] * pl.budgets[1]) as f64;
        let r1 = g2.budgets[0] as f64 / g.budgets[0] as f64;
        let r12 = prod(&g2) / prod(&g);
        let rs = prod(&s2) / prod(&s);
        let ok = (3.5..=4.05).contains(&r1) && (8.0..=16.2).contains(&r12) && (3.5..=4.2).contains(&rs);
        let line = format!("ε = {eps}: N₁ {r1:.3}, N₁N₂ {r12:.3}, strong N₁N₂ {rs:.3}");
        if !ok {
            return Err(line);
        }
        lines.push(line);
    }
    Ok(lines.join("; "))
}

struct Lcg(u64);

impl Lcg {
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.0 = splitmix64(self.0);
        lo + (hi - lo) * (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// A square invertible conic LP with interior primal optimum and a known
/// dual multiplier.
fn random_lp(rng: &mut Lcg, n: usize, nonneg: bool) -> String {
    let a = loop {
        let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect()).collect();
        let det = if n == 1 { a[0][0] } else { a[0][0] * a[1][1] - a[0][1] * a[1][0] };
        if det.abs() > 0.3 {
            break a;
        }
    };
    let x: Vec<f64> = (0..n).map(|_| rng.uniform(-0.5, 0.5)).collect();
    let b: Vec<f64> = a.iter().map(|row| row.iter().zip(&x).map(|(p, q)| p * q).sum()).collect();
    let y0: Vec<f64> = (0..n).map(|_| if nonneg { rng.uniform(0.0, 1.0) } else { rng.uniform(-1.0, 1.0) }).collect();
    let c: Vec<f64> = (0..n).map(|j| (0..n).map(|i| a[i][j] * y0[i]).sum()).collect();
    let cone = if nonneg { "nonneg" } else { "zero" };
    serde_json::json!({
        "version": 1, "T": 1,
        "stages": [{"n": n, "m": n, "set": {"kind": "box", "lower": vec![-1.0; n], "upper": vec![1.0; n]},
                    "cone": {"kind": cone}, "objective": {"kind": "linear"}}],
        "first_stage": {"A": a, "b": b, "c": c}
    })
    .to_string()
}

fn ac6() -> Check {
    let mut rng = Lcg(0x5eed);
    let mut tightest = f64::INFINITY;
    for i in 0..20 {
        let text = random_lp(&mut rng, 1 + i % 2, i % 4 < 2);
        let p = parse_problem(text.as_bytes()).map_err(fail)?;
        let engine = ReferenceEngine::new(&p);
        let y = engine.first_stage_optimum().map_err(fail)?.y;
        let m_h = norm2(&p.first_stage.c);
        let sigma = sigma_min_nonzero(&p.first_stage.a).map_err(fail)?;
        let ledger = build_ledger(&p, &Overrides::new()).map_err(fail)?;
        let bound = m_h / sigma;
        if (ledger.stage(1).m_h - m_h).abs() > 1e-12 * m_h.max(1.0) {
            return Err(format!("LP {i}: ledger M_h {} differs from ‖c‖ = {m_h}", ledger.stage(1).m_h));
        }
        if norm2(&y) > bound + 1e-8 {
            return Err(format!("LP {i}: ‖y*‖ = {:.6} > M_h/σ_min = {bound:.6}\n{text}", norm2(&y)));
        }
        tightest = tightest.min(bound - norm2(&y));
    }
    Ok(format!("20 LPs, smallest slack {tightest:.3e}"))
}

fn ac7() -> Check {
    let consts = [
        ScheduleConstants { norm_a: 1.0, alpha: 1.0, omega_sq: 0.5, m: 0.0, mu: 1.0 },
        ScheduleConstants { norm_a: 3.7, alpha: 0.5, omega_sq: 2.0, m: 1.3, mu: 0.2 },
        ScheduleConstants { norm_a: 0.05, alpha: 1.0, omega_sq: 10.0, m: 25.0, mu: 4.0 },
    ];
    let variants = [
        ScheduleVariant::GenAggressive,
        ScheduleVariant::GenBoundedDual,
        ScheduleVariant::StrongAggressive,
        ScheduleVariant::StrongBoundedDual,
    ];
    let mut checked = 0;
    for v in variants {
        for c in consts {
            for n in [1, 2, 3, 7, 10, 100, 1000, 4321, 10_000] {
                let s = make_schedule(v, n, c).map_err(fail)?;
                if let Some(bad) = check_conditions(&s).first() {
                    return Err(format!("{} N = {n}: {} fails at k = {} ({} vs {})", v.name(), bad.condition, bad.k, bad.lhs, bad.rhs));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} schedules, all conditions hold"))
}

fn ac8() -> Check {
    let exe = env!("CARGO_BIN_EXE_dsa");
    let dir = tempfile::tempdir().map_err(fail)?;
    let tiny3 = concat!(env!("CARGO_MANIFEST_DIR"), "/../../instances/tiny3.json");
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("r{i}.json"));
        let status = Command::new(exe)
            .args(["solve", "-p", tiny3, "-e", "0.5", "--seed", "11", "-o"])
            .arg(&out)
            .status()
            .map_err(fail)?;
        if !status.success() {
            return Err(format!("solve exited with {status}"));
        }
        let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).map_err(fail)?).map_err(fail)?;
        v.as_object_mut().unwrap().remove("wall_time");
        reports.push(serde_json::to_vec_pretty(&v).unwrap());
    }
    if reports[0] != reports[1] {
        return Err("reports differ beyond wall_time".into());
    }

    let p = instances::bundled("tiny4").map_err(fail)?;
    let ledger = build_ledger(&p, &Overrides::new()).map_err(fail)?;
    let plan = plan_samples(&ledger, 2.0, Regime::Strong).map_err(fail)?;
    let r = dsa_solve(&p, &plan, &ledger, 5, SolveOptions::default()).map_err(fail)?;
    ensure(
        r.peak_live_states <= p.horizon,
        format!("identical reports; tiny4 peak live states {} (T = {})", r.peak_live_states, p.horizon),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("AC1 general-convex rate", ac1, 10),
        ("AC2 strongly-convex rate", ac2, 10),
        ("AC3 ε-subgradient soundness", ac3, 60),
        ("AC4 end-to-end three-stage", ac4, 300),
        ("AC5 sampling-complexity scaling", ac5, 1),
        ("AC6 dual bound", ac6, 30),
        ("AC7 schedule conditions", ac7, 5),
        ("AC8 determinism and memory", ac8, 60),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(d) if elapsed <= Duration::from_secs(limit) => (true, d),
            Ok(d) => (false, format!("{d}; over the {limit} s budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "{} {name} [{:.2} s]: {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
