use super::*;
use crate::instances::bundled;
use crate::model::SeededStream;
use crate::numerics::DenseVector;
use crate::oracle::{theoretical_bound, BoundConstants};
use crate::saddle::{ipdsa_run, SaddleState, StageBinding};

fn plan_for(name: &str, eps: f64, regime: Regime) -> (crate::model::MultistageProblem, ConstantsLedger, SamplePlan) {
    let p = bundled(name).unwrap();
    let l = build_ledger(&p, &Overrides::new()).unwrap();
    let plan = plan_samples(&l, eps, regime).unwrap();
    (p, l, plan)
}

#[test]
fn one_stage_solve_is_a_single_run() {
    let (p, l, plan) = plan_for("tiny1", 0.5, Regime::General);
    let r = dsa_solve(&p, &plan, &l, 3, SolveOptions::default()).unwrap();
    assert!(r.scenario_counts.is_empty());
    assert_eq!(r.peak_live_states, 1);
    assert!(p.stage(1).set().contains(&r.x_bar_1));

    let c = l.stage(1);
    let bound = theoretical_bound(
        stage_variant(1, 1, Regime::General),
        &BoundConstants {
            norm_a: Some(c.norm_a_max),
            alpha: Some(c.alpha),
            omega_sq: Some(c.omega_sq),
            m: Some(0.0),
            mu: Some(0.0),
            dual_dist_sq: Some(c.dual_radius.powi(2)),
            y0_sq: Some(0.0),
        },
        plan.budget(1),
        0.0,
    )
    .unwrap();
    let norm = DenseVector::from(r.delta.clone()).norm();
    assert!(norm <= bound.delta_norm_bound, "‖δ‖ = {norm} > {}", bound.delta_norm_bound);
}

#[test]
fn three_stage_accounting_and_determinism() {
    let (p, l, plan) = plan_for("tiny3", 0.5, Regime::Strong);
    let a = dsa_solve(&p, &plan, &l, 7, SolveOptions::default()).unwrap();
    let b = dsa_solve(&p, &plan, &l, 7, SolveOptions::default()).unwrap();
    assert_eq!(a.scenario_counts, plan.scenario_counts());
    assert_eq!(a.scenario_counts, vec![plan.budgets[0] as u64, (plan.budgets[0] * plan.budgets[1]) as u64]);
    assert_eq!((&a.x_bar_1, &a.y_bar_1, &a.delta), (&b.x_bar_1, &b.y_bar_1, &b.delta));
    assert_eq!(a.peak_live_states, 3);
    let c = dsa_solve(&p, &plan, &l, 8, SolveOptions::default()).unwrap();
    assert_ne!(a.x_bar_1, c.x_bar_1);
}

#[test]
fn four_stage_keeps_at_most_one_state_per_stage() {
    let (p, l, plan) = plan_for("tiny4", 2.0, Regime::Strong);
    let r = dsa_solve(&p, &plan, &l, 1, SolveOptions::default()).unwrap();
    assert!(r.peak_live_states <= 4);
    assert_eq!(r.scenario_counts.len(), 3);
}

#[test]
fn oracle_is_queried_at_the_pre_step_iterate() {
    let p = bundled("tiny3").unwrap();
    let tmpl = p.stage(1);
    let binding = StageBinding::new(tmpl, &p.first_stage, DenseVector::zeros(0)).unwrap();
    let sched = crate::saddle::make_schedule(
        crate::saddle::ScheduleVariant::StrongAggressive,
        6,
        crate::saddle::ScheduleConstants { norm_a: 1.0, alpha: 1.0, omega_sq: 0.5, m: 0.1, mu: 1.0 },
    )
    .unwrap();
    let mut seen = Vec::new();
    let mut oracle = |x: &[f64], _k: usize, _s: &SeededStream| {
        seen.push(x.to_vec());
        Ok(DenseVector::from(vec![0.1]))
    };
    let init = SaddleState::initial(tmpl);
    let x0 = init.x.clone().into_inner();
    let out = ipdsa_run(&binding, &sched, init, &SeededStream::new(0), &mut oracle, true).unwrap();
    let trace = out.trace.unwrap();
    assert_eq!(seen[0], x0);
    for k in 1..6 {
        assert_eq!(seen[k], trace[k - 1].0.as_slice());
    }
}

#[test]
fn trace_mode_records_first_stage_iterates() {
    let (p, l, plan) = plan_for("tiny1", 1.0, Regime::General);
    let r = dsa_solve(&p, &plan, &l, 0, SolveOptions { trace: true }).unwrap();
    assert_eq!(r.trace.unwrap().len(), plan.budget(1));
}

#[test]
fn variants_follow_stage_position() {
    use crate::saddle::ScheduleVariant::*;
    assert_eq!(stage_variant(1, 3, Regime::General), GenAggressive);
    assert_eq!(stage_variant(2, 3, Regime::General), GenBoundedDual);
    assert_eq!(stage_variant(3, 3, Regime::General), GenAggressive);
    assert_eq!(stage_variant(3, 4, Regime::Strong), StrongBoundedDual);
    assert_eq!(stage_variant(1, 1, Regime::Strong), StrongAggressive);
}
