use super::*;
use crate::model::parse_problem;
use approx::assert_abs_diff_eq;

fn one_stage(cone: &str, objective: &str, a: &str, b: &str, c: &str, m: usize) -> MultistageProblem {
    let text = format!(
        r#"{{"version": 1, "T": 1,
             "stages": [{{"n": 1, "m": {m}, "set": {{"kind": "box", "lower": [0], "upper": [1]}},
                          "cone": {{"kind": "{cone}"}}, "objective": {objective}}}],
             "first_stage": {{"A": {a}, "b": {b}, "c": {c}}}}}"#
    );
    parse_problem(text.as_bytes()).unwrap()
}

fn bilinear() -> MultistageProblem {
    one_stage("zero", r#"{"kind": "linear"}"#, "[[1]]", "[0.5]", "[1]", 1)
}

/// Stage 2: x ≥ u·B over [0,1] with costs `costs` (equiprobable outcomes).
fn two_stage(b_coef: f64, costs: &[f64]) -> MultistageProblem {
    let prob = 1.0 / costs.len() as f64;
    let support: Vec<String> = costs
        .iter()
        .map(|c| format!(r#"{{"A": [[1]], "B": [[{b_coef}]], "b": [0], "c": [{c}], "prob": {prob}}}"#))
        .collect();
    let stage = r#"{"n": 1, "m": 1, "set": {"kind": "box", "lower": [0], "upper": [1]},
                    "cone": {"kind": "nonneg"}, "objective": {"kind": "linear"}}"#;
    let text = format!(
        r#"{{"version": 1, "T": 2, "stages": [{stage}, {stage}],
             "first_stage": {{"A": [[1]], "b": [0], "c": [1]}},
             "scenarios": {{"dependence": "stagewise_independent",
                           "stages": [{{"support": [{}]}}]}}}}"#,
        support.join(",")
    );
    parse_problem(text.as_bytes()).unwrap()
}

#[test]
fn last_stage_value_is_the_previous_decision() {
    let p = two_stage(1.0, &[1.0]);
    let e = ReferenceEngine::new(&p);
    for u in [0.0, 0.3, 1.0] {
        let (v, _) = e.value_function(2, Some(0), &[u]).unwrap();
        assert_abs_diff_eq!(v, u, epsilon = 1e-8);
    }
}

#[test]
fn uncoupled_value_ignores_the_previous_decision() {
    let p = two_stage(0.0, &[1.0, 3.0]);
    let e = ReferenceEngine::new(&p);
    let a = e.value_function(2, Some(0), &[0.1]).unwrap().0;
    let b = e.value_function(2, Some(0), &[0.9]).unwrap().0;
    assert_abs_diff_eq!(a, b, epsilon = 1e-9);
}

#[test]
fn expectation_over_two_outcomes() {
    let p = two_stage(1.0, &[1.0, 2.0]);
    let e = ReferenceEngine::new(&p);
    let mut v = ExactValueFn::new(&e, 2, Some(0));
    assert_abs_diff_eq!(v.value(&[0.4]).unwrap(), 0.6, epsilon = 1e-8);
    assert_eq!(v.len(), 1);
    v.value(&[0.4 + 1e-12]).unwrap();
    assert_eq!(v.len(), 1, "nearby queries share a cache slot");
}

#[test]
fn whole_problem_optimum() {
    // x¹ + E[c x²] with x² ≥ x¹: optimum x¹ = 0
    let p = two_stage(1.0, &[1.0, 2.0]);
    let e = ReferenceEngine::new(&p);
    let s = e.first_stage_optimum().unwrap();
    assert_abs_diff_eq!(s.value, 0.0, epsilon = 1e-8);
    assert_abs_diff_eq!(s.x[0], 0.0, epsilon = 1e-7);
}

#[test]
fn bilinear_saddle_point() {
    let p = bilinear();
    let e = ReferenceEngine::new(&p);
    let s = e.first_stage_optimum().unwrap();
    assert_abs_diff_eq!(s.x[0], 0.5, epsilon = 1e-6);
    assert_abs_diff_eq!(s.y[0], 1.0, epsilon = 1e-6);
}

#[test]
fn unconstrained_quadratic() {
    let p = one_stage(
        "zero",
        r#"{"kind": "quad_plus_linear", "mu": 1, "center": [0.3]}"#,
        "[]",
        "[]",
        "[0]",
        0,
    );
    let e = ReferenceEngine::new(&p);
    let s = e.first_stage_optimum().unwrap();
    assert_abs_diff_eq!(s.x[0], 0.3, epsilon = 1e-9);
    assert_eq!(s.y.dim(), 0);
}

#[test]
fn gap_star_vanishes_at_the_saddle_and_not_elsewhere() {
    let p = bilinear();
    let e = ReferenceEngine::new(&p);
    let root = NodeRef::root();
    let g0 = e.eval_gap_star(root, &[], &[0.5], &[1.0], &[1.0]).unwrap();
    assert_abs_diff_eq!(g0, 0.0, epsilon = 1e-7);
    let g1 = e.eval_gap_star(root, &[], &[0.6], &[1.0], &[1.0]).unwrap();
    assert!(g1 >= -1e-8);
    let g2 = e.eval_gap_star(root, &[], &[0.5], &[0.5], &[1.0]).unwrap();
    assert!(g2 > 1e-3, "gap {g2}");
}

#[test]
fn gap_delta_at_the_saddle() {
    let p = bilinear();
    let e = ReferenceEngine::new(&p);
    let r = e.eval_gap_delta(NodeRef::root(), &[], &[0.5], &[1.0], &[0.0], 4.0, &[1.0]).unwrap();
    assert_abs_diff_eq!(r.gap_delta, 0.0, epsilon = 1e-7);
    assert_eq!(r.feasibility_residual, 0.0);
}

#[test]
fn interior_candidate_is_feasible_whatever_its_cost() {
    // x − 0.2 ≥ 0 at x = 0.9: strictly inside the cone, but far from optimal
    let p = one_stage("nonneg", r#"{"kind": "linear"}"#, "[[1]]", "[0.2]", "[1]", 1);
    let e = ReferenceEngine::new(&p);
    let r = e.eval_gap_delta(NodeRef::root(), &[], &[0.9], &[0.0], &[0.0], 2.0, &[1.0]).unwrap();
    assert_eq!(r.feasibility_residual, 0.0);
    assert!(r.gap_delta > 0.5);
}

#[test]
fn eps_subgradient_checks() {
    let grid: Vec<DenseVector> = [-1.0, 1.0].iter().map(|v| DenseVector::from(vec![*v])).collect();
    let mut abs = |u: &[f64]| u[0].abs();
    assert!(check_eps_subgradient(&mut abs, &[0.0], &[0.5], 0.0, &grid).unwrap().pass);

    let mut sq = |u: &[f64]| u[0] * u[0];
    let grid: Vec<DenseVector> = (-4..=4).map(|i| DenseVector::from(vec![i as f64 * 0.25])).collect();
    assert!(check_eps_subgradient(&mut sq, &[0.5], &[1.0], 0.0, &grid).unwrap().pass);
    let bad = check_eps_subgradient(&mut sq, &[0.5], &[3.0], 0.0, &grid).unwrap();
    assert!(!bad.pass && bad.worst_violation > 0.0);
}

#[test]
fn infeasible_node_is_reported() {
    // x − 2 ≥ 0 over [0, 1]
    let p = one_stage("nonneg", r#"{"kind": "linear"}"#, "[[1]]", "[2]", "[1]", 1);
    let e = ReferenceEngine::with_options(&p, PdhgOptions { max_iter: 5_000, tol: 1e-9 });
    assert!(matches!(e.feasibility_precheck(), Err(Error::Infeasible { stage: 1, .. })));
    assert!(matches!(e.first_stage_optimum(), Err(Error::Infeasible { stage: 1, .. })));
}

#[test]
fn recourse_precheck_uses_previous_extreme_points() {
    // stage 2 needs x² ≥ 2u, impossible at u = 1
    let p = two_stage(2.0, &[1.0]);
    let e = ReferenceEngine::new(&p);
    assert!(matches!(e.feasibility_precheck(), Err(Error::Infeasible { stage: 2, .. })));
    assert!(ReferenceEngine::new(&two_stage(1.0, &[1.0])).feasibility_precheck().is_ok());
}
