//! Deterministic rate experiments: measured gap of the averaged iterate
//! against the a-priori bound, on one-stage instances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MultistageProblem, SeededStream};
use crate::numerics::{dist2, spectral_norm, DenseVector};
use crate::oracle::{theoretical_bound, BoundConstants, NodeRef, ReferenceEngine};
use crate::parallel::{map_in, Execution};
use crate::saddle::{ipdsa_run, make_schedule, SaddleState, ScheduleConstants, ScheduleVariant, StageBinding, ZeroOracle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub variant: ScheduleVariant,
    pub n: usize,
    pub measured_gap: f64,
    pub theoretical_bound: f64,
    pub ratio: f64,
}

/// Run `variant` for every N of the grid (M = 0, exact data) and compare
/// `gap_*` of the averages with the bound at the reference dual.
pub fn rate_experiment(
    problem: &MultistageProblem,
    variant: ScheduleVariant,
    grid: &[usize],
    mode: Execution,
) -> Result<Vec<RatePoint>> {
    if problem.horizon != 1 {
        return Err(Error::Usage("rate experiments run on one-stage problems".into()));
    }
    if grid.is_empty() {
        return Err(Error::Usage("empty N grid".into()));
    }
    let engine = ReferenceEngine::new(problem);
    let reference = engine.first_stage_optimum()?;
    let tmpl = problem.stage(1);
    let outcome = &problem.first_stage;
    let norm_a = spectral_norm(&outcome.a)?;
    let y0 = DenseVector::zeros(tmpl.m);
    let consts = ScheduleConstants {
        norm_a,
        alpha: tmpl.prox.modulus_alpha,
        omega_sq: tmpl.prox.diameter_sq_omega,
        m: 0.0,
        mu: if variant.is_strong() { tmpl.mu() } else { 0.0 },
    };
    let bound_consts = BoundConstants {
        norm_a: Some(norm_a),
        alpha: Some(consts.alpha),
        omega_sq: Some(consts.omega_sq),
        m: Some(0.0),
        mu: Some(tmpl.mu()),
        dual_dist_sq: Some(dist2(&reference.y, &y0).powi(2)),
        y0_sq: Some(0.0),
    };
    let results = map_in(mode, grid, |&n| -> Result<RatePoint> {
        let schedule = make_schedule(variant, n, consts)?;
        let binding = StageBinding::new(tmpl, outcome, DenseVector::zeros(0))?;
        let out = ipdsa_run(
            &binding,
            &schedule,
            SaddleState::new(tmpl.prox.prox_center.clone(), y0.clone()),
            &SeededStream::new(0),
            &mut ZeroOracle,
            false,
        )?;
        let measured_gap = engine.eval_gap_star(NodeRef::root(), &[], &out.x_bar, &out.y_bar, &reference.y)?;
        let bound = theoretical_bound(variant, &bound_consts, n, 0.0)?.gap_star_bound;
        Ok(RatePoint {
            variant,
            n,
            measured_gap,
            theoretical_bound: bound,
            ratio: measured_gap / bound,
        })
    });
    results.into_iter().collect()
}

/// Least-squares slope of log(gap) against log(N); points with a
/// nonpositive gap are skipped.
pub fn loglog_slope(points: &[RatePoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.measured_gap > 0.0)
        .map(|p| ((p.n as f64).ln(), p.measured_gap.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
