//! The primal-dual step, step-size schedules and the inexact stochastic
//! approximation loop for one stage.

mod ipdsa;
mod schedule;

pub use ipdsa::{ipdsa_run, IpdsaOutput, SubgradientOracle, ZeroOracle};
pub use schedule::{
    check_conditions, make_schedule, ConditionViolation, Schedule, ScheduleConstants, ScheduleVariant,
};

use crate::error::{Error, Result};
use crate::geometry::{project_dual_cone, prox_map_solve, Dgf};
use crate::model::{ObjectiveKind, Outcome, StageObjective, StageTemplate};
use crate::numerics::{DenseMatrix, DenseVector};

/// Iterate triple plus streaming weighted averages.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleState {
    pub x: DenseVector,
    pub y: DenseVector,
    pub y_prev: DenseVector,
    pub k: usize,
    pub avg_x: DenseVector,
    pub avg_y: DenseVector,
    pub weight_sum: f64,
}

impl SaddleState {
    /// Start at `(x0, y0)` with `y_{-1} = y0`.
    pub fn new(x0: DenseVector, y0: DenseVector) -> Self {
        SaddleState {
            avg_x: x0.clone(),
            avg_y: y0.clone(),
            y_prev: y0.clone(),
            x: x0,
            y: y0,
            k: 0,
            weight_sum: 0.0,
        }
    }

    /// Prox-center and zero dual.
    pub fn initial(template: &StageTemplate) -> Self {
        SaddleState::new(template.prox.prox_center.clone(), DenseVector::zeros(template.m))
    }

    /// Fold the current iterate into the averages with weight `w`.
    pub fn accumulate(&mut self, w: f64) {
        let total = self.weight_sum + w;
        let frac = w / total;
        for (a, x) in self.avg_x.iter_mut().zip(self.x.iter()) {
            *a += frac * (x - *a);
        }
        for (a, y) in self.avg_y.iter_mut().zip(self.y.iter()) {
            *a += frac * (y - *a);
        }
        self.weight_sum = total;
    }
}

/// One stage subproblem `V(u, ξ)` with its realized data.
#[derive(Debug, Clone)]
pub struct StageBinding<'a> {
    pub template: &'a StageTemplate,
    pub outcome: &'a Outcome,
    pub u: DenseVector,
    pub objective: StageObjective,
    rhs: DenseVector,
}

impl<'a> StageBinding<'a> {
    pub fn new(template: &'a StageTemplate, outcome: &'a Outcome, u: DenseVector) -> Result<Self> {
        let (m, n) = (template.m, template.n);
        outcome.a.check_shape(m, n, "A")?;
        outcome.b_mat.check_shape(m, u.dim(), "B")?;
        outcome.b.check_dim(m, "b")?;
        outcome.c.check_dim(n, "c")?;
        Ok(StageBinding {
            objective: template.objective_for(outcome),
            rhs: outcome.b.add(&outcome.b_mat.matvec(&u)),
            template,
            outcome,
            u,
        })
    }

    /// `b + B u`
    pub fn rhs(&self) -> &DenseVector {
        &self.rhs
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.outcome.a
    }
}

/// One SPDT step: dual extrapolation, primal prox step, dual projection.
pub fn spdt_step(
    state: &SaddleState,
    binding: &StageBinding,
    g: &[f64],
    theta: f64,
    tau: f64,
    eta: f64,
) -> Result<SaddleState> {
    let mut next = state.clone();
    advance(&mut next, binding, g, theta, tau, eta)?;
    Ok(next)
}

/// `spdt_step` in place; the averages are left untouched.
pub(crate) fn advance(
    state: &mut SaddleState,
    binding: &StageBinding,
    g: &[f64],
    theta: f64,
    tau: f64,
    eta: f64,
) -> Result<()> {
    let tmpl = binding.template;
    let (m, n) = (tmpl.m, tmpl.n);
    state.x.check_dim(n, "x")?;
    state.y.check_dim(m, "y")?;
    state.y_prev.check_dim(m, "y_prev")?;
    if g.len() != n {
        return Err(Error::dim(format!("subgradient: expected length {n}, got {}", g.len())));
    }
    let mu = tmpl.mu();
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Parameter(format!("θ must be nonnegative, got {theta}")));
    }
    if !(tau >= 0.0 && tau + mu > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter(format!("τ must be positive (τ + μ > 0), got τ = {tau}, μ = {mu}")));
    }
    if m > 0 && !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Parameter(format!("η must be positive, got {eta}")));
    }

    // lin = c + g − Aᵀ(y + θ(y − y_prev)), written straight into the buffer
    let a = binding.a();
    let mut lin = binding.objective.c.add(g);
    for i in 0..m {
        let d = state.y[i] + theta * (state.y[i] - state.y_prev[i]);
        if d != 0.0 {
            for (j, l) in lin.iter_mut().enumerate() {
                *l -= a.get(i, j) * d;
            }
        }
    }

    let x_next = match &binding.objective.kind {
        ObjectiveKind::Linear => prox_map_solve(&tmpl.prox, &state.x, &lin, tau)?,
        ObjectiveKind::QuadPlusLinear { mu, center } => {
            debug_assert_eq!(tmpl.prox.dgf, Dgf::Euclidean);
            // ⟨lin, x⟩ + (μ/2)‖x − c‖² + (τ/2)‖x − p‖² is a single
            // Euclidean prox at (τp + μc)/(τ + μ) with weight τ + μ.
            let weight = tau + mu;
            for ((l, p), c) in lin.iter_mut().zip(state.x.iter()).zip(center.iter()) {
                *l = (tau * p + mu * c - *l) / weight;
            }
            tmpl.prox.set.project(&lin)
        }
    };
    state.x = x_next;

    if m > 0 {
        // trial = y + (b + Bu − A x_next)/η, built in y_prev's storage
        std::mem::swap(&mut state.y, &mut state.y_prev);
        let rhs = binding.rhs();
        for i in 0..m {
            let ax: f64 = (0..n).map(|j| a.get(i, j) * state.x[j]).sum();
            state.y[i] = state.y_prev[i] + (rhs[i] - ax) / eta;
        }
        state.y = project_dual_cone(&tmpl.cone, &state.y)?;
    }
    state.k += 1;
    Ok(())
}

/// `Bᵀȳ + F'`
pub fn extract_subgradient(
    b_mat: &DenseMatrix,
    y_bar: &[f64],
    f_prime: Option<&[f64]>,
) -> Result<DenseVector> {
    if y_bar.len() != b_mat.rows() {
        return Err(Error::dim(format!(
            "dual of length {} for a coupling map with {} rows",
            y_bar.len(),
            b_mat.rows()
        )));
    }
    let mut g = b_mat.matvec_t(y_bar);
    if let Some(fp) = f_prime {
        if fp.len() != g.dim() {
            return Err(Error::dim(format!(
                "coupling subgradient of length {} for a decision of length {}",
                fp.len(),
                g.dim()
            )));
        }
        g.axpy(1.0, fp);
    }
    Ok(g)
}

/// `δ = w₁η₁ (y₀ − y_N) / Σ w_k`
pub fn perturbation_delta(schedule: &Schedule, y0: &[f64], y_n: &[f64]) -> Result<DenseVector> {
    if y0.len() != y_n.len() {
        return Err(Error::dim(format!(
            "δ endpoints have lengths {} and {}",
            y0.len(),
            y_n.len()
        )));
    }
    let scale = schedule.w(1) * schedule.eta(1) / schedule.weight_sum();
    Ok(DenseVector::from(
        y0.iter().zip(y_n).map(|(a, b)| scale * (a - b)).collect::<Vec<_>>(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cone, FeasibleSet, ProxSetup};
    use approx::assert_relative_eq;

    fn scalar_stage(cone: Cone) -> StageTemplate {
        let set = FeasibleSet::new_box(DenseVector::zeros(1), DenseVector::filled(1, 1.0)).unwrap();
        StageTemplate {
            index: 1,
            n: 1,
            m: cone.dim(),
            prox: ProxSetup::euclidean(set),
            cone,
            objective: ObjectiveKind::Linear,
            coupling: None,
        }
    }

    fn outcome(a: f64, b: f64, c: f64) -> Outcome {
        Outcome {
            a: DenseMatrix::from_rows(&[vec![a]], 1).unwrap(),
            b_mat: DenseMatrix::zeros(1, 1),
            b: DenseVector::from(vec![b]),
            c: DenseVector::from(vec![c]),
            p: None,
            prob: 1.0,
        }
    }

    fn v(x: f64) -> DenseVector {
        DenseVector::from(vec![x])
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let t = scalar_stage(Cone::NonnegOrthant(1));
        let o = outcome(0.0, 0.0, 0.0);
        let bind = StageBinding::new(&t, &o, v(0.0)).unwrap();
        let s = SaddleState::new(v(0.5), v(0.0));
        let next = spdt_step(&s, &bind, &[0.0], 0.0, 1.0, 1.0).unwrap();
        assert_eq!((next.x.clone(), next.y.clone()), (s.x, s.y));
    }

    #[test]
    fn scalar_closed_form_step() {
        let t = scalar_stage(Cone::NonnegOrthant(1));
        let o = outcome(1.0, 1.0, 0.0);
        let bind = StageBinding::new(&t, &o, v(0.0)).unwrap();
        let mut s = SaddleState::new(v(0.5), v(1.0));
        s.y_prev = v(1.0);
        let next = spdt_step(&s, &bind, &[0.0], 1.0, 2.0, 1.0).unwrap();
        assert_eq!(next.x.as_slice(), &[1.0]);
        assert_eq!(next.y.as_slice(), &[1.0]);
        assert_eq!(next.y_prev.as_slice(), &[1.0]);
    }

    #[test]
    fn dual_step_when_primal_hits_zero() {
        let t = scalar_stage(Cone::NonnegOrthant(1));
        let o = outcome(1.0, 1.0, 100.0);
        let bind = StageBinding::new(&t, &o, v(0.0)).unwrap();
        let s = SaddleState::new(v(0.5), v(1.0));
        let next = spdt_step(&s, &bind, &[0.0], 1.0, 2.0, 2.0).unwrap();
        assert_eq!(next.x.as_slice(), &[0.0]);
        assert_relative_eq!(next.y[0], 1.5);
    }

    #[test]
    fn step_parameter_errors() {
        let t = scalar_stage(Cone::NonnegOrthant(1));
        let o = outcome(1.0, 1.0, 0.0);
        let bind = StageBinding::new(&t, &o, v(0.0)).unwrap();
        let s = SaddleState::new(v(0.5), v(0.0));
        assert!(matches!(spdt_step(&s, &bind, &[0.0], 1.0, 0.0, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(spdt_step(&s, &bind, &[0.0], 1.0, 1.0, -1.0), Err(Error::Parameter(_))));
        assert!(matches!(spdt_step(&s, &bind, &[0.0, 1.0], 1.0, 1.0, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn subgradient_extraction() {
        assert_eq!(extract_subgradient(&DenseMatrix::zeros(2, 3), &[1.0, 2.0], None).unwrap().as_slice(), &[0.0; 3]);
        assert_eq!(
            extract_subgradient(&DenseMatrix::identity(2), &[1.0, 2.0], None).unwrap().as_slice(),
            &[1.0, 2.0]
        );
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], 2).unwrap();
        assert_eq!(extract_subgradient(&b, &[1.0, 1.0], None).unwrap().as_slice(), &[4.0, 6.0]);
        assert_eq!(extract_subgradient(&b, &[1.0, 1.0], Some(&[1.0, -1.0])).unwrap().as_slice(), &[5.0, 5.0]);
        assert!(extract_subgradient(&b, &[1.0], None).is_err());
    }

    #[test]
    fn delta_examples() {
        let consts = ScheduleConstants { norm_a: 2f64.sqrt(), alpha: 1.0, omega_sq: 1.0, m: 0.0, mu: 0.0 };
        let s = make_schedule(ScheduleVariant::GenAggressive, 4, consts).unwrap();
        assert_relative_eq!(s.eta(1), 2.0);
        assert_eq!(perturbation_delta(&s, &[1.0], &[1.0]).unwrap().as_slice(), &[0.0]);
        let d = perturbation_delta(&s, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_relative_eq!(d[0], -0.5);
        assert_eq!(d[1], 0.0);

        let consts = ScheduleConstants { norm_a: 1.5, alpha: 1.0, omega_sq: 1.0, m: 0.0, mu: 2.0 };
        let s = make_schedule(ScheduleVariant::StrongAggressive, 2, consts).unwrap();
        let d = perturbation_delta(&s, &[0.0], &[1.0]).unwrap();
        assert_relative_eq!(d[0], -(4.0 * 1.5 * 1.5 / 2.0) / 3.0, max_relative = 1e-15);
    }
}
