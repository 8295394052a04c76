//! T-stage stochastic conic programs with finite discrete scenarios.

mod io;
mod scenario;
mod stream;

pub use io::{parse_problem, serialize_problem};
pub use scenario::{sample_outcome, Dependence, Outcome, ScenarioDistribution};
pub use stream::{mix, splitmix64, SeededStream};

use crate::error::{Error, Result};
use crate::geometry::{Cone, FeasibleSet, ProxSetup};
use crate::numerics::{dot, DenseMatrix, DenseVector};

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind {
    Linear,
    /// `(μ/2)‖x − center‖² + ⟨c, x⟩`
    QuadPlusLinear { mu: f64, center: DenseVector },
}

impl ObjectiveKind {
    pub fn mu(&self) -> f64 {
        match self {
            ObjectiveKind::Linear => 0.0,
            ObjectiveKind::QuadPlusLinear { mu, .. } => *mu,
        }
    }
}

/// `F(x, p) = max_i ⟨S_i, x⟩ + o_i + p_i`; the parameter `p` comes with
/// each realized outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearMax {
    pub slopes: DenseMatrix,
    pub offsets: DenseVector,
}

impl PiecewiseLinearMax {
    pub fn pieces(&self) -> usize {
        self.slopes.rows()
    }

    /// Value and the slope of the first maximizing piece.
    pub fn value_and_subgradient(&self, x: &[f64], p: &[f64]) -> (f64, DenseVector) {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for i in 0..self.pieces() {
            let v = dot(self.slopes.row(i), x) + self.offsets[i] + p[i];
            if v > best.0 {
                best = (v, i);
            }
        }
        (best.0, DenseVector::from(self.slopes.row(best.1).to_vec()))
    }

    pub fn lipschitz_bound(&self) -> f64 {
        (0..self.pieces())
            .map(|i| crate::numerics::norm2(self.slopes.row(i)))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTemplate {
    /// 1-based stage index.
    pub index: usize,
    pub n: usize,
    pub m: usize,
    pub prox: ProxSetup,
    pub cone: Cone,
    pub objective: ObjectiveKind,
    pub coupling: Option<PiecewiseLinearMax>,
}

impl StageTemplate {
    pub fn set(&self) -> &FeasibleSet {
        &self.prox.set
    }

    pub fn mu(&self) -> f64 {
        self.objective.mu()
    }

    /// The objective realized with an outcome's cost vector and parameter.
    pub fn objective_for(&self, outcome: &Outcome) -> StageObjective {
        StageObjective {
            kind: self.objective.clone(),
            c: outcome.c.clone(),
            coupling: match (&self.coupling, &outcome.p) {
                (Some(f), Some(p)) => Some((f.clone(), p.clone())),
                _ => None,
            },
        }
    }
}

/// A stage objective `h(x, c)` plus the optional non-simple term `F(x, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageObjective {
    pub kind: ObjectiveKind,
    pub c: DenseVector,
    pub coupling: Option<(PiecewiseLinearMax, DenseVector)>,
}

impl StageObjective {
    pub fn linear(c: DenseVector) -> Self {
        StageObjective {
            kind: ObjectiveKind::Linear,
            c,
            coupling: None,
        }
    }

    /// `h(x, c)` alone.
    pub fn simple_value(&self, x: &[f64]) -> f64 {
        let lin = dot(&self.c, x);
        match &self.kind {
            ObjectiveKind::Linear => lin,
            ObjectiveKind::QuadPlusLinear { mu, center } => {
                let d: f64 = x.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                0.5 * mu * d + lin
            }
        }
    }

    /// `F'(x, p)` if a coupling term is present.
    pub fn coupling_subgradient(&self, x: &[f64]) -> Option<DenseVector> {
        self.coupling.as_ref().map(|(f, p)| f.value_and_subgradient(x, p).1)
    }

    pub fn coupling_value(&self, x: &[f64]) -> f64 {
        self.coupling
            .as_ref()
            .map_or(0.0, |(f, p)| f.value_and_subgradient(x, p).0)
    }

    /// Lipschitz constant of `h(·, c)` over X in the Euclidean norm.
    pub fn simple_lipschitz(&self, set: &FeasibleSet) -> f64 {
        let lin = self.c.norm();
        match &self.kind {
            ObjectiveKind::Linear => lin,
            ObjectiveKind::QuadPlusLinear { mu, center } => lin + mu * set.max_distance_from(center),
        }
    }

    pub fn coupling_lipschitz(&self) -> f64 {
        self.coupling.as_ref().map_or(0.0, |(f, _)| f.lipschitz_bound())
    }
}

/// `h(x, c) + F(x, p)` and one subgradient.
pub fn objective_value_and_subgradient(
    obj: &StageObjective,
    set: &FeasibleSet,
    x: &[f64],
) -> Result<(f64, DenseVector)> {
    if x.len() != obj.c.dim() {
        return Err(Error::dim(format!(
            "objective of dimension {} evaluated at a point of length {}",
            obj.c.dim(),
            x.len()
        )));
    }
    if !set.contains(x) {
        return Err(Error::Domain("objective evaluated outside the feasible set".into()));
    }
    let mut grad = obj.c.clone();
    if let ObjectiveKind::QuadPlusLinear { mu, center } = &obj.kind {
        for ((g, xi), ci) in grad.iter_mut().zip(x).zip(center.iter()) {
            *g += mu * (xi - ci);
        }
    }
    let mut value = obj.simple_value(x);
    if let Some((f, p)) = &obj.coupling {
        let (fv, fg) = f.value_and_subgradient(x, p);
        value += fv;
        grad.axpy(1.0, &fg);
    }
    Ok((value, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistageProblem {
    pub horizon: usize,
    pub stages: Vec<StageTemplate>,
    /// Deterministic stage-1 data; its `B` has zero columns.
    pub first_stage: Outcome,
    pub distribution: ScenarioDistribution,
    /// `𝓑_t` for t = 2..T, stored at index t − 2.
    pub bound_b: Vec<f64>,
}

impl MultistageProblem {
    /// 1-based stage accessor.
    pub fn stage(&self, t: usize) -> &StageTemplate {
        &self.stages[t - 1]
    }

    pub fn bound_b(&self, t: usize) -> f64 {
        if t < 2 {
            0.0
        } else {
            self.bound_b[t - 2]
        }
    }

    /// Every outcome that can appear at stage t (t = 1 yields the
    /// deterministic first-stage tuple).
    pub fn outcomes_at(&self, t: usize) -> Vec<&Outcome> {
        if t == 1 {
            vec![&self.first_stage]
        } else {
            self.distribution.all_outcomes(t)
        }
    }

    pub fn strongly_convex(&self) -> bool {
        self.stages.iter().all(|s| s.mu() > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> FeasibleSet {
        FeasibleSet::new_box(DenseVector::zeros(n), DenseVector::filled(n, 1.0)).unwrap()
    }

    #[test]
    fn linear_objective() {
        let obj = StageObjective::linear(DenseVector::from(vec![1.0, 2.0]));
        let (v, g) = objective_value_and_subgradient(&obj, &unit_box(2), &[1.0, 1.0]).unwrap();
        assert_eq!(v, 3.0);
        assert_eq!(g.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn quadratic_objective() {
        let obj = StageObjective {
            kind: ObjectiveKind::QuadPlusLinear {
                mu: 2.0,
                center: DenseVector::zeros(1),
            },
            c: DenseVector::zeros(1),
            coupling: None,
        };
        let (v, g) = objective_value_and_subgradient(&obj, &unit_box(1), &[1.0]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g.as_slice(), &[2.0]);
    }

    #[test]
    fn kink_breaks_ties_to_first_piece() {
        let f = PiecewiseLinearMax {
            slopes: DenseMatrix::from_rows(&[vec![1.0], vec![-1.0]], 1).unwrap(),
            offsets: DenseVector::zeros(2),
        };
        let obj = StageObjective {
            kind: ObjectiveKind::Linear,
            c: DenseVector::zeros(1),
            coupling: Some((f, DenseVector::zeros(2))),
        };
        let set = FeasibleSet::new_box(DenseVector::from(vec![-1.0]), DenseVector::from(vec![1.0])).unwrap();
        let (v, g) = objective_value_and_subgradient(&obj, &set, &[0.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g.as_slice(), &[1.0]);
    }

    #[test]
    fn outside_point_is_a_domain_error() {
        let obj = StageObjective::linear(DenseVector::from(vec![1.0]));
        assert!(matches!(
            objective_value_and_subgradient(&obj, &unit_box(1), &[2.0]),
            Err(Error::Domain(_))
        ));
    }
}
