//! Exact reference machinery for small discrete instances: value functions,
//! stage saddle points, gap evaluation and ε-subgradient checks.

mod bounds;
mod extensive;
mod pdhg;

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::project_dual_cone;
use crate::model::{MultistageProblem, Outcome};
use crate::numerics::{dot, DenseVector, Svd};

pub use bounds::{theoretical_bound, BoundConstants, TheoreticalBound};
pub use pdhg::PdhgOptions;

use extensive::{build_extensive, ExtensiveForm, RootItem};

/// Above this constraint violation a node is declared infeasible.
const INFEASIBLE_TOL: f64 = 1e-6;

/// One node of the scenario tree: the outcome at position `outcome_index`
/// of the stage-`stage` support under `parent` (the stage-(t−1) outcome
/// index). Stage 1 has a single node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub stage: usize,
    pub parent: Option<usize>,
    pub outcome_index: usize,
}

impl NodeRef {
    pub fn root() -> Self {
        NodeRef {
            stage: 1,
            parent: None,
            outcome_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub x: DenseVector,
    /// Minimal-norm multiplier of the node's own constraint.
    pub y: DenseVector,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub gap_star: f64,
    pub gap_delta: f64,
    pub delta_norm: f64,
    pub feasibility_residual: f64,
    pub y_star_used: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReferenceEngine<'p> {
    problem: &'p MultistageProblem,
    opts: PdhgOptions,
}

impl<'p> ReferenceEngine<'p> {
    pub fn new(problem: &'p MultistageProblem) -> Self {
        Self::with_options(problem, PdhgOptions::default())
    }

    pub fn with_options(problem: &'p MultistageProblem, opts: PdhgOptions) -> Self {
        ReferenceEngine { problem, opts }
    }

    pub fn problem(&self) -> &'p MultistageProblem {
        self.problem
    }

    pub fn outcome(&self, node: NodeRef) -> Result<&'p Outcome> {
        if node.stage == 0 || node.stage > self.problem.horizon {
            return Err(Error::Usage(format!("stage {} is outside 1..={}", node.stage, self.problem.horizon)));
        }
        if node.stage == 1 {
            return Ok(&self.problem.first_stage);
        }
        let support = self.problem.distribution.support(node.stage, node.parent)?;
        support.get(node.outcome_index).ok_or_else(|| {
            Error::Usage(format!(
                "stage {} has no outcome {} under parent {:?}",
                node.stage, node.outcome_index, node.parent
            ))
        })
    }

    fn check_u(&self, node: NodeRef, u: &[f64]) -> Result<()> {
        let expected = if node.stage == 1 { 0 } else { self.problem.stage(node.stage - 1).n };
        if u.len() != expected {
            return Err(Error::dim(format!(
                "stage {} expects a previous decision of length {expected}, got {}",
                node.stage,
                u.len()
            )));
        }
        if node.stage > 1 && !self.problem.stage(node.stage - 1).set().contains(u) {
            return Err(Error::Domain(format!(
                "previous decision for stage {} lies outside X^{}",
                node.stage,
                node.stage - 1
            )));
        }
        Ok(())
    }

    fn form(&self, node: NodeRef, u: &[f64], with_rows: bool, extra: Option<DenseVector>) -> Result<ExtensiveForm> {
        let outcome = self.outcome(node)?;
        build_extensive(
            self.problem,
            node.stage,
            u,
            vec![RootItem {
                outcome,
                outcome_index: node.outcome_index,
                weight: 1.0,
                with_rows,
                extra_linear: extra,
            }],
            true,
        )
    }

    fn solve_form(&self, node: NodeRef, ef: &ExtensiveForm) -> Result<pdhg::PdhgSolution> {
        match pdhg::solve(ef, self.opts) {
            Ok(s) => Ok(s),
            Err(e @ Error::NonConvergence { .. }) => {
                let infeas = pdhg::min_infeasibility(ef, 20_000)?;
                if infeas > INFEASIBLE_TOL {
                    Err(Error::Infeasible {
                        stage: node.stage,
                        outcome: node.outcome_index,
                        detail: format!("the scenario subtree violates its constraints by at least {infeas:.3e}"),
                    })
                } else {
                    Err(e)
                }
            }
            Err(e) => Err(e),
        }
    }

    /// `V^t(u, ξ)` with its primal minimizer and minimal-norm multiplier.
    pub fn stage_saddle(&self, node: NodeRef, u: &[f64]) -> Result<StageSolution> {
        self.check_u(node, u)?;
        let ef = self.form(node, u, true, None)?;
        let sol = self.solve_form(node, &ef)?;
        let root = ef.roots[0];
        let x = ef.node_x(&sol.x, root);
        let y = match ef.node_y(&sol.y, root) {
            Some(y) => self.minimal_norm_dual(node, u, &x, y)?,
            None => DenseVector::zeros(0),
        };
        Ok(StageSolution {
            x,
            y,
            value: sol.primal,
            residual: sol.residual,
            iterations: sol.iterations,
        })
    }

    /// Remove the component of `y` in the null space of Aᵀ when that keeps
    /// it a valid multiplier (dual-cone membership and complementarity).
    fn minimal_norm_dual(&self, node: NodeRef, u: &[f64], x: &[f64], y: DenseVector) -> Result<DenseVector> {
        let outcome = self.outcome(node)?;
        let svd = Svd::compute(&outcome.a)?;
        let projected = svd.project_onto_range(&y);
        let cone = self.problem.stage(node.stage).cone;
        let slack = {
            let mut s = outcome.a.matvec(x);
            s.axpy(-1.0, &outcome.b);
            s.axpy(-1.0, &outcome.b_mat.matvec(u));
            s
        };
        let in_cone = cone.dual_distance(&projected)? <= 1e-12 * (1.0 + projected.norm());
        let comp_before = dot(&y, &slack).abs();
        let comp_after = dot(&projected, &slack).abs();
        if in_cone && comp_after <= comp_before + 1e-10 {
            Ok(projected)
        } else {
            Ok(y)
        }
    }

    /// `E[V^t(u, ξ^t) | parent]` and the per-outcome solutions.
    pub fn value_function(&self, stage: usize, parent: Option<usize>, u: &[f64]) -> Result<(f64, Vec<StageSolution>)> {
        if stage < 2 || stage > self.problem.horizon {
            return Err(Error::Usage(format!("value functions exist for stages 2..={}", self.problem.horizon)));
        }
        let support = self.problem.distribution.support(stage, parent)?;
        let mut total = 0.0;
        let mut sols = Vec::with_capacity(support.len());
        for (j, o) in support.iter().enumerate() {
            let s = self.stage_saddle(
                NodeRef {
                    stage,
                    parent,
                    outcome_index: j,
                },
                u,
            )?;
            total += o.prob * s.value;
            sols.push(s);
        }
        Ok((total, sols))
    }

    /// `ṽ(x) = E[V^{t+1}(x, ξ^{t+1}) | node]`; zero at the last stage.
    pub fn downstream_value(&self, node: NodeRef, x: &[f64]) -> Result<f64> {
        if node.stage >= self.problem.horizon {
            return Ok(0.0);
        }
        Ok(self.value_function(node.stage + 1, Some(node.outcome_index), x)?.0)
    }

    /// Full stage cost `h(x) + F(x) + ṽ(x)`.
    pub fn stage_cost(&self, node: NodeRef, x: &[f64]) -> Result<f64> {
        let tmpl = self.problem.stage(node.stage);
        let obj = tmpl.objective_for(self.outcome(node)?);
        if x.len() != tmpl.n || !tmpl.set().contains(x) {
            return Err(Error::Domain(format!("candidate is not a point of X^{}", node.stage)));
        }
        Ok(obj.simple_value(x) + obj.coupling_value(x) + self.downstream_value(node, x)?)
    }

    /// `min_{x ∈ X} h(x) + F(x) + ṽ(x) − ⟨Aᵀȳ, x⟩`
    pub fn inner_min(&self, node: NodeRef, u: &[f64], y_bar: &[f64]) -> Result<f64> {
        self.check_u(node, u)?;
        let outcome = self.outcome(node)?;
        if y_bar.len() != outcome.a.rows() {
            return Err(Error::dim(format!(
                "dual candidate of length {} for {} constraint rows",
                y_bar.len(),
                outcome.a.rows()
            )));
        }
        let extra = outcome.a.matvec_t(y_bar).scaled(-1.0);
        let ef = self.form(node, u, false, Some(extra))?;
        Ok(self.solve_form(node, &ef)?.primal)
    }

    fn rhs(&self, node: NodeRef, u: &[f64]) -> Result<DenseVector> {
        let o = self.outcome(node)?;
        Ok(o.b.add(&o.b_mat.matvec(u)))
    }

    /// `gap_*(x̄, ȳ) = L(x̄, y_*) − min_x L(x, ȳ)` with `L = f + ⟨y, r − Ax⟩`.
    pub fn eval_gap_star(&self, node: NodeRef, u: &[f64], x_bar: &[f64], y_bar: &[f64], y_star: &[f64]) -> Result<f64> {
        let outcome = self.outcome(node)?;
        let r = self.rhs(node, u)?;
        if y_star.len() != r.dim() {
            return Err(Error::dim("y_* does not match the constraint rows"));
        }
        let resid = r.sub(&outcome.a.matvec(x_bar));
        let upper = self.stage_cost(node, x_bar)? + dot(y_star, &resid);
        let lower = dot(y_bar, &r) + self.inner_min(node, u, y_bar)?;
        Ok(upper - lower)
    }

    /// Perturbed gap with the dual supremum taken over `K_* ∩ {‖y‖ ≤ radius}`,
    /// plus the exact conic residual of `Ax̄ − r − δ`.
    #[allow(clippy::too_many_arguments)]
    pub fn eval_gap_delta(
        &self,
        node: NodeRef,
        u: &[f64],
        x_bar: &[f64],
        y_bar: &[f64],
        delta: &[f64],
        radius: f64,
        y_star: &[f64],
    ) -> Result<GapReport> {
        let outcome = self.outcome(node)?;
        let cone = self.problem.stage(node.stage).cone;
        let r = self.rhs(node, u)?;
        if delta.len() != r.dim() {
            return Err(Error::dim("δ does not match the constraint rows"));
        }
        let ax = outcome.a.matvec(x_bar);
        let shifted: Vec<f64> = (0..r.dim()).map(|i| r[i] - ax[i] + delta[i]).collect();
        let support = radius * project_dual_cone(&cone, &shifted)?.norm();
        let neg: Vec<f64> = shifted.iter().map(|v| -v).collect();
        let feasibility_residual = cone.distance(&neg)?;

        let cost = self.stage_cost(node, x_bar)?;
        let lower = dot(y_bar, &r) + self.inner_min(node, u, y_bar)?;
        let gap_star = self.eval_gap_star(node, u, x_bar, y_bar, y_star)?;
        Ok(GapReport {
            gap_star,
            gap_delta: support + cost - lower,
            delta_norm: crate::numerics::norm2(delta),
            feasibility_residual,
            y_star_used: y_star.to_vec(),
        })
    }

    /// Feasibility of one node, `{x ∈ X : Ax − b − Bu ∈ K}` ≠ ∅, without
    /// looking at its descendants.
    pub fn node_feasible(&self, node: NodeRef, u: &[f64]) -> Result<f64> {
        let outcome = self.outcome(node)?;
        let ef = build_extensive(
            self.problem,
            node.stage,
            u,
            vec![RootItem {
                outcome,
                outcome_index: node.outcome_index,
                weight: 1.0,
                with_rows: true,
                extra_linear: None,
            }],
            false,
        )?;
        pdhg::min_infeasibility(&ef, 20_000)
    }

    /// Stage 1 must be feasible, and every stage-t outcome must be feasible
    /// at each extreme point of X^{t−1} (by convexity of the feasible-u set
    /// this covers all of X^{t−1} for polytopes).
    pub fn feasibility_precheck(&self) -> Result<()> {
        let p = self.problem;
        let fail = |node: NodeRef, d: f64, at: &str| Error::Infeasible {
            stage: node.stage,
            outcome: node.outcome_index,
            detail: format!("no feasible decision {at} (constraint violation {d:.3e})"),
        };
        let root = NodeRef::root();
        let d = self.node_feasible(root, &[])?;
        if d > INFEASIBLE_TOL {
            return Err(fail(root, d, "at the first stage"));
        }
        for t in 2..=p.horizon {
            let parents: Vec<Option<usize>> = match p.distribution.dependence {
                crate::model::Dependence::StagewiseIndependent => vec![Some(0)],
                crate::model::Dependence::ConditionalOnParentIndex => {
                    (0..p.distribution.tables[t - 2].len()).map(Some).collect()
                }
            };
            let corners = p.stage(t - 1).set().extreme_points();
            for parent in parents {
                for j in 0..p.distribution.support(t, parent)?.len() {
                    let node = NodeRef {
                        stage: t,
                        parent,
                        outcome_index: j,
                    };
                    for u in &corners {
                        let d = self.node_feasible(node, u)?;
                        if d > INFEASIBLE_TOL {
                            return Err(fail(node, d, "for some previous-stage decision"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Optimal first-stage decision and objective of the whole problem.
    pub fn first_stage_optimum(&self) -> Result<StageSolution> {
        self.stage_saddle(NodeRef::root(), &[])
    }
}

/// A cached cost function, quantized at 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedValue {
    pub value: f64,
    pub solutions: Vec<StageSolution>,
}

/// `v^t(u) = E[V^t(u, ξ^t) | parent]` with a query cache. Single writer;
/// once filled, `cached` lookups can be shared.
#[derive(Debug)]
pub struct ExactValueFn<'e, 'p> {
    engine: &'e ReferenceEngine<'p>,
    pub stage: usize,
    pub parent: Option<usize>,
    cache: HashMap<Vec<i64>, CachedValue>,
}

const QUANTUM: f64 = 1e-9;

fn quantize(u: &[f64]) -> Vec<i64> {
    u.iter().map(|v| (v / QUANTUM).round() as i64).collect()
}

impl<'e, 'p> ExactValueFn<'e, 'p> {
    pub fn new(engine: &'e ReferenceEngine<'p>, stage: usize, parent: Option<usize>) -> Self {
        ExactValueFn {
            engine,
            stage,
            parent,
            cache: HashMap::new(),
        }
    }

    pub fn evaluate(&mut self, u: &[f64]) -> Result<&CachedValue> {
        let key = quantize(u);
        if !self.cache.contains_key(&key) {
            let (value, solutions) = self.engine.value_function(self.stage, self.parent, u)?;
            self.cache.insert(key.clone(), CachedValue { value, solutions });
        }
        Ok(&self.cache[&key])
    }

    pub fn cached(&self, u: &[f64]) -> Option<&CachedValue> {
        self.cache.get(&quantize(u))
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

/// Anything that can be evaluated pointwise for an ε-subgradient check.
pub trait ValueOracle {
    fn value(&mut self, u: &[f64]) -> Result<f64>;
}

impl ValueOracle for ExactValueFn<'_, '_> {
    fn value(&mut self, u: &[f64]) -> Result<f64> {
        Ok(self.evaluate(u)?.value)
    }
}

impl<F: FnMut(&[f64]) -> f64> ValueOracle for F {
    fn value(&mut self, u: &[f64]) -> Result<f64> {
        Ok(self(u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsSubgradientCheck {
    pub pass: bool,
    /// `max_{u'} v(u) + ⟨g, u' − u⟩ − eps − v(u')`, or −∞ on an empty grid.
    pub worst_violation: f64,
}

/// Pass iff `v(u') ≥ v(u) + ⟨g, u' − u⟩ − eps − 1e-8` on every grid point.
pub fn check_eps_subgradient(
    v: &mut dyn ValueOracle,
    u: &[f64],
    g: &[f64],
    eps: f64,
    grid: &[DenseVector],
) -> Result<EpsSubgradientCheck> {
    if g.len() != u.len() {
        return Err(Error::dim("subgradient and point differ in length"));
    }
    let vu = v.value(u)?;
    let mut worst = f64::NEG_INFINITY;
    for up in grid {
        up.check_dim(u.len(), "grid point")?;
        let lin: f64 = g.iter().zip(up.iter().zip(u)).map(|(gi, (a, b))| gi * (a - b)).sum();
        worst = worst.max(vu + lin - eps - v.value(up)?);
    }
    Ok(EpsSubgradientCheck {
        pass: worst <= 1e-8,
        worst_violation: worst,
    })
}

#[cfg(test)]
mod tests;
