use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_outcome, Dependence, MultistageProblem, Outcome, SeededStream, StageObjective};
use crate::numerics::{spectral_norm, DenseVector};
use crate::saddle::{
    extract_subgradient, ipdsa_run, make_schedule, perturbation_delta, IpdsaOutput, SaddleState, Schedule,
    ScheduleConstants, StageBinding, SubgradientOracle, ZeroOracle,
};

use super::ledger::ConstantsLedger;
use super::planner::SamplePlan;
use super::{stage_variant, Regime};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub report_version: u32,
    pub seed: u64,
    pub x_bar_1: Vec<f64>,
    pub y_bar_1: Vec<f64>,
    pub delta: Vec<f64>,
    pub budgets_used: Vec<usize>,
    /// Samples drawn at stages 2..T.
    pub scenario_counts: Vec<u64>,
    pub peak_live_states: usize,
    pub wall_time: f64,
    pub plan: SamplePlan,
    pub ledger: ConstantsLedger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TracePoint>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    /// Record the first-stage iterates.
    pub trace: bool,
}

/// Realized ‖A‖ of every outcome, laid out like the scenario tables.
fn outcome_norms(problem: &MultistageProblem) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut out = vec![vec![vec![spectral_norm(&problem.first_stage.a)?]]];
    for table in &problem.distribution.tables {
        out.push(
            table
                .iter()
                .map(|list| list.iter().map(|o| spectral_norm(&o.a)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(out)
}

/// Shared read-only context of one run.
pub struct StageRunner<'p> {
    problem: &'p MultistageProblem,
    plan: &'p SamplePlan,
    ledger: &'p ConstantsLedger,
    norms: Vec<Vec<Vec<f64>>>,
    counts: Vec<u64>,
    live: usize,
    peak_live: usize,
}

impl<'p> StageRunner<'p> {
    pub fn new(problem: &'p MultistageProblem, plan: &'p SamplePlan, ledger: &'p ConstantsLedger) -> Result<Self> {
        let horizon = problem.horizon;
        if plan.horizon != horizon || plan.budgets.len() != horizon || ledger.horizon() != horizon {
            return Err(Error::Usage(format!(
                "plan ({} stages) and ledger ({} stages) do not match the {horizon}-stage problem",
                plan.budgets.len(),
                ledger.horizon()
            )));
        }
        if plan.regime == Regime::Strong && !problem.strongly_convex() {
            return Err(Error::Usage("a strongly convex plan needs μ > 0 at every stage".into()));
        }
        Ok(StageRunner {
            problem,
            plan,
            ledger,
            norms: outcome_norms(problem)?,
            counts: vec![0; horizon.saturating_sub(1)],
            live: 0,
            peak_live: 0,
        })
    }

    fn norm(&self, stage: usize, parent: usize, j: usize) -> f64 {
        let table = &self.norms[stage - 1];
        let list = match self.problem.distribution.dependence {
            Dependence::StagewiseIndependent => &table[0],
            Dependence::ConditionalOnParentIndex => &table[if stage == 1 { 0 } else { parent }],
        };
        list[j]
    }

    /// Step schedule of stage t for an outcome with constraint norm `norm_a`.
    pub fn schedule(&self, t: usize, norm_a: f64) -> Result<Schedule> {
        let c = self.ledger.stage(t);
        let variant = stage_variant(t, self.problem.horizon, self.plan.regime);
        make_schedule(
            variant,
            self.plan.budget(t),
            ScheduleConstants {
                norm_a,
                alpha: c.alpha,
                omega_sq: c.omega_sq,
                m: self.ledger.m_at(t + 1),
                mu: if variant.is_strong() { c.mu } else { 0.0 },
            },
        )
        .map_err(|e| Error::Config(format!("stage {t}: {e}")))
    }

    pub fn peak_live_states(&self) -> usize {
        self.peak_live
    }

    pub fn scenario_counts(&self) -> &[u64] {
        &self.counts
    }

    /// IPDSA at stage t for one realized outcome, recursing into stage t + 1
    /// once per outer iteration.
    pub fn run_stage(
        &mut self,
        t: usize,
        outcome: &'p Outcome,
        outcome_index: usize,
        norm_a: f64,
        u: DenseVector,
        stream: &SeededStream,
        trace: bool,
    ) -> Result<(IpdsaOutput, Schedule)> {
        let problem = self.problem;
        let template = problem.stage(t);
        let binding = StageBinding::new(template, outcome, u)?;
        let schedule = self.schedule(t, norm_a)?;
        self.live += 1;
        self.peak_live = self.peak_live.max(self.live);
        let init = SaddleState::initial(template);
        let out = if t == problem.horizon {
            ipdsa_run(&binding, &schedule, init, stream, &mut ZeroOracle, trace)
        } else {
            let mut down = Downstream {
                runner: self,
                stage: t,
                outcome_index,
                objective: binding.objective.clone(),
            };
            ipdsa_run(&binding, &schedule, init, stream, &mut down, trace)
        };
        self.live -= 1;
        Ok((out?, schedule))
    }

    /// `Bᵀȳ` of one stage-t subproblem at a freshly sampled outcome under
    /// `parent`, exactly as stage t − 1 would obtain it (without F′).
    pub fn sample_subgradient(&mut self, t: usize, parent: usize, x: &[f64], stream: &SeededStream) -> Result<DenseVector> {
        let problem = self.problem;
        let (j, o) = sample_outcome(&problem.distribution, t, Some(parent), stream)?;
        self.counts[t - 2] += 1;
        let norm = self.norm(t, parent, j);
        let (out, _) = self.run_stage(t, o, j, norm, DenseVector::from(x.to_vec()), stream, false)?;
        extract_subgradient(&o.b_mat, &out.y_bar, None)
    }
}

struct Downstream<'r, 'p> {
    runner: &'r mut StageRunner<'p>,
    stage: usize,
    outcome_index: usize,
    objective: StageObjective,
}

impl SubgradientOracle for Downstream<'_, '_> {
    fn subgradient(&mut self, x: &[f64], k: usize, stream: &SeededStream) -> Result<DenseVector> {
        let child = stream.child(self.stage + 1, k);
        let mut g = self.runner.sample_subgradient(self.stage + 1, self.outcome_index, x, &child)?;
        if let Some(fp) = self.objective.coupling_subgradient(x) {
            g.axpy(1.0, &fp);
        }
        Ok(g)
    }
}

/// The nested DSA recursion from stage 1.
pub fn dsa_solve(
    problem: &MultistageProblem,
    plan: &SamplePlan,
    ledger: &ConstantsLedger,
    root_seed: u64,
    opts: SolveOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let mut runner = StageRunner::new(problem, plan, ledger)?;
    let stream = SeededStream::new(root_seed);
    let norm = runner.norm(1, 0, 0);
    let (out, schedule) = runner.run_stage(1, &problem.first_stage, 0, norm, DenseVector::zeros(0), &stream, opts.trace)?;
    let y0 = DenseVector::zeros(problem.stage(1).m);
    let delta = perturbation_delta(&schedule, &y0, &out.state.y)?;
    let trace = out.trace.map(|it| {
        it.into_iter()
            .enumerate()
            .map(|(i, (x, y))| TracePoint {
                k: i + 1,
                x: x.into_inner(),
                y: y.into_inner(),
            })
            .collect()
    });
    Ok(SolveReport {
        report_version: REPORT_VERSION,
        seed: root_seed,
        x_bar_1: out.x_bar.into_inner(),
        y_bar_1: out.y_bar.into_inner(),
        delta: delta.into_inner(),
        budgets_used: plan.budgets.clone(),
        scenario_counts: runner.counts.clone(),
        peak_live_states: runner.peak_live,
        wall_time: start.elapsed().as_secs_f64(),
        plan: plan.clone(),
        ledger: ledger.clone(),
        diagnostics: None,
        trace,
    })
}
