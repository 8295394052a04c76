use crate::error::Result;
use crate::model::SeededStream;
use crate::numerics::DenseVector;

use super::{advance, SaddleState, Schedule, StageBinding};

/// Supplies the stochastic subgradient `G` of the downstream value function
/// at the stage's pre-step iterate.
pub trait SubgradientOracle {
    /// `k` is the 1-based outer iteration; `stream` is the stage run's own
    /// stream, from which per-iteration children are derived.
    fn subgradient(&mut self, x: &[f64], k: usize, stream: &SeededStream) -> Result<DenseVector>;
}

/// The last stage has no downstream value function.
pub struct ZeroOracle;

impl SubgradientOracle for ZeroOracle {
    fn subgradient(&mut self, x: &[f64], _k: usize, _stream: &SeededStream) -> Result<DenseVector> {
        Ok(DenseVector::zeros(x.len()))
    }
}

impl<F> SubgradientOracle for F
where
    F: FnMut(&[f64], usize, &SeededStream) -> Result<DenseVector>,
{
    fn subgradient(&mut self, x: &[f64], k: usize, stream: &SeededStream) -> Result<DenseVector> {
        self(x, k, stream)
    }
}

#[derive(Debug, Clone)]
pub struct IpdsaOutput {
    pub state: SaddleState,
    pub x_bar: DenseVector,
    pub y_bar: DenseVector,
    /// `(x_k, y_k)` for k = 1..N when tracing was requested.
    pub trace: Option<Vec<(DenseVector, DenseVector)>>,
}

/// N SPDT steps with one oracle query per step, returning the weighted
/// averages. Oracle errors are tagged with (stage, k).
pub fn ipdsa_run(
    binding: &StageBinding,
    schedule: &Schedule,
    init: SaddleState,
    stream: &SeededStream,
    oracle: &mut dyn SubgradientOracle,
    trace: bool,
) -> Result<IpdsaOutput> {
    let stage = binding.template.index;
    let mut state = init;
    state.weight_sum = 0.0;
    let mut iterates = trace.then(|| Vec::with_capacity(schedule.n));
    for k in 1..=schedule.n {
        let g = oracle
            .subgradient(&state.x, k, stream)
            .map_err(|e| e.at(stage, k))?;
        advance(&mut state, binding, &g, schedule.theta(k), schedule.tau(k), schedule.eta(k))
            .map_err(|e| e.at(stage, k))?;
        state.accumulate(schedule.w(k));
        if let Some(it) = iterates.as_mut() {
            it.push((state.x.clone(), state.y.clone()));
        }
    }
    Ok(IpdsaOutput {
        x_bar: state.avg_x.clone(),
        y_bar: state.avg_y.clone(),
        state,
        trace: iterates,
    })
}
