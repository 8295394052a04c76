use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector};

use super::SeededStream;

/// One realization `ξ = (A, B, b, c, p)` with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub a: DenseMatrix,
    /// Coupling map to the previous stage's decision.
    pub b_mat: DenseMatrix,
    pub b: DenseVector,
    pub c: DenseVector,
    pub p: Option<DenseVector>,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    StagewiseIndependent,
    /// Stage-t support lists are indexed by the stage-(t−1) outcome index.
    ConditionalOnParentIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDistribution {
    pub dependence: Dependence,
    /// `tables[t-2][parent]` is the stage-t support. Independent stages
    /// hold a single list.
    pub tables: Vec<Vec<Vec<Outcome>>>,
}

impl ScenarioDistribution {
    pub fn empty() -> Self {
        ScenarioDistribution {
            dependence: Dependence::StagewiseIndependent,
            tables: Vec::new(),
        }
    }

    pub fn support(&self, stage: usize, parent_index: Option<usize>) -> Result<&[Outcome]> {
        if stage < 2 || stage - 2 >= self.tables.len() {
            return Err(Error::Usage(format!("no scenario distribution for stage {stage}")));
        }
        let table = &self.tables[stage - 2];
        match self.dependence {
            Dependence::StagewiseIndependent => Ok(&table[0]),
            Dependence::ConditionalOnParentIndex => {
                let parent = parent_index.ok_or_else(|| {
                    Error::Usage(format!(
                        "stage {stage} is conditionally distributed; a parent outcome index is required"
                    ))
                })?;
                table.get(parent).map(|v| v.as_slice()).ok_or_else(|| {
                    Error::Usage(format!("stage {stage} has no support for parent outcome {parent}"))
                })
            }
        }
    }

    pub fn all_outcomes(&self, stage: usize) -> Vec<&Outcome> {
        self.tables
            .get(stage.wrapping_sub(2))
            .map(|t| t.iter().flatten().collect())
            .unwrap_or_default()
    }
}

/// Draw one stage-`stage` outcome from the stream's first uniform.
pub fn sample_outcome<'a>(
    dist: &'a ScenarioDistribution,
    stage: usize,
    parent_index: Option<usize>,
    stream: &SeededStream,
) -> Result<(usize, &'a Outcome)> {
    let support = dist.support(stage, parent_index)?;
    Ok(pick(support, stream.uniform()))
}

fn pick(support: &[Outcome], u: f64) -> (usize, &Outcome) {
    let mut cumulative = 0.0;
    for (i, o) in support.iter().enumerate() {
        cumulative += o.prob;
        if u < cumulative {
            return (i, o);
        }
    }
    let last = support.len() - 1;
    (last, &support[last])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(prob: f64) -> Outcome {
        Outcome {
            a: DenseMatrix::zeros(0, 1),
            b_mat: DenseMatrix::zeros(0, 1),
            b: DenseVector::zeros(0),
            c: DenseVector::zeros(1),
            p: None,
            prob,
        }
    }

    fn two_point() -> ScenarioDistribution {
        ScenarioDistribution {
            dependence: Dependence::StagewiseIndependent,
            tables: vec![vec![vec![outcome(0.5), outcome(0.5)]]],
        }
    }

    #[test]
    fn single_outcome_is_certain() {
        let d = ScenarioDistribution {
            dependence: Dependence::StagewiseIndependent,
            tables: vec![vec![vec![outcome(1.0)]]],
        };
        for i in 0..20 {
            assert_eq!(sample_outcome(&d, 2, None, &SeededStream::new(i)).unwrap().0, 0);
        }
    }

    #[test]
    fn fair_coin_frequency() {
        let d = two_point();
        let root = SeededStream::new(11);
        let zeros = (0..100_000)
            .filter(|&k| sample_outcome(&d, 2, None, &root.child(2, k)).unwrap().0 == 0)
            .count();
        let freq = zeros as f64 / 1e5;
        assert!((0.494..=0.506).contains(&freq), "frequency {freq}");
    }

    #[test]
    fn replay_is_identical() {
        let d = two_point();
        let draw = |seed| {
            (0..50)
                .map(|k| sample_outcome(&d, 2, None, &SeededStream::new(seed).child(2, k)).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }

    #[test]
    fn conditional_needs_parent() {
        let d = ScenarioDistribution {
            dependence: Dependence::ConditionalOnParentIndex,
            tables: vec![vec![vec![outcome(1.0)]]],
        };
        assert!(matches!(sample_outcome(&d, 2, None, &SeededStream::new(0)), Err(Error::Usage(_))));
        assert!(sample_outcome(&d, 2, Some(0), &SeededStream::new(0)).is_ok());
    }
}
