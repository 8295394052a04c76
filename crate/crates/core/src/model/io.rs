//! JSON problem format.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use super::{
    Dependence, MultistageProblem, ObjectiveKind, Outcome, PiecewiseLinearMax, ScenarioDistribution,
    StageTemplate,
};
use crate::error::{Error, Result};
use crate::geometry::{Cone, Dgf, FeasibleSet, ProxSetup};
use crate::numerics::{spectral_norm, DenseMatrix, DenseVector};

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    version: u32,
    #[serde(rename = "T")]
    horizon: usize,
    stages: Vec<StageFile>,
    first_stage: FirstStageFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenarios: Option<ScenariosFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundsFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    n: usize,
    m: usize,
    set: SetFile,
    #[serde(default = "default_dgf")]
    dgf: Dgf,
    cone: ConeFile,
    objective: ObjectiveFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coupling: Option<CouplingFile>,
}

fn default_dgf() -> Dgf {
    Dgf::Euclidean
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SetFile {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Simplex { radius: f64 },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConeFile {
    kind: ConeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ConeKind {
    Zero,
    Nonneg,
    Soc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ObjectiveFile {
    Linear,
    QuadPlusLinear {
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingFile {
    slopes: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FirstStageFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenariosFile {
    dependence: DependenceFile,
    stages: Vec<StageSupportFile>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DependenceFile {
    StagewiseIndependent,
    Conditional,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageSupportFile {
    support: SupportFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SupportFile {
    Flat(Vec<OutcomeFile>),
    ByParent(Vec<Vec<OutcomeFile>>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b_mat: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsFile {
    #[serde(rename = "B_norm")]
    b_norm: Vec<f64>,
}

/// Parse and validate a problem file.
pub fn parse_problem(text: &[u8]) -> Result<MultistageProblem> {
    let de = &mut serde_json::Deserializer::from_slice(text);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    build(file)
}

/// Serialize with every float written to 17 significant digits.
pub fn serialize_problem(problem: &MultistageProblem) -> Result<String> {
    let file = unbuild(problem);
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats::default());
    file.serialize(&mut ser)
        .map_err(|e| Error::Validation(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Pretty JSON formatter that prints floats as `{:.16e}`.
#[derive(Default)]
pub struct ExactFloats<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn vector(v: Vec<f64>, len: usize, what: &str) -> Result<DenseVector> {
    if v.len() != len {
        return Err(invalid(format!("{what}: expected length {len}, got {}", v.len())));
    }
    DenseVector::new(v).map_err(|e| invalid(format!("{what}: {e}")))
}

fn matrix(rows: Vec<Vec<f64>>, m: usize, n: usize, what: &str) -> Result<DenseMatrix> {
    if rows.len() != m {
        return Err(invalid(format!("{what}: expected {m} rows, got {}", rows.len())));
    }
    DenseMatrix::from_rows(&rows, n).map_err(|e| invalid(format!("{what}: {e}")))
}

fn build(file: ProblemFile) -> Result<MultistageProblem> {
    if file.version != 1 {
        return Err(invalid(format!("unsupported version {}", file.version)));
    }
    let horizon = file.horizon;
    if horizon < 1 {
        return Err(invalid("T must be at least 1"));
    }
    if file.stages.len() != horizon {
        return Err(invalid(format!("T = {horizon} but {} stages given", file.stages.len())));
    }

    let mut stages = Vec::with_capacity(horizon);
    for (i, s) in file.stages.into_iter().enumerate() {
        stages.push(build_stage(i + 1, horizon, s)?);
    }

    let s1 = &stages[0];
    let first_stage = Outcome {
        a: matrix(file.first_stage.a, s1.m, s1.n, "first_stage.A")?,
        b_mat: DenseMatrix::zeros(s1.m, 0),
        b: vector(file.first_stage.b, s1.m, "first_stage.b")?,
        c: vector(file.first_stage.c, s1.n, "first_stage.c")?,
        p: None,
        prob: 1.0,
    };

    let distribution = match file.scenarios {
        None if horizon == 1 => ScenarioDistribution::empty(),
        None => return Err(invalid("scenarios are required when T > 1")),
        Some(sc) => build_distribution(sc, &stages)?,
    };

    let mut bound_b = Vec::with_capacity(horizon.saturating_sub(1));
    for t in 2..=horizon {
        let mut largest: f64 = 0.0;
        for o in distribution.all_outcomes(t) {
            if !o.b_mat.is_empty() {
                largest = largest.max(spectral_norm(&o.b_mat)?);
            }
        }
        bound_b.push(largest);
    }
    if let Some(bounds) = file.bounds {
        if bounds.b_norm.len() != bound_b.len() {
            return Err(invalid(format!(
                "bounds.B_norm: expected {} entries (stages 2..T), got {}",
                bound_b.len(),
                bounds.b_norm.len()
            )));
        }
        for (i, (given, actual)) in bounds.b_norm.iter().zip(&bound_b).enumerate() {
            if !(given.is_finite() && *given >= actual * (1.0 - 1e-12)) {
                return Err(invalid(format!(
                    "‖B‖ ≤ 𝓑 violated at stage {}: ‖B‖ = {actual}, declared bound {given}",
                    i + 2
                )));
            }
        }
        bound_b = bounds.b_norm;
    }

    Ok(MultistageProblem {
        horizon,
        stages,
        first_stage,
        distribution,
        bound_b,
    })
}

fn build_stage(index: usize, horizon: usize, s: StageFile) -> Result<StageTemplate> {
    let tag = |what: &str| format!("stage {index} {what}");
    let set = match s.set {
        SetFile::Box { lower, upper } => FeasibleSet::new_box(
            vector(lower, s.n, &tag("set.lower"))?,
            vector(upper, s.n, &tag("set.upper"))?,
        )?,
        SetFile::Simplex { radius } => FeasibleSet::new_simplex(s.n, radius)?,
        SetFile::Ball { center, radius } => {
            FeasibleSet::new_ball(vector(center, s.n, &tag("set.center"))?, radius)?
        }
    };
    let prox = ProxSetup::new(set, s.dgf).map_err(|e| invalid(format!("stage {index}: {e}")))?;

    let dim = s.cone.dim.unwrap_or(s.m);
    if dim != s.m {
        return Err(invalid(format!("stage {index}: cone dimension {dim} differs from m = {}", s.m)));
    }
    let cone = match s.cone.kind {
        ConeKind::Zero => Cone::Zero(dim),
        ConeKind::Nonneg => Cone::NonnegOrthant(dim),
        ConeKind::Soc => Cone::SecondOrder(dim),
    };

    let objective = match s.objective {
        ObjectiveFile::Linear => ObjectiveKind::Linear,
        ObjectiveFile::QuadPlusLinear { mu, center } => {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(invalid(format!("stage {index}: quad_plus_linear needs mu > 0")));
            }
            if s.dgf == Dgf::Entropy {
                return Err(invalid(format!(
                    "stage {index}: quad_plus_linear is only supported with the euclidean dgf"
                )));
            }
            let center = match center {
                Some(c) => vector(c, s.n, &tag("objective.center"))?,
                None => prox.prox_center.clone(),
            };
            ObjectiveKind::QuadPlusLinear { mu, center }
        }
    };

    let coupling = match s.coupling {
        None => None,
        Some(cf) => {
            if index == 1 || index == horizon {
                return Err(invalid(format!(
                    "stage {index}: a coupling term is only allowed on stages 2..T-1"
                )));
            }
            let rows = cf.slopes.len();
            if rows == 0 {
                return Err(invalid(format!("stage {index}: coupling needs at least one piece")));
            }
            Some(PiecewiseLinearMax {
                slopes: matrix(cf.slopes, rows, s.n, &tag("coupling.slopes"))?,
                offsets: vector(cf.offsets, rows, &tag("coupling.offsets"))?,
            })
        }
    };

    Ok(StageTemplate {
        index,
        n: s.n,
        m: s.m,
        prox,
        cone,
        objective,
        coupling,
    })
}

fn build_distribution(sc: ScenariosFile, stages: &[StageTemplate]) -> Result<ScenarioDistribution> {
    let horizon = stages.len();
    if sc.stages.len() != horizon - 1 {
        return Err(invalid(format!(
            "scenarios.stages: expected {} entries (stages 2..T), got {}",
            horizon - 1,
            sc.stages.len()
        )));
    }
    let dependence = match sc.dependence {
        DependenceFile::StagewiseIndependent => Dependence::StagewiseIndependent,
        DependenceFile::Conditional => Dependence::ConditionalOnParentIndex,
    };
    let mut tables = Vec::with_capacity(horizon - 1);
    let mut parent_count = 1usize;
    for (i, st) in sc.stages.into_iter().enumerate() {
        let t = i + 2;
        let lists = match (dependence, st.support) {
            (Dependence::StagewiseIndependent, SupportFile::Flat(list)) => vec![list],
            (Dependence::ConditionalOnParentIndex, SupportFile::ByParent(lists)) => {
                if lists.len() != parent_count {
                    return Err(invalid(format!(
                        "stage {t}: conditional table has {} entries, expected one per stage-{} outcome index ({parent_count})",
                        lists.len(),
                        t - 1
                    )));
                }
                lists
            }
            (Dependence::StagewiseIndependent, SupportFile::ByParent(_)) => {
                return Err(invalid(format!("stage {t}: nested support lists require conditional dependence")))
            }
            (Dependence::ConditionalOnParentIndex, SupportFile::Flat(list)) if list.is_empty() => {
                return Err(invalid(format!("stage {t}: empty support")))
            }
            (Dependence::ConditionalOnParentIndex, SupportFile::Flat(_)) => {
                return Err(invalid(format!("stage {t}: conditional dependence needs one support list per parent outcome")))
            }
        };
        let tmpl = &stages[t - 1];
        let prev_n = stages[t - 2].n;
        let mut table = Vec::with_capacity(lists.len());
        for (j, list) in lists.into_iter().enumerate() {
            if list.is_empty() {
                return Err(invalid(format!("stage {t}: empty support")));
            }
            let mut outcomes = Vec::with_capacity(list.len());
            let mut total = 0.0;
            for (k, o) in list.into_iter().enumerate() {
                let what = |f: &str| format!("stage {t} support[{j}][{k}].{f}");
                if !(o.prob > 0.0 && o.prob.is_finite()) {
                    return Err(invalid(format!("{}: probabilities must be positive", what("prob"))));
                }
                total += o.prob;
                let p = match (&tmpl.coupling, o.p) {
                    (Some(f), Some(p)) => Some(vector(p, f.pieces(), &what("p"))?),
                    (Some(_), None) => {
                        return Err(invalid(format!("{}: required by the stage coupling term", what("p"))))
                    }
                    (None, Some(_)) => {
                        return Err(invalid(format!("{}: given but the stage has no coupling term", what("p"))))
                    }
                    (None, None) => None,
                };
                outcomes.push(Outcome {
                    a: matrix(o.a, tmpl.m, tmpl.n, &what("A"))?,
                    b_mat: matrix(o.b_mat, tmpl.m, prev_n, &what("B"))?,
                    b: vector(o.b, tmpl.m, &what("b"))?,
                    c: vector(o.c, tmpl.n, &what("c"))?,
                    p,
                    prob: o.prob,
                });
            }
            if (total - 1.0).abs() > PROB_TOL {
                return Err(invalid(format!(
                    "stage {t}: probabilities must sum to 1 (got {total})"
                )));
            }
            table.push(outcomes);
        }
        parent_count = match dependence {
            Dependence::StagewiseIndependent => table[0].len(),
            Dependence::ConditionalOnParentIndex => table.iter().map(Vec::len).max().unwrap_or(0),
        };
        tables.push(table);
    }
    Ok(ScenarioDistribution { dependence, tables })
}

fn unbuild(p: &MultistageProblem) -> ProblemFile {
    let stages = p
        .stages
        .iter()
        .map(|s| StageFile {
            n: s.n,
            m: s.m,
            set: match &s.prox.set {
                FeasibleSet::Box { lower, upper } => SetFile::Box {
                    lower: lower.to_vec(),
                    upper: upper.to_vec(),
                },
                FeasibleSet::Simplex { radius, .. } => SetFile::Simplex { radius: *radius },
                FeasibleSet::Ball { center, radius } => SetFile::Ball {
                    center: center.to_vec(),
                    radius: *radius,
                },
            },
            dgf: s.prox.dgf,
            cone: ConeFile {
                kind: match s.cone {
                    Cone::Zero(_) => ConeKind::Zero,
                    Cone::NonnegOrthant(_) => ConeKind::Nonneg,
                    Cone::SecondOrder(_) => ConeKind::Soc,
                },
                dim: Some(s.cone.dim()),
            },
            objective: match &s.objective {
                ObjectiveKind::Linear => ObjectiveFile::Linear,
                ObjectiveKind::QuadPlusLinear { mu, center } => ObjectiveFile::QuadPlusLinear {
                    mu: *mu,
                    center: Some(center.to_vec()),
                },
            },
            coupling: s.coupling.as_ref().map(|f| CouplingFile {
                slopes: f.slopes.to_rows(),
                offsets: f.offsets.to_vec(),
            }),
        })
        .collect();
    let outcome = |o: &Outcome| OutcomeFile {
        a: o.a.to_rows(),
        b_mat: o.b_mat.to_rows(),
        b: o.b.to_vec(),
        c: o.c.to_vec(),
        prob: o.prob,
        p: o.p.as_ref().map(|v| v.to_vec()),
    };
    let scenarios = (p.horizon > 1).then(|| ScenariosFile {
        dependence: match p.distribution.dependence {
            Dependence::StagewiseIndependent => DependenceFile::StagewiseIndependent,
            Dependence::ConditionalOnParentIndex => DependenceFile::Conditional,
        },
        stages: p
            .distribution
            .tables
            .iter()
            .map(|table| StageSupportFile {
                support: match p.distribution.dependence {
                    Dependence::StagewiseIndependent => {
                        SupportFile::Flat(table[0].iter().map(outcome).collect())
                    }
                    Dependence::ConditionalOnParentIndex => SupportFile::ByParent(
                        table.iter().map(|l| l.iter().map(outcome).collect()).collect(),
                    ),
                },
            })
            .collect(),
    });
    ProblemFile {
        version: 1,
        horizon: p.horizon,
        stages,
        first_stage: FirstStageFile {
            a: p.first_stage.a.to_rows(),
            b: p.first_stage.b.to_vec(),
            c: p.first_stage.c.to_vec(),
        },
        scenarios,
        bounds: (p.horizon > 1).then(|| BoundsFile {
            b_norm: p.bound_b.clone(),
        }),
    }
}
