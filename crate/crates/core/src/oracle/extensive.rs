//! Deterministic equivalent of a scenario subtree.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::geometry::{Cone, FeasibleSet};
use crate::model::{MultistageProblem, ObjectiveKind, Outcome};
use crate::numerics::{dot, DenseMatrix, DenseVector};

#[derive(Debug, Clone)]
pub(crate) enum BlockKind {
    /// `w (μ/2)‖x − center‖² + ⟨lin, x⟩` over `set` (lin already weighted).
    Decision {
        set: FeasibleSet,
        wmu: f64,
        center: DenseVector,
        lin: DenseVector,
    },
    /// Epigraph variable of a piecewise-linear term, cost `weight · s`.
    Epigraph { lo: f64, hi: f64, weight: f64 },
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub cols: Range<usize>,
    pub kind: BlockKind,
}

impl Block {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.local_value(&x[self.cols.clone()])
    }

    pub fn local_value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            BlockKind::Decision { wmu, center, lin, .. } => {
                let q: f64 = x.iter().zip(center.iter()).map(|(a, c)| (a - c) * (a - c)).sum();
                0.5 * wmu * q + dot(lin, x)
            }
            BlockKind::Epigraph { weight, .. } => weight * x[0],
        }
    }

    /// `argmin_{x ∈ set} f_b(x) + ⟨q, x⟩ + ‖x − z‖² / (2 step)`; an infinite
    /// step gives the exact minimizer of `f_b + ⟨q, ·⟩`.
    pub fn prox(&self, z: &[f64], q: &[f64], step: f64, out: &mut [f64]) {
        match &self.kind {
            BlockKind::Decision { set, wmu, center, lin } => {
                let inv = if step.is_finite() { 1.0 / step } else { 0.0 };
                let denom = inv + wmu;
                let res = if denom > 0.0 {
                    let p: Vec<f64> = (0..z.len())
                        .map(|i| (inv * z[i] + wmu * center[i] - lin[i] - q[i]) / denom)
                        .collect();
                    set.project(&p)
                } else {
                    let g: Vec<f64> = lin.iter().zip(q).map(|(a, b)| a + b).collect();
                    set.linear_min(&g).1
                };
                out.copy_from_slice(&res);
            }
            BlockKind::Epigraph { lo, hi, weight } => {
                let g = weight + q[0];
                out[0] = if step.is_finite() {
                    (z[0] - step * g).clamp(*lo, *hi)
                } else if g >= 0.0 {
                    *lo
                } else {
                    *hi
                };
            }
        }
    }

    /// `min_{x ∈ set} f_b(x) + ⟨q, x⟩`
    pub fn conjugate_min(&self, q: &[f64]) -> f64 {
        let z = vec![0.0; q.len()];
        let mut x = vec![0.0; q.len()];
        self.prox(&z, q, f64::INFINITY, &mut x);
        self.local_value(&x) + dot(q, &x)
    }

    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        match &self.kind {
            BlockKind::Decision { set, .. } => set.project(z).into_inner(),
            BlockKind::Epigraph { lo, hi, .. } => vec![z[0].clamp(*lo, *hi)],
        }
    }

    pub fn start(&self) -> Vec<f64> {
        match &self.kind {
            BlockKind::Decision { set, .. } => set.center().into_inner(),
            BlockKind::Epigraph { lo, hi, .. } => vec![0.5 * (lo + hi)],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RowBlock {
    pub rows: Range<usize>,
    pub cone: Cone,
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub block: usize,
    pub rows: Option<usize>,
}

/// `min Σ f_b(x_b)  s.t.  K x − r ∈ 𝒦,  x ∈ 𝒳`; node constraint rows are
/// scaled by the node probability so that their multipliers are the
/// per-scenario duals.
#[derive(Debug, Clone)]
pub(crate) struct ExtensiveForm {
    pub k: DenseMatrix,
    pub r: DenseVector,
    pub blocks: Vec<Block>,
    pub row_blocks: Vec<RowBlock>,
    pub nodes: Vec<Node>,
    /// Node ids of the root items, in order.
    pub roots: Vec<usize>,
}

pub(crate) struct RootItem<'a> {
    pub outcome: &'a Outcome,
    pub outcome_index: usize,
    pub weight: f64,
    pub with_rows: bool,
    pub extra_linear: Option<DenseVector>,
}

struct Builder<'a> {
    problem: &'a MultistageProblem,
    recurse: bool,
    cols: usize,
    rows: usize,
    blocks: Vec<Block>,
    row_blocks: Vec<RowBlock>,
    nodes: Vec<Node>,
    // (row, col, value) triplets and row right-hand sides.
    entries: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
}

/// Build the deterministic equivalent of the subtrees hanging from `items`
/// (all at stage `stage`, with previous decision `u` fixed). Without
/// `recurse` only the root nodes are built.
pub(crate) fn build_extensive(
    problem: &MultistageProblem,
    stage: usize,
    u: &[f64],
    items: Vec<RootItem<'_>>,
    recurse: bool,
) -> Result<ExtensiveForm> {
    let mut b = Builder {
        problem,
        recurse,
        cols: 0,
        rows: 0,
        blocks: Vec::new(),
        row_blocks: Vec::new(),
        nodes: Vec::new(),
        entries: Vec::new(),
        rhs: Vec::new(),
    };
    let mut roots = Vec::with_capacity(items.len());
    for item in items {
        roots.push(b.add_node(
            stage,
            item.outcome,
            item.outcome_index,
            item.weight,
            Parent::Fixed(u),
            item.with_rows,
            item.extra_linear,
        )?);
    }
    let mut k = DenseMatrix::zeros(b.rows, b.cols);
    for (i, j, v) in b.entries {
        k.set(i, j, k.get(i, j) + v);
    }
    Ok(ExtensiveForm {
        k,
        r: DenseVector::from(b.rhs),
        blocks: b.blocks,
        row_blocks: b.row_blocks,
        nodes: b.nodes,
        roots,
    })
}

enum Parent<'u> {
    Fixed(&'u [f64]),
    Node(usize),
}

impl Builder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn add_node(
        &mut self,
        stage: usize,
        outcome: &Outcome,
        outcome_index: usize,
        weight: f64,
        parent: Parent<'_>,
        with_rows: bool,
        extra_linear: Option<DenseVector>,
    ) -> Result<usize> {
        let problem = self.problem;
        let tmpl = problem.stage(stage);
        let n = tmpl.n;

        let mut lin = outcome.c.scaled(weight);
        if let Some(e) = &extra_linear {
            e.check_dim(n, "extra linear term")?;
            lin.axpy(weight, e);
        }
        let (wmu, center) = match &tmpl.objective {
            ObjectiveKind::Linear => (0.0, DenseVector::zeros(n)),
            ObjectiveKind::QuadPlusLinear { mu, center } => (weight * mu, center.clone()),
        };
        let cols = self.cols..self.cols + n;
        self.cols += n;
        let block = self.blocks.len();
        self.blocks.push(Block {
            cols: cols.clone(),
            kind: BlockKind::Decision {
                set: tmpl.prox.set.clone(),
                wmu,
                center,
                lin,
            },
        });

        let node = self.nodes.len();
        let mut rows_id = None;
        if with_rows && tmpl.m > 0 {
            let m = tmpl.m;
            let rows = self.rows..self.rows + m;
            self.rows += m;
            for i in 0..m {
                for j in 0..n {
                    let a = outcome.a.get(i, j);
                    if a != 0.0 {
                        self.entries.push((rows.start + i, cols.start + j, weight * a));
                    }
                }
            }
            let mut r = outcome.b.clone();
            match parent {
                Parent::Fixed(u) => {
                    if outcome.b_mat.cols() != u.len() {
                        return Err(Error::dim(format!(
                            "stage {stage} coupling map has {} columns, previous decision has length {}",
                            outcome.b_mat.cols(),
                            u.len()
                        )));
                    }
                    r.axpy(1.0, &outcome.b_mat.matvec(u));
                }
                Parent::Node(p) => {
                    let pcols = self.blocks[self.nodes[p].block].cols.clone();
                    for i in 0..m {
                        for (jj, j) in pcols.clone().enumerate() {
                            let bv = outcome.b_mat.get(i, jj);
                            if bv != 0.0 {
                                self.entries.push((rows.start + i, j, -weight * bv));
                            }
                        }
                    }
                }
            }
            self.rhs.extend(r.iter().map(|v| weight * v));
            rows_id = Some(self.row_blocks.len());
            self.row_blocks.push(RowBlock {
                rows,
                cone: tmpl.cone,
            });
        }

        self.nodes.push(Node {
            block,
            rows: rows_id,
        });

        if let (Some(f), Some(p)) = (&tmpl.coupling, &outcome.p) {
            // s ≥ ⟨S_l, x⟩ + o_l + p_l for every piece, cost weight · s.
            let set = &tmpl.prox.set;
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for l in 0..f.pieces() {
                let s = f.slopes.row(l);
                let shift = f.offsets[l] + p[l];
                lo = lo.max(set.linear_min(s).0 + shift);
                let neg: Vec<f64> = s.iter().map(|v| -v).collect();
                hi = hi.max(-set.linear_min(&neg).0 + shift);
            }
            let scol = self.cols;
            self.cols += 1;
            self.blocks.push(Block {
                cols: scol..scol + 1,
                kind: BlockKind::Epigraph {
                    lo: lo - 1.0,
                    hi: hi + 1.0,
                    weight,
                },
            });
            let rows = self.rows..self.rows + f.pieces();
            self.rows += f.pieces();
            for l in 0..f.pieces() {
                self.entries.push((rows.start + l, scol, weight));
                for (jj, j) in cols.clone().enumerate() {
                    let s = f.slopes.get(l, jj);
                    if s != 0.0 {
                        self.entries.push((rows.start + l, j, -weight * s));
                    }
                }
                self.rhs.push(weight * (f.offsets[l] + p[l]));
            }
            self.row_blocks.push(RowBlock {
                rows,
                cone: Cone::NonnegOrthant(f.pieces()),
            });
        }

        if self.recurse && stage < problem.horizon {
            let support = problem.distribution.support(stage + 1, Some(outcome_index))?;
            for (j, child) in support.iter().enumerate() {
                self.add_node(stage + 1, child, j, weight * child.prob, Parent::Node(node), true, None)?;
            }
        }
        Ok(node)
    }
}

impl ExtensiveForm {
    pub fn cols(&self) -> usize {
        self.k.cols()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.blocks.iter().map(|b| b.value(x)).sum()
    }

    pub fn node_x(&self, x: &[f64], node: usize) -> DenseVector {
        DenseVector::from(x[self.blocks[self.nodes[node].block].cols.clone()].to_vec())
    }

    pub fn node_y(&self, y: &[f64], node: usize) -> Option<DenseVector> {
        self.nodes[node]
            .rows
            .map(|rb| DenseVector::from(y[self.row_blocks[rb].rows.clone()].to_vec()))
    }
}
