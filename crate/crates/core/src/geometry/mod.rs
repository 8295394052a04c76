//! Feasible sets, distance-generating functions and the prox-mapping.

mod cone;

pub use cone::{project_dual_cone, Cone};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm2, DenseVector};

/// Slack allowed when checking that a point lies in X.
const MEMBERSHIP_TOL: f64 = 1e-9;

/// Compact convex sets supported by the closed-form prox.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Box { lower: DenseVector, upper: DenseVector },
    /// `{x ≥ 0 : Σ x = radius}`
    Simplex { dim: usize, radius: f64 },
    Ball { center: DenseVector, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dgf {
    Euclidean,
    Entropy,
}

impl FeasibleSet {
    pub fn new_box(lower: DenseVector, upper: DenseVector) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(Error::dim("box bounds have different lengths"));
        }
        if lower.dim() == 0 {
            return Err(Error::Validation("box must have dimension ≥ 1".into()));
        }
        if let Some(i) = (0..lower.dim()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::Validation(format!(
                "box lower bound exceeds upper bound at coordinate {i}"
            )));
        }
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::Validation("box bounds must be finite".into()));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn new_simplex(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("simplex must have dimension ≥ 1".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Validation("simplex radius must be positive".into()));
        }
        Ok(FeasibleSet::Simplex { dim, radius })
    }

    pub fn new_ball(center: DenseVector, radius: f64) -> Result<Self> {
        if center.dim() == 0 {
            return Err(Error::Validation("ball must have dimension ≥ 1".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Validation("ball radius must be positive".into()));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box { lower, .. } => lower.dim(),
            FeasibleSet::Simplex { dim, .. } => *dim,
            FeasibleSet::Ball { center, .. } => center.dim(),
        }
    }

    /// The point used as prox-center and as the default starting iterate.
    pub fn center(&self) -> DenseVector {
        match self {
            FeasibleSet::Box { lower, upper } => lower.add(upper).scaled(0.5),
            FeasibleSet::Simplex { dim, radius } => DenseVector::filled(*dim, radius / *dim as f64),
            FeasibleSet::Ball { center, .. } => center.clone(),
        }
    }

    fn scale(&self) -> f64 {
        match self {
            FeasibleSet::Box { lower, upper } => 1.0 + lower.norm().max(upper.norm()),
            FeasibleSet::Simplex { radius, .. } => 1.0 + radius,
            FeasibleSet::Ball { center, radius } => 1.0 + center.norm() + radius,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_tol(x, MEMBERSHIP_TOL * self.scale())
    }

    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Simplex { radius, .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - radius).abs() <= tol
            }
            FeasibleSet::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                d.sqrt() <= radius + tol
            }
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> DenseVector {
        match self {
            FeasibleSet::Box { lower, upper } => DenseVector::from(
                x.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(v, (l, u))| v.clamp(*l, *u))
                    .collect::<Vec<_>>(),
            ),
            FeasibleSet::Simplex { radius, .. } => project_simplex(x, *radius),
            FeasibleSet::Ball { center, radius } => {
                let diff = DenseVector::from(x.to_vec()).sub(center);
                let d = diff.norm();
                if d <= *radius {
                    DenseVector::from(x.to_vec())
                } else {
                    let mut out = center.clone();
                    out.axpy(radius / d, &diff);
                    out
                }
            }
        }
    }

    /// `min_{x ∈ X} ⟨g, x⟩` and a minimizer.
    pub fn linear_min(&self, g: &[f64]) -> (f64, DenseVector) {
        match self {
            FeasibleSet::Box { lower, upper } => {
                let x: Vec<f64> = g
                    .iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(gi, (l, u))| if *gi >= 0.0 { *l } else { *u })
                    .collect();
                (dot(g, &x), DenseVector::from(x))
            }
            FeasibleSet::Simplex { dim, radius } => {
                let (i, gmin) = g
                    .iter()
                    .copied()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
                let mut x = DenseVector::zeros(*dim);
                x[i] = *radius;
                (radius * gmin, x)
            }
            FeasibleSet::Ball { center, radius } => {
                let gn = norm2(g);
                let mut x = center.clone();
                if gn > 0.0 {
                    x.axpy(-radius / gn, g);
                }
                (dot(g, center) - radius * gn, x)
            }
        }
    }

    /// `max_{x ∈ X} ‖x - point‖₂`
    pub fn max_distance_from(&self, point: &[f64]) -> f64 {
        match self {
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper.iter())
                .zip(point)
                .map(|((l, u), p)| {
                    let d = (p - l).abs().max((u - p).abs());
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            FeasibleSet::Simplex { dim, radius } => {
                let base: f64 = point.iter().map(|p| p * p).sum();
                (0..*dim)
                    .map(|i| (base - point[i] * point[i] + (radius - point[i]).powi(2)).sqrt())
                    .fold(0.0, f64::max)
            }
            FeasibleSet::Ball { center, radius } => {
                let d: f64 = center.iter().zip(point).map(|(c, p)| (c - p) * (c - p)).sum();
                d.sqrt() + radius
            }
        }
    }

    /// A small set of extreme points (box corners, simplex vertices, ball
    /// axis points) plus the center. Used to build test grids.
    pub fn extreme_points(&self) -> Vec<DenseVector> {
        let mut pts = vec![self.center()];
        match self {
            FeasibleSet::Box { lower, upper } => {
                let n = lower.dim();
                if n <= 10 {
                    for mask in 0..(1usize << n) {
                        pts.push(DenseVector::from(
                            (0..n)
                                .map(|i| if mask >> i & 1 == 1 { upper[i] } else { lower[i] })
                                .collect::<Vec<_>>(),
                        ));
                    }
                } else {
                    pts.push(lower.clone());
                    pts.push(upper.clone());
                }
            }
            FeasibleSet::Simplex { dim, radius } => {
                for i in 0..*dim {
                    let mut v = DenseVector::zeros(*dim);
                    v[i] = *radius;
                    pts.push(v);
                }
            }
            FeasibleSet::Ball { center, radius } => {
                for i in 0..center.dim() {
                    for s in [-1.0, 1.0] {
                        let mut v = center.clone();
                        v[i] += s * radius;
                        pts.push(v);
                    }
                }
            }
        }
        pts
    }
}

/// Euclidean projection onto `{x ≥ 0 : Σ x = radius}` (sort-based).
fn project_simplex(x: &[f64], radius: f64) -> DenseVector {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - radius) / (i as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
        }
    }
    DenseVector::from(x.iter().map(|v| (v - theta).max(0.0)).collect::<Vec<_>>())
}

/// A feasible set together with its distance-generating function and the
/// constants derived from the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxSetup {
    pub set: FeasibleSet,
    pub dgf: Dgf,
    pub modulus_alpha: f64,
    pub diameter_sq_omega: f64,
    pub prox_center: DenseVector,
}

impl ProxSetup {
    pub fn new(set: FeasibleSet, dgf: Dgf) -> Result<Self> {
        let diameter_sq_omega = set_diameter_omega_sq(&set, dgf)?;
        let modulus_alpha = match (&set, dgf) {
            (_, Dgf::Euclidean) => 1.0,
            // Pinsker on the scaled simplex: strongly convex w.r.t. ‖·‖₁
            // with modulus 1/radius.
            (FeasibleSet::Simplex { radius, .. }, Dgf::Entropy) => 1.0 / radius,
            _ => unreachable!("rejected by set_diameter_omega_sq"),
        };
        let prox_center = set.center();
        Ok(ProxSetup {
            set,
            dgf,
            modulus_alpha,
            diameter_sq_omega,
            prox_center,
        })
    }

    pub fn euclidean(set: FeasibleSet) -> Self {
        ProxSetup::new(set, Dgf::Euclidean).expect("euclidean dgf supports every set")
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// The prox-function `P_X(x, z) = ω(z) - ω(x) - ⟨∇ω(x), z - x⟩`.
    pub fn divergence(&self, x: &[f64], z: &[f64]) -> f64 {
        match self.dgf {
            Dgf::Euclidean => 0.5 * x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            Dgf::Entropy => x
                .iter()
                .zip(z)
                .map(|(xi, zi)| {
                    if *zi <= 0.0 {
                        *xi - *zi
                    } else if *xi <= 0.0 {
                        f64::INFINITY
                    } else {
                        zi * (zi / xi).ln() - zi + xi
                    }
                })
                .sum(),
        }
    }

    /// The norm the dgf is strongly convex with respect to.
    pub fn primal_norm(&self, v: &[f64]) -> f64 {
        match self.dgf {
            Dgf::Euclidean => norm2(v),
            Dgf::Entropy => v.iter().map(|x| x.abs()).sum(),
        }
    }
}

/// `argmin_{x ∈ X} ⟨g, x⟩ + τ P_X(p, x)`.
pub fn prox_map_solve(setup: &ProxSetup, p: &[f64], g: &[f64], tau: f64) -> Result<DenseVector> {
    let n = setup.dim();
    if p.len() != n || g.len() != n {
        return Err(Error::dim(format!(
            "prox on a {n}-dimensional set given p of length {} and g of length {}",
            p.len(),
            g.len()
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter(format!("prox weight must be positive, got {tau}")));
    }
    if !setup.set.contains(p) {
        return Err(Error::Domain("prox anchor lies outside the feasible set".into()));
    }
    match setup.dgf {
        Dgf::Euclidean => {
            let step: Vec<f64> = p.iter().zip(g).map(|(pi, gi)| pi - gi / tau).collect();
            Ok(setup.set.project(&step))
        }
        Dgf::Entropy => {
            let radius = match setup.set {
                FeasibleSet::Simplex { radius, .. } => radius,
                _ => unreachable!("entropy dgf is only built on the simplex"),
            };
            if p.iter().any(|v| *v <= 0.0) {
                return Err(Error::Domain(
                    "entropy prox needs a strictly positive anchor".into(),
                ));
            }
            // x_i ∝ p_i exp(-g_i / τ), computed in the log domain.
            let logits: Vec<f64> = p.iter().zip(g).map(|(pi, gi)| pi.ln() - gi / tau).collect();
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = weights.iter().sum();
            Ok(DenseVector::from(
                weights.iter().map(|w| radius * w / total).collect::<Vec<_>>(),
            ))
        }
    }
}

/// `Ω²_X` for a supported (set, dgf) pair.
///
/// Euclidean: the largest prox distance over pairs, ½·diameter². Entropy on
/// the simplex: the largest divergence from the uniform center, `r ln n`.
pub fn set_diameter_omega_sq(set: &FeasibleSet, dgf: Dgf) -> Result<f64> {
    match (set, dgf) {
        (FeasibleSet::Box { lower, upper }, Dgf::Euclidean) => {
            Ok(0.5 * lower.iter().zip(upper.iter()).map(|(l, u)| (u - l) * (u - l)).sum::<f64>())
        }
        (FeasibleSet::Ball { radius, .. }, Dgf::Euclidean) => Ok(2.0 * radius * radius),
        (FeasibleSet::Simplex { radius, .. }, Dgf::Euclidean) => Ok(radius * radius),
        (FeasibleSet::Simplex { dim, radius }, Dgf::Entropy) => Ok(radius * (*dim as f64).ln()),
        (_, Dgf::Entropy) => Err(Error::Config(
            "entropy distance-generating function is only supported on the simplex".into(),
        )),
    }
}
