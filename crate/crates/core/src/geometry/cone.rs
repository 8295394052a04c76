use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{norm2, DenseVector};

/// Closed convex cones for the stage constraints `A x - b - B u ∈ K`.
///
/// For `SecondOrder(d)` the last coordinate is the height `t` and the
/// constraint reads `‖(v_1..v_{d-1})‖₂ ≤ t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    Zero(usize),
    NonnegOrthant(usize),
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonnegOrthant(d) | Cone::SecondOrder(d) => d,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Cone::Zero(_) => "zero",
            Cone::NonnegOrthant(_) => "nonneg",
            Cone::SecondOrder(_) => "soc",
        }
    }

    /// Euclidean projection onto K.
    pub fn project(&self, v: &[f64]) -> Result<DenseVector> {
        self.check(v)?;
        Ok(match self {
            Cone::Zero(d) => DenseVector::zeros(*d),
            Cone::NonnegOrthant(_) => clamp_nonneg(v),
            Cone::SecondOrder(_) => project_soc(v),
        })
    }

    /// Euclidean distance from `v` to K.
    pub fn distance(&self, v: &[f64]) -> Result<f64> {
        let p = self.project(v)?;
        Ok(p.sub(v).norm())
    }

    /// Euclidean distance from `y` to the dual cone K_*.
    pub fn dual_distance(&self, y: &[f64]) -> Result<f64> {
        let p = project_dual_cone(self, y)?;
        Ok(p.sub(y).norm())
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::dim(format!(
                "{} cone of dimension {} given a vector of length {}",
                self.name(),
                self.dim(),
                v.len()
            )));
        }
        Ok(())
    }
}

/// Euclidean projection onto the dual cone K_*.
///
/// The zero cone has the whole space as its dual; the orthant and the
/// second-order cone are self-dual.
pub fn project_dual_cone(cone: &Cone, y: &[f64]) -> Result<DenseVector> {
    cone.check(y)?;
    Ok(match cone {
        Cone::Zero(_) => DenseVector::from(y.to_vec()),
        Cone::NonnegOrthant(_) => clamp_nonneg(y),
        Cone::SecondOrder(_) => project_soc(y),
    })
}

fn clamp_nonneg(v: &[f64]) -> DenseVector {
    DenseVector::from(v.iter().map(|x| x.max(0.0)).collect::<Vec<_>>())
}

fn project_soc(v: &[f64]) -> DenseVector {
    let d = v.len();
    if d == 0 {
        return DenseVector::zeros(0);
    }
    let t = v[d - 1];
    let lead = &v[..d - 1];
    let s = norm2(lead);
    if s <= t {
        return DenseVector::from(v.to_vec());
    }
    if s <= -t {
        return DenseVector::zeros(d);
    }
    let scale = 0.5 * (s + t);
    let mut out: Vec<f64> = lead.iter().map(|x| scale * x / s).collect();
    out.push(scale);
    DenseVector::from(out)
}
