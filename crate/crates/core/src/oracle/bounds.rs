use serde::Serialize;

use crate::error::{Error, Result};
use crate::saddle::ScheduleVariant;

/// Inputs to the a-priori bounds. `dual_dist_sq` is ‖y_* − y₀‖² and
/// `y0_sq` is ‖y₀‖².
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundConstants {
    pub norm_a: Option<f64>,
    pub alpha: Option<f64>,
    pub omega_sq: Option<f64>,
    pub m: Option<f64>,
    pub mu: Option<f64>,
    pub dual_dist_sq: Option<f64>,
    pub y0_sq: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoreticalBound {
    pub gap_star_bound: f64,
    pub gap_delta_bound: f64,
    pub delta_norm_bound: f64,
    pub dual_sq_bound: f64,
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() && x >= 0.0 => Ok(x),
        Some(x) => Err(Error::Config(format!("bound constant {name} = {x} must be finite and nonnegative"))),
        None => Err(Error::Config(format!("bound constant {name} is missing"))),
    }
}

// num/den with 0/0 read as 0 (a vanishing noise term over a vanishing ‖A‖).
fn q(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn theoretical_bound(
    variant: ScheduleVariant,
    c: &BoundConstants,
    n: usize,
    eps_bar: f64,
) -> Result<TheoreticalBound> {
    if n == 0 {
        return Err(Error::Config("bounds need N ≥ 1".into()));
    }
    if !(eps_bar.is_finite() && eps_bar >= 0.0) {
        return Err(Error::Config(format!("ε̄ = {eps_bar} must be finite and nonnegative")));
    }
    let a = need(c.norm_a, "norm_a")?;
    let alpha = need(c.alpha, "alpha")?;
    let m = need(c.m, "M")?;
    let r2 = need(c.dual_dist_sq, "dual_dist_sq")?;
    let y02 = need(c.y0_sq, "y0_sq")?;
    if alpha == 0.0 {
        return Err(Error::Config("bound constant alpha must be positive".into()));
    }
    let r = r2.sqrt();
    let nf = n as f64;
    let (s2, s3, s6) = (2f64.sqrt(), 3f64.sqrt(), 6f64.sqrt());
    let eb = eps_bar;

    let b = match variant {
        ScheduleVariant::GenAggressive | ScheduleVariant::GenBoundedDual => {
            let o2 = need(c.omega_sq, "omega_sq")?;
            let o = o2.sqrt();
            if variant == ScheduleVariant::GenAggressive {
                let noise = 4.0 * s3 * m * o / (alpha * nf).sqrt();
                let lead = |d2: f64| s2 * a * (2.0 * o2 + d2) / (alpha.sqrt() * nf);
                TheoreticalBound {
                    gap_star_bound: lead(r2) + noise + eb,
                    gap_delta_bound: lead(y02) + noise + eb,
                    delta_norm_bound: (2.0 * (2.0 * alpha).sqrt() * a * r + 4.0 * o * a) / (alpha * nf)
                        + 2.0 * m * (s6 * a + (3.0 * alpha).sqrt()) / (alpha * nf.sqrt())
                        + (3.0 * a * eb / (nf * alpha.sqrt())).sqrt(),
                    dual_sq_bound: r2
                        + 4.0 * o2
                        + q(2.0 * (6.0 * nf).sqrt() * m * o, a)
                        + q(3.0 * alpha * (nf + 1.0) * m * m, a * a)
                        + (nf + 1.0) * eb / 2.0,
                }
            } else {
                let san = (alpha * nf).sqrt();
                let head = 2.0 * s2 * a * o2 / (nf * san);
                let tail = |d2: f64| (a * d2 + 4.0 * s3 * m * o) / san;
                TheoreticalBound {
                    gap_star_bound: head + tail(r2) + eb,
                    gap_delta_bound: head + tail(y02) + eb,
                    delta_norm_bound: (2.0 * s2 * a * r + 4.0 * (m * a * o).sqrt()) / san
                        + 2.0 * s6 * a * m / alpha
                        + 4.0 * o2 * a * a / (nf * alpha)
                        + (3.0 * a * eb / san).sqrt(),
                    dual_sq_bound: r2
                        + 2.0 * o2 / nf
                        + q(s6 * (1.0 + alpha) * m * o, a)
                        + q(san * eb, s2 * a),
                }
            }
        }
        ScheduleVariant::StrongAggressive | ScheduleVariant::StrongBoundedDual => {
            let mu = need(c.mu, "mu")?;
            if mu == 0.0 {
                return Err(Error::Config("bound constant mu must be positive".into()));
            }
            let am = alpha * mu;
            if variant == ScheduleVariant::StrongAggressive {
                let gap = |d2: f64| 8.0 * a * a * d2 / (am * nf * (nf + 1.0)) + 24.0 * m * m / (am * (nf + 1.0)) + eb;
                TheoreticalBound {
                    gap_star_bound: gap(r2),
                    gap_delta_bound: gap(y02),
                    delta_norm_bound: 16.0 * a * a * r / (nf * (nf + 1.0) * am)
                        + 8.0 * s6 * a * m / (am * nf.powf(1.5))
                        + 4.0 * a * eb.sqrt() / ((nf + 1.0) * am.sqrt()),
                    dual_sq_bound: r2
                        + q(12.0 * m * m * alpha * nf, a * a)
                        + q(nf * (nf + 1.0) * am * eb, 2.0 * a * a),
                }
            } else {
                let gap = |d2: f64| (8.0 * a * a * d2 + 24.0 * m * m) / (am * (nf + 1.0)) + eb;
                TheoreticalBound {
                    gap_star_bound: gap(r2),
                    gap_delta_bound: gap(y02),
                    delta_norm_bound: q(16.0 * a * a * r, (nf + 1.0) * am + 16.0 * s3 * a * m)
                        + 4.0 * a * eb.sqrt() / ((nf + 1.0) * am).sqrt(),
                    dual_sq_bound: r2 + q(24.0 * m * m * alpha, a * a) + q((nf + 1.0) * am * eb, 2.0 * a * a),
                }
            }
        }
    };
    Ok(b)
}
