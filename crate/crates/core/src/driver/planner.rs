use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ledger::ConstantsLedger;
use super::Regime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub epsilon: f64,
    pub regime: Regime,
    pub horizon: usize,
    /// N₁..N_T
    pub budgets: Vec<usize>,
    /// Unrounded formula values, same order.
    pub raw: Vec<f64>,
    pub formulas: Vec<String>,
}

impl SamplePlan {
    pub fn budget(&self, t: usize) -> usize {
        self.budgets[t - 1]
    }

    /// Stage-t samples a full run consumes: N₁·…·N_{t−1}.
    pub fn scenario_counts(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut acc: u64 = 1;
        for t in 2..=self.horizon {
            acc = acc.saturating_mul(self.budget(t - 1) as u64);
            out.push(acc);
        }
        out
    }
}

struct Stage {
    a: f64,
    alpha: f64,
    omega: f64,
    omega_sq: f64,
    r: f64,
    mu: f64,
    /// M_{t+1}
    m_next: f64,
}

fn finite(name: &str, t: usize, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::Planning(format!("ledger constant {name} at stage {t} is missing or invalid ({v})")))
    }
}

fn stage(ledger: &ConstantsLedger, t: usize, regime: Regime) -> Result<Stage> {
    let c = ledger.stage(t);
    let alpha = finite("alpha", t, c.alpha)?;
    if alpha == 0.0 {
        return Err(Error::Planning(format!("ledger constant alpha at stage {t} must be positive")));
    }
    let mu = finite("mu", t, c.mu)?;
    if regime == Regime::Strong && mu == 0.0 {
        return Err(Error::Planning(format!(
            "the strongly convex regime needs mu > 0 at every stage; stage {t} has mu = 0"
        )));
    }
    let omega_sq = finite("Omega_sq", t, c.omega_sq)?;
    Ok(Stage {
        a: finite("norm_A_max", t, c.norm_a_max)?,
        alpha,
        omega: omega_sq.sqrt(),
        omega_sq,
        r: finite("dual_radius", t, c.dual_radius)?,
        mu,
        m_next: finite("M", t + 1, ledger.m_at(t + 1))?,
    })
}

/// Budgets as the ceilings of the sample-size formulas on the ledger,
/// clamped to ≥ 1. Three-stage problems use the dedicated three-stage
/// formulas; every other horizon uses the general-T ones. The initial dual
/// is zero, so ‖y₀‖ = 0 throughout.
pub fn plan_samples(ledger: &ConstantsLedger, epsilon: f64, regime: Regime) -> Result<SamplePlan> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Planning(format!("epsilon must be positive, got {epsilon}")));
    }
    let horizon = ledger.horizon();
    if horizon == 0 {
        return Err(Error::Planning("empty ledger".into()));
    }
    let st: Vec<Stage> = (1..=horizon).map(|t| stage(ledger, t, regime)).collect::<Result<_>>()?;
    let e = epsilon;
    let y0 = 0.0f64;
    let (s2, s3, s6) = (2f64.sqrt(), 3f64.sqrt(), 6f64.sqrt());
    let tf = horizon as f64;
    let mut raw = vec![0.0; horizon];
    let mut formulas = vec![String::new(); horizon];
    let tag = |kind: &str, t: usize| -> String {
        let family = if horizon == 3 { "three-stage" } else { "T-stage" };
        let reg = match regime {
            Regime::General => "general",
            Regime::Strong => "strong",
        };
        format!("N{t}: {family} {reg} {kind}")
    };

    match (regime, horizon) {
        (Regime::General, 3) => {
            let s = &st[2];
            raw[2] = 3.0 * s2 * s.a * (2.0 * s.omega_sq + s.r * s.r) / (s.alpha.sqrt() * e);
            let s = &st[1];
            let sa = s.alpha.sqrt();
            raw[1] = (12.0 * s2 * s.a * s.omega / (sa * e)).powf(2.0 / 3.0)
                + (6.0 * (s.a * s.r * s.r + 4.0 * s3 * s.m_next * s.omega) / (sa * e)).powi(2);
            let s = &st[0];
            let sa = s.alpha.sqrt();
            let first = 6.0 * s2 * s.a * (2.0 * s.omega_sq + y0 * y0) / (sa * e)
                + (24.0 * s3 * s.m_next * s.omega / (sa * e)).powi(2);
            let second = 6.0 * s.a * ((2.0 * s.alpha).sqrt() * s.r + 2.0 * s.omega + 3.0 * sa) / (s.alpha * e)
                + (6.0 * s3 * s.m_next * (s2 * s.a + sa) / (s.alpha * e)).powi(2);
            raw[0] = first.max(second);
        }
        (Regime::Strong, 3) => {
            let s = &st[2];
            raw[2] = 2.0 * s6 * s.a * s.r / (s.alpha * s.mu * e).sqrt();
            let s = &st[1];
            raw[1] = (24.0 * s.a * s.a * s.r * s.r + 72.0 * s.m_next * s.m_next) / (s.alpha * s.mu * e);
            let s = &st[0];
            let am = s.alpha * s.mu;
            let first = 4.0 * s3 * s.a * y0 / (am * e).sqrt() + 4.0 * (6.0 * s.m_next).powi(2) / (am * e);
            let second = 4.0 * s3 * s.a * (s.r.sqrt() + s2) / (am * e).sqrt()
                + (24.0 * s6 * s.a * s.m_next / (am * e)).powf(2.0 / 3.0);
            raw[0] = first.max(second);
        }
        (Regime::General, _) => {
            for t in (1..=horizon).rev() {
                let s = &st[t - 1];
                let sa = s.alpha.sqrt();
                raw[t - 1] = if t == 1 {
                    let first = 2.0 * s2 * tf * s.a * (2.0 * s.omega_sq + y0 * y0) / (sa * e)
                        + (8.0 * s3 * tf * s.m_next * s.omega / (sa * e)).powi(2);
                    let second = (6.0 * tf * s.a * ((2.0 * s.alpha).sqrt() * s.r + 2.0 * s.omega)
                        + 27.0 * (tf - 1.0) * sa * s.a)
                        / (s.alpha * tf * e)
                        + (6.0 * s3 * s.m_next * (s2 * s.a + sa) / (s.alpha * e)).powi(2);
                    first.max(second)
                } else if t == horizon {
                    tf * s2 * s.a * (2.0 * s.omega_sq + s.r * s.r) / (sa * e)
                } else {
                    (4.0 * s2 * tf * s.a * s.omega / (sa * e)).powf(2.0 / 3.0)
                        + (2.0 * tf * (s.a * s.r * s.r + 4.0 * s3 * s.m_next * s.omega) / (sa * e)).powi(2)
                };
            }
        }
        (Regime::Strong, _) => {
            for t in (1..=horizon).rev() {
                let s = &st[t - 1];
                let ame = s.alpha * s.mu * e;
                raw[t - 1] = if t == 1 {
                    let first = 4.0 * tf.sqrt() * s.a * y0 / ame.sqrt() + 24.0 * tf * s.m_next * s.m_next / ame;
                    let second = 4.0 * s3 * s.a * s.r.sqrt() / ame.sqrt()
                        + (24.0 * s6 * s.a * s.m_next / ame).powf(2.0 / 3.0)
                        + 12.0 * s.a * (tf - 1.0).sqrt() / (s.alpha * s.mu * tf * e).sqrt();
                    first.max(second)
                } else if t == horizon {
                    (8.0 * tf).sqrt() * s.a * s.r / ame.sqrt()
                } else {
                    (8.0 * tf * s.a * s.a * s.r * s.r + 24.0 * tf * s.m_next * s.m_next) / ame
                };
            }
        }
    }
    for t in 1..=horizon {
        let kind = if t == 1 {
            "first-stage"
        } else if t == horizon {
            "last-stage"
        } else {
            "middle-stage"
        };
        formulas[t - 1] = tag(kind, t);
    }
    let mut budgets = Vec::with_capacity(horizon);
    for (t, v) in raw.iter().enumerate() {
        if !v.is_finite() || *v > 1e15 {
            return Err(Error::Planning(format!("budget N{} = {v} is not representable", t + 1)));
        }
        budgets.push((v.ceil() as usize).max(1));
    }
    Ok(SamplePlan {
        epsilon,
        regime,
        horizon,
        budgets,
        raw,
        formulas,
    })
}
