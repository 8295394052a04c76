use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScheduleVariant {
    GenAggressive,
    GenBoundedDual,
    StrongAggressive,
    StrongBoundedDual,
}

impl ScheduleVariant {
    pub const ALL: [ScheduleVariant; 4] = [
        ScheduleVariant::GenAggressive,
        ScheduleVariant::GenBoundedDual,
        ScheduleVariant::StrongAggressive,
        ScheduleVariant::StrongBoundedDual,
    ];

    pub fn is_strong(self) -> bool {
        matches!(self, ScheduleVariant::StrongAggressive | ScheduleVariant::StrongBoundedDual)
    }

    pub fn is_bounded_dual(self) -> bool {
        matches!(self, ScheduleVariant::GenBoundedDual | ScheduleVariant::StrongBoundedDual)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScheduleVariant::GenAggressive => "GenAggressive",
            ScheduleVariant::GenBoundedDual => "GenBoundedDual",
            ScheduleVariant::StrongAggressive => "StrongAggressive",
            ScheduleVariant::StrongBoundedDual => "StrongBoundedDual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ScheduleVariant::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub norm_a: f64,
    pub alpha: f64,
    pub omega_sq: f64,
    /// Bound on the downstream subgradient norm.
    pub m: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub variant: ScheduleVariant,
    pub n: usize,
    pub constants: ScheduleConstants,
    // Constant-in-k parts of the general variants.
    tau_const: f64,
    eta_const: f64,
}

pub fn make_schedule(variant: ScheduleVariant, n: usize, constants: ScheduleConstants) -> Result<Schedule> {
    let ScheduleConstants { norm_a, alpha, omega_sq, m, mu } = constants;
    if n == 0 {
        return Err(Error::Config("schedule needs N ≥ 1".into()));
    }
    for (name, v) in [("‖A‖", norm_a), ("α", alpha), ("Ω²", omega_sq), ("M", m), ("μ", mu)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Config(format!("schedule constant {name} = {v} is not a finite nonnegative number")));
        }
    }
    if alpha <= 0.0 {
        return Err(Error::Config("schedule needs α > 0".into()));
    }
    let nf = n as f64;
    let (tau_const, eta_const) = match variant {
        ScheduleVariant::GenAggressive | ScheduleVariant::GenBoundedDual => {
            let omega = omega_sq.sqrt();
            if m > 0.0 && omega == 0.0 {
                return Err(Error::Config("Ω = 0 with M > 0 makes τ undefined".into()));
            }
            let noise = if m > 0.0 { m * (3.0 * nf).sqrt() / (omega * alpha.sqrt()) } else { 0.0 };
            let (coupling, eta) = if variant == ScheduleVariant::GenAggressive {
                let v = 2f64.sqrt() * norm_a / alpha.sqrt();
                (v, v)
            } else {
                (
                    2f64.sqrt() * norm_a / (alpha * nf).sqrt(),
                    (2.0 * nf).sqrt() * norm_a / alpha.sqrt(),
                )
            };
            let tau = noise.max(coupling);
            if tau == 0.0 {
                return Err(Error::Config(
                    "‖A‖ = 0 and M = 0 give a zero primal step weight; the stage has no constraint or noise to balance".into(),
                ));
            }
            (tau, eta)
        }
        ScheduleVariant::StrongAggressive | ScheduleVariant::StrongBoundedDual => {
            if mu <= 0.0 {
                return Err(Error::Config(format!(
                    "{} needs a strong-convexity modulus μ > 0",
                    variant.name()
                )));
            }
            (0.0, 0.0)
        }
    };
    Ok(Schedule {
        variant,
        n,
        constants,
        tau_const,
        eta_const,
    })
}

impl Schedule {
    pub fn w(&self, k: usize) -> f64 {
        if self.variant.is_strong() {
            k as f64
        } else {
            1.0
        }
    }

    pub fn theta(&self, k: usize) -> f64 {
        if self.variant.is_strong() {
            (k as f64 - 1.0) / k as f64
        } else {
            1.0
        }
    }

    pub fn tau(&self, k: usize) -> f64 {
        if self.variant.is_strong() {
            (k as f64 - 1.0) * self.constants.mu / 2.0
        } else {
            self.tau_const
        }
    }

    pub fn eta(&self, k: usize) -> f64 {
        let c = &self.constants;
        match self.variant {
            ScheduleVariant::StrongAggressive => 4.0 * c.norm_a * c.norm_a / (k as f64 * c.alpha * c.mu),
            ScheduleVariant::StrongBoundedDual => {
                4.0 * c.norm_a * c.norm_a * self.n as f64 / (k as f64 * c.alpha * c.mu)
            }
            _ => self.eta_const,
        }
    }

    pub fn weight_sum(&self) -> f64 {
        (1..=self.n).map(|k| self.w(k)).sum()
    }
}

/// A failed parameter condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionViolation {
    pub condition: &'static str,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

const SLACK: f64 = 1e-9;

fn holds_ge(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - SLACK * lhs.abs().max(rhs.abs())
}

fn holds_eq(lhs: f64, rhs: f64) -> bool {
    (lhs - rhs).abs() <= SLACK * lhs.abs().max(rhs.abs())
}

/// Check the step-size conditions for every k ≤ N. Strong variants use the
/// μ-augmented forms of the primal-weight and terminal conditions.
pub fn check_conditions(s: &Schedule) -> Vec<ConditionViolation> {
    let c = s.constants;
    let a2 = c.norm_a * c.norm_a;
    let mu = if s.variant.is_strong() { c.mu } else { 0.0 };
    let mut out = Vec::new();
    let mut push = |ok: bool, condition, k, lhs, rhs| {
        if !ok {
            out.push(ConditionViolation { condition, k, lhs, rhs });
        }
    };
    for k in 1..=s.n {
        if k >= 2 {
            let (lhs, rhs) = (s.w(k) * s.theta(k), s.w(k - 1));
            push(holds_eq(lhs, rhs), "w_k θ_k = w_{k-1}", k, lhs, rhs);

            let (lhs, rhs) = (s.w(k) * s.tau(k) * s.eta(k - 1) * c.alpha, 2.0 * s.w(k - 1) * a2);
            push(holds_ge(lhs, rhs), "w_k τ_k η_{k-1} α ≥ 2 w_{k-1} ‖A‖²", k, lhs, rhs);
        }
        if k < s.n {
            let (lhs, rhs) = (s.w(k) * (mu + s.tau(k)), s.w(k + 1) * s.tau(k + 1));
            push(holds_ge(lhs, rhs), "w_k (μ + τ_k) ≥ w_{k+1} τ_{k+1}", k, lhs, rhs);

            let (lhs, rhs) = (s.w(k) * s.eta(k), s.w(k + 1) * s.eta(k + 1));
            push(holds_ge(lhs, rhs), "w_k η_k ≥ w_{k+1} η_{k+1}", k, lhs, rhs);
        }
    }
    let n = s.n;
    let (lhs, rhs) = ((s.tau(n) + mu) * s.eta(n) * c.alpha, 2.0 * a2);
    push(holds_ge(lhs, rhs), "(τ_N + μ) η_N α ≥ 2 ‖A‖²", n, lhs, rhs);
    out
}
