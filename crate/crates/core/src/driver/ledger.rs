use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MultistageProblem;
use crate::numerics::{sigma_min_nonzero, spectral_norm};

/// Constants of one stage. `m_bound` bounds the norm of the stochastic
/// subgradient this stage hands back to stage t − 1 (zero at stage 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConstants {
    pub stage: usize,
    pub norm_a_max: f64,
    pub bound_b: f64,
    pub omega_sq: f64,
    pub alpha: f64,
    pub mu: f64,
    pub m_bound: f64,
    pub dual_radius: f64,
    pub m_h: f64,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub stages: Vec<StageConstants>,
    /// `KEY.stage` of every user-supplied value.
    pub overridden: Vec<String>,
}

impl ConstantsLedger {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// 1-based stage accessor.
    pub fn stage(&self, t: usize) -> &StageConstants {
        &self.stages[t - 1]
    }

    /// `M_{t}` with `M_{T+1} = 0`.
    pub fn m_at(&self, t: usize) -> f64 {
        if t < 2 || t > self.horizon() {
            0.0
        } else {
            self.stage(t).m_bound
        }
    }
}

pub const OVERRIDE_KEYS: [&str; 9] = [
    "norm_A_max",
    "bound_B",
    "Omega_sq",
    "alpha",
    "mu",
    "M",
    "dual_radius",
    "M_h",
    "sigma_min",
];

/// Parse `KEY.stage=VALUE`.
pub fn parse_override(text: &str) -> Result<((String, usize), f64)> {
    let bad = || {
        Error::Usage(format!(
            "override `{text}` is not of the form KEY.stage=VALUE with KEY one of {}",
            OVERRIDE_KEYS.join(", ")
        ))
    };
    let (lhs, value) = text.split_once('=').ok_or_else(bad)?;
    let (key, stage) = lhs.trim().rsplit_once('.').ok_or_else(bad)?;
    if !OVERRIDE_KEYS.contains(&key) {
        return Err(bad());
    }
    let stage: usize = stage.parse().map_err(|_| bad())?;
    let value: f64 = value.trim().parse().map_err(|_| bad())?;
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::Usage(format!("override `{text}` must be a finite nonnegative number")));
    }
    Ok(((key.to_string(), stage), value))
}

pub type Overrides = BTreeMap<(String, usize), f64>;

fn slot<'a>(c: &'a mut StageConstants, key: &str) -> &'a mut f64 {
    match key {
        "norm_A_max" => &mut c.norm_a_max,
        "bound_B" => &mut c.bound_b,
        "Omega_sq" => &mut c.omega_sq,
        "alpha" => &mut c.alpha,
        "mu" => &mut c.mu,
        "M" => &mut c.m_bound,
        "dual_radius" => &mut c.dual_radius,
        "M_h" => &mut c.m_h,
        "sigma_min" => &mut c.sigma_min,
        _ => unreachable!("override keys are validated on parse"),
    }
}

/// Backward pass from stage T: Lipschitz bound of the stage cost including
/// the downstream value function, dual radius `M_h/σ_min + ‖y₀‖` (y₀ = 0),
/// and `M_t = 𝓑_t · radius_t + Lip(F^{t−1})`. Overrides replace a field as
/// soon as it is computed, so they propagate to earlier stages.
pub fn build_ledger(problem: &MultistageProblem, overrides: &Overrides) -> Result<ConstantsLedger> {
    let horizon = problem.horizon;
    for (key, stage) in overrides.keys() {
        if *stage == 0 || *stage > horizon {
            return Err(Error::Usage(format!("override {key}.{stage} names a stage outside 1..={horizon}")));
        }
    }
    let apply = |c: &mut StageConstants, key: &str| {
        if let Some(v) = overrides.get(&(key.to_string(), c.stage)) {
            *slot(c, key) = *v;
        }
    };

    let mut stages: Vec<Option<StageConstants>> = vec![None; horizon];
    let mut m_next = 0.0;
    for t in (1..=horizon).rev() {
        let tmpl = problem.stage(t);
        let outcomes = problem.outcomes_at(t);
        let mut c = StageConstants {
            stage: t,
            norm_a_max: 0.0,
            bound_b: problem.bound_b(t),
            omega_sq: tmpl.prox.diameter_sq_omega,
            alpha: tmpl.prox.modulus_alpha,
            mu: tmpl.mu(),
            m_bound: 0.0,
            dual_radius: 0.0,
            m_h: 0.0,
            sigma_min: f64::INFINITY,
        };
        let mut lip: f64 = 0.0;
        for (k, o) in outcomes.iter().enumerate() {
            c.norm_a_max = c.norm_a_max.max(spectral_norm(&o.a)?);
            let obj = tmpl.objective_for(o);
            // F^t is counted in M_{t+1}
            lip = lip.max(obj.simple_lipschitz(tmpl.set()));
            if tmpl.m > 0 && !overrides.contains_key(&("sigma_min".to_string(), t)) {
                let s = sigma_min_nonzero(&o.a).map_err(|_| {
                    Error::Ledger(format!("stage {t} outcome {k}: constraint matrix is zero, no dual bound"))
                })?;
                c.sigma_min = c.sigma_min.min(s);
            }
        }
        if tmpl.m == 0 {
            c.sigma_min = 0.0;
        }
        for key in ["norm_A_max", "bound_B", "Omega_sq", "alpha", "mu", "sigma_min"] {
            apply(&mut c, key);
        }
        c.m_h = lip + m_next;
        apply(&mut c, "M_h");
        c.dual_radius = if tmpl.m == 0 {
            0.0
        } else if c.sigma_min > 0.0 {
            c.m_h / c.sigma_min
        } else {
            return Err(Error::Ledger(format!("stage {t}: σ_min must be positive")));
        };
        apply(&mut c, "dual_radius");
        if t >= 2 {
            let f_prev = problem
                .outcomes_at(t - 1)
                .iter()
                .map(|o| problem.stage(t - 1).objective_for(o).coupling_lipschitz())
                .fold(0.0, f64::max);
            c.m_bound = c.bound_b * c.dual_radius + f_prev;
        }
        apply(&mut c, "M");
        for (name, v) in [
            ("norm_A_max", c.norm_a_max),
            ("M_h", c.m_h),
            ("dual_radius", c.dual_radius),
            ("M", c.m_bound),
        ] {
            if !v.is_finite() {
                return Err(Error::Ledger(format!("stage {t}: {name} is not finite")));
            }
        }
        m_next = c.m_bound;
        stages[t - 1] = Some(c);
    }
    Ok(ConstantsLedger {
        stages: stages.into_iter().map(|c| c.expect("every stage filled")).collect(),
        overridden: overrides.keys().map(|(k, s)| format!("{k}.{s}")).collect(),
    })
}
