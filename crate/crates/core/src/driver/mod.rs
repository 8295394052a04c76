//! The nested DSA recursion, its sample planner and the constants ledger.

mod ledger;
mod planner;
mod solve;

use serde::{Deserialize, Serialize};

use crate::saddle::ScheduleVariant;

pub use ledger::{build_ledger, parse_override, ConstantsLedger, Overrides, StageConstants, OVERRIDE_KEYS};
pub use planner::{plan_samples, SamplePlan};
pub use solve::{dsa_solve, SolveOptions, SolveReport, StageRunner, TracePoint, REPORT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    General,
    Strong,
}

impl Regime {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "general" => Some(Regime::General),
            "strong" => Some(Regime::Strong),
            _ => None,
        }
    }
}

/// Aggressive steps at the first and last stage, bounded-dual steps in
/// between.
pub fn stage_variant(t: usize, horizon: usize, regime: Regime) -> ScheduleVariant {
    let middle = t > 1 && t < horizon;
    match (regime, middle) {
        (Regime::General, false) => ScheduleVariant::GenAggressive,
        (Regime::General, true) => ScheduleVariant::GenBoundedDual,
        (Regime::Strong, false) => ScheduleVariant::StrongAggressive,
        (Regime::Strong, true) => ScheduleVariant::StrongBoundedDual,
    }
}

#[cfg(test)]
mod tests;
