//! Bundled test problems and the one-stage harness instances of the rate
//! experiments.

use crate::error::{Error, Result};
use crate::model::{parse_problem, MultistageProblem};

pub const TINY1: &str = include_str!("../../../instances/tiny1.json");
pub const TINY3: &str = include_str!("../../../instances/tiny3.json");
pub const TINY4: &str = include_str!("../../../instances/tiny4.json");

const BILINEAR: &str = r#"{
  "version": 1, "T": 1,
  "stages": [{"n": 1, "m": 1, "set": {"kind": "box", "lower": [0], "upper": [1]},
              "cone": {"kind": "zero"}, "objective": {"kind": "linear"}}],
  "first_stage": {"A": [[1]], "b": [0.5], "c": [1]}
}"#;

const STRONG: &str = r#"{
  "version": 1, "T": 1,
  "stages": [{"n": 1, "m": 1, "set": {"kind": "box", "lower": [0], "upper": [1]},
              "cone": {"kind": "zero"},
              "objective": {"kind": "quad_plus_linear", "mu": 1, "center": [0.3]}}],
  "first_stage": {"A": [[1]], "b": [0.5], "c": [1]}
}"#;

pub const NAMES: [&str; 5] = ["tiny1", "tiny3", "tiny4", "bilinear", "strong"];

pub fn bundled_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "tiny1" => TINY1,
        "tiny3" => TINY3,
        "tiny4" => TINY4,
        "bilinear" => BILINEAR,
        "strong" => STRONG,
        _ => return None,
    })
}

pub fn bundled(name: &str) -> Result<MultistageProblem> {
    let text = bundled_text(name)
        .ok_or_else(|| Error::Usage(format!("unknown bundled instance `{name}` (known: {})", NAMES.join(", "))))?;
    parse_problem(text.as_bytes())
}

/// X = [0,1], A = 1, b = 0.5, K = {0}, h(x) = x; saddle point (0.5, 1).
pub fn bilinear() -> MultistageProblem {
    bundled("bilinear").expect("bundled instance parses")
}

/// As `bilinear` with h(x) = ½(x − 0.3)² + x; saddle point (0.5, 1.2).
pub fn strong_quadratic() -> MultistageProblem {
    bundled("strong").expect("bundled instance parses")
}
