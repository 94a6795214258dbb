use consec_lp::LpStatus;
use thiserror::Error;

use crate::instance::Violation;
use crate::interval::Interval;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("slot {slot} is already unavailable")]
    OccupiedSlot { slot: usize },
    #[error("interval {inner} is not contained in {outer}")]
    NotContained { outer: Interval, inner: Interval },
    #[error("operation requires a {expected} instance")]
    WrongScenario { expected: &'static str },
    #[error("wrong instance shape: {0}")]
    WrongShape(String),
    #[error("{what} is {size}, above the cap of {cap}")]
    TooLarge { what: &'static str, size: usize, cap: usize },
    #[error("bad generator spec: {0}")]
    BadSpec(String),
    #[error("bad simulation config: {0}")]
    BadConfig(String),
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("resource {resource} has zero attraction and cannot be offered")]
    ZeroAttraction { resource: usize },
    #[error("bad coupler input: {0}")]
    BadCoupler(String),
    #[error("gamma {0} outside the allowed range")]
    BadGamma(f64),
    #[error("LP solve ended with status {0:?}")]
    NotOptimal(LpStatus),
    #[error("fluid solution breaks {what} by {magnitude:e}")]
    InvariantBreach { what: String, magnitude: f64 },
    #[error("fluid solution does not match the instance: {0}")]
    Mismatch(String),
    #[error("invalid instance: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("parse error: {0}")]
    Parse(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
