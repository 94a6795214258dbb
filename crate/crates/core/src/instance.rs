use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::interval::Interval;
use crate::slots::MAX_SLOTS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Reject-or-accept: the request names a price per resource and the
    /// seller either assigns one resource or declines.
    Reject,
    /// Choice-based: the seller offers an assortment and the customer picks
    /// under the basic attraction model.
    Choice,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Reject => "reject",
            Scenario::Choice => "choice",
        }
    }
}

/// One period's request type. Field names follow the instance file format.
///
/// `l` and `r` are stored as written so that validation can report a
/// reversed demand instead of silently treating it as empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestType {
    pub p: f64,
    pub l: usize,
    pub r: usize,
    /// Reward per resource, indexed by 0-based resource.
    pub w: Vec<f64>,
    /// Attraction per resource (choice scenario only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    /// Outside-option attraction (choice scenario only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
}

impl RequestType {
    pub fn interval(&self) -> Interval {
        Interval::new(self.l, self.r)
    }

    /// Attraction of resource `j`; zero when the request carries none.
    pub fn attraction(&self, j: usize) -> f64 {
        self.v.as_ref().map_or(0.0, |v| v[j])
    }

    pub fn outside(&self) -> f64 {
        self.v0.unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub scenario: Scenario,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub requests: Vec<RequestType>,
}

/// One broken invariant with a path-like locator such as `requests[3].p`.
///
/// Request locators use the 1-based period number, so `requests[3]` is the
/// request of period 3.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn check_number(out: &mut Vec<Violation>, path: String, value: f64, lo: f64, hi: f64) {
    let message = if !value.is_finite() {
        format!("{value} is not finite")
    } else if value < lo || value > hi {
        if hi.is_finite() {
            format!("{value} outside [{lo}, {hi}]")
        } else {
            format!("{value} is below {lo}")
        }
    } else {
        return;
    };
    out.push(Violation { path, message });
}

/// Every invariant violation of `inst`; empty means valid.
pub fn validate(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: &str, message: String| {
        out.push(Violation {
            path: path.to_string(),
            message,
        })
    };
    if inst.m == 0 {
        push("M", "at least one resource is required".into());
    }
    if inst.n == 0 || inst.n > MAX_SLOTS {
        push("N", format!("slot count {} outside 1..={MAX_SLOTS}", inst.n));
    }
    if inst.requests.len() != inst.t {
        push(
            "requests",
            format!("{} requests for a horizon of T = {}", inst.requests.len(), inst.t),
        );
    }

    for (i, req) in inst.requests.iter().enumerate() {
        let at = format!("requests[{}]", i + 1);
        check_number(&mut out, format!("{at}.p"), req.p, 0.0, 1.0);
        if req.l > req.r {
            out.push(Violation {
                path: format!("{at}.l"),
                message: format!("demand [{},{}] has lo > hi", req.l, req.r),
            });
        } else if req.l < 1 || req.r > inst.n {
            out.push(Violation {
                path: format!("{at}.r"),
                message: format!("demand [{},{}] outside [1,{}]", req.l, req.r, inst.n),
            });
        }
        if req.w.len() != inst.m {
            out.push(Violation {
                path: format!("{at}.w"),
                message: format!("{} rewards for M = {}", req.w.len(), inst.m),
            });
        }
        for (j, &w) in req.w.iter().enumerate() {
            check_number(&mut out, format!("{at}.w[{}]", j + 1), w, 0.0, f64::INFINITY);
        }
        match inst.scenario {
            Scenario::Reject => {
                if req.v.is_some() {
                    out.push(Violation {
                        path: format!("{at}.v"),
                        message: "attractions are not allowed in a reject instance".into(),
                    });
                }
                if req.v0.is_some() {
                    out.push(Violation {
                        path: format!("{at}.v0"),
                        message: "outside attraction is not allowed in a reject instance".into(),
                    });
                }
            }
            Scenario::Choice => {
                match &req.v {
                    None => out.push(Violation {
                        path: format!("{at}.v"),
                        message: "missing attractions".into(),
                    }),
                    Some(v) => {
                        if v.len() != inst.m {
                            out.push(Violation {
                                path: format!("{at}.v"),
                                message: format!("{} attractions for M = {}", v.len(), inst.m),
                            });
                        }
                        for (j, &a) in v.iter().enumerate() {
                            check_number(&mut out, format!("{at}.v[{}]", j + 1), a, 0.0, f64::INFINITY);
                        }
                    }
                }
                match req.v0 {
                    None => out.push(Violation {
                        path: format!("{at}.v0"),
                        message: "missing outside attraction".into(),
                    }),
                    Some(v0) => check_number(&mut out, format!("{at}.v0"), v0, 0.0, f64::INFINITY),
                }
            }
        }
    }
    out
}

impl Instance {
    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    /// Parses and validates an instance file.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let inst: Instance = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        inst.checked()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instances always serialize")
    }

    /// `self` if valid, otherwise every violation as an error.
    pub fn checked(self) -> Result<Self, Error> {
        let v = validate(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// Request of period `t` (1-based).
    pub fn request(&self, t: usize) -> &RequestType {
        &self.requests[t - 1]
    }

    /// `Σ_t p_t · max_j w_tj`, an upper bound on any policy's revenue.
    pub fn revenue_cap(&self) -> f64 {
        self.requests
            .iter()
            .map(|r| r.p * r.w.iter().copied().fold(0.0, f64::max))
            .sum()
    }

    pub fn require(&self, scenario: Scenario) -> Result<(), Error> {
        if self.scenario == scenario {
            Ok(())
        } else {
            Err(Error::WrongScenario {
                expected: scenario.name(),
            })
        }
    }
}

/// Choice instance with unit attractions and no outside option; under it
/// any offered resource is chosen for sure, so offering one resource is
/// the same as accepting with it.
pub fn reduce_to_choice(inst: &Instance) -> Result<Instance, Error> {
    inst.require(Scenario::Reject)?;
    let requests = inst
        .requests
        .iter()
        .map(|r| RequestType {
            v: Some(vec![1.0; inst.m]),
            v0: Some(0.0),
            ..r.clone()
        })
        .collect();
    Ok(Instance {
        scenario: Scenario::Choice,
        requests,
        ..inst.clone()
    })
}
