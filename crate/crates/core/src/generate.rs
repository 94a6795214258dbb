//! Seeded random instances.
//!
//! Draw order is fixed: M, N, T, then per period p, the demand interval,
//! the M rewards and (choice only) the M attractions followed by v0. Any
//! change to that order changes every generated instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::instance::{Instance, RequestType, Scenario};
use crate::interval::IntervalIndex;
use crate::slots::MAX_SLOTS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub scenario: Scenario,
    /// Inclusive ranges; each count is drawn uniformly.
    pub m: (usize, usize),
    pub n: (usize, usize),
    pub t: (usize, usize),
    pub p_range: (f64, f64),
    pub w_range: (f64, f64),
    /// Range of positive attractions; also used for v0.
    pub v_range: (f64, f64),
    /// Probability that an attraction is exactly zero.
    pub zero_v_prob: f64,
}

impl GeneratorSpec {
    pub fn new(scenario: Scenario, m: usize, n: usize, t: usize) -> Self {
        Self {
            scenario,
            m: (m, m),
            n: (n, n),
            t: (t, t),
            p_range: (0.2, 1.0),
            w_range: (1.0, 10.0),
            v_range: (0.1, 5.0),
            zero_v_prob: 0.1,
        }
    }

    pub fn with_ranges(scenario: Scenario, m: (usize, usize), n: (usize, usize), t: (usize, usize)) -> Self {
        Self {
            m,
            n,
            t,
            ..Self::new(scenario, m.0, n.0, t.0)
        }
    }

    fn check(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::BadSpec(msg));
        for (name, (lo, hi)) in [("M", self.m), ("N", self.n), ("T", self.t)] {
            if lo > hi {
                return bad(format!("{name} range [{lo},{hi}] is empty"));
            }
        }
        if self.m.0 == 0 {
            return bad("M must be at least 1".into());
        }
        if self.n.0 == 0 || self.n.1 > MAX_SLOTS {
            return bad(format!("N range must lie in [1,{MAX_SLOTS}]"));
        }
        for (name, (lo, hi)) in [("p", self.p_range), ("w", self.w_range), ("v", self.v_range)] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return bad(format!("{name} range [{lo},{hi}] is empty or not finite"));
            }
            if lo < 0.0 {
                return bad(format!("{name} range must be nonnegative"));
            }
        }
        if self.p_range.1 > 1.0 {
            return bad("p range must lie in [0,1]".into());
        }
        if !(0.0..=1.0).contains(&self.zero_v_prob) {
            return bad(format!("zero_v_prob {} outside [0,1]", self.zero_v_prob));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn generate(seed: u64, spec: &GeneratorSpec) -> Result<Instance, Error> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(spec.m.0..=spec.m.1);
    let n = rng.random_range(spec.n.0..=spec.n.1);
    let t = rng.random_range(spec.t.0..=spec.t.1);
    let intervals = IntervalIndex::new(n);

    let requests = (0..t)
        .map(|_| {
            let p = uniform(&mut rng, spec.p_range);
            let iv = intervals.interval(rng.random_range(0..intervals.len()));
            let w = (0..m).map(|_| uniform(&mut rng, spec.w_range)).collect();
            let (v, v0) = match spec.scenario {
                Scenario::Reject => (None, None),
                Scenario::Choice => {
                    let v = (0..m)
                        .map(|_| {
                            if rng.random_bool(spec.zero_v_prob) {
                                0.0
                            } else {
                                uniform(&mut rng, spec.v_range)
                            }
                        })
                        .collect();
                    (Some(v), Some(uniform(&mut rng, spec.v_range)))
                }
            };
            RequestType {
                p,
                l: iv.lo(),
                r: iv.hi(),
                w,
                v,
                v0,
            }
        })
        .collect();

    Ok(Instance {
        scenario: spec.scenario,
        m,
        n,
        t,
        requests,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate;
    use proptest::prelude::*;

    #[test]
    fn same_seed_same_bytes() {
        let spec = GeneratorSpec::with_ranges(Scenario::Choice, (1, 3), (2, 6), (3, 9));
        let a = generate(7, &spec).unwrap();
        let b = generate(7, &spec).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(validate(&a).is_empty());
        assert_ne!(a, generate(8, &spec).unwrap());
    }

    #[test]
    fn empty_horizon() {
        let inst = generate(1, &GeneratorSpec::new(Scenario::Reject, 2, 4, 0)).unwrap();
        assert!(inst.requests.is_empty());
        assert_eq!(inst.t, 0);
    }

    #[test]
    fn degenerate_p_range() {
        let mut spec = GeneratorSpec::new(Scenario::Reject, 2, 4, 30);
        spec.p_range = (1.0, 1.0);
        let inst = generate(3, &spec).unwrap();
        assert!(inst.requests.iter().all(|r| r.p == 1.0));
    }

    #[test]
    fn empty_ranges_are_rejected() {
        let mut spec = GeneratorSpec::new(Scenario::Reject, 2, 4, 3);
        spec.m = (3, 2);
        assert!(matches!(generate(0, &spec), Err(Error::BadSpec(_))));
        let mut spec = GeneratorSpec::new(Scenario::Reject, 2, 4, 3);
        spec.w_range = (5.0, 1.0);
        assert!(matches!(generate(0, &spec), Err(Error::BadSpec(_))));
    }

    #[test]
    fn zero_attractions_show_up() {
        let mut spec = GeneratorSpec::new(Scenario::Choice, 4, 4, 50);
        spec.zero_v_prob = 0.3;
        let inst = generate(11, &spec).unwrap();
        let zeros = inst
            .requests
            .iter()
            .flat_map(|r| r.v.clone().unwrap())
            .filter(|&v| v == 0.0)
            .count();
        assert!(zeros > 20 && zeros < 100, "{zeros}");
        assert!(inst.requests.iter().all(|r| r.v0.unwrap() >= 0.1));
    }

    proptest! {
        #[test]
        fn json_roundtrip(seed in any::<u64>(), choice in any::<bool>()) {
            let scenario = if choice { Scenario::Choice } else { Scenario::Reject };
            let spec = GeneratorSpec::with_ranges(scenario, (1, 4), (1, 8), (0, 6));
            let inst = generate(seed, &spec).unwrap();
            let back = Instance::from_json(&inst.to_json()).unwrap();
            prop_assert_eq!(back, inst);
        }
    }
}
