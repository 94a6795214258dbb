//! Exact dynamic programs used as ground truth.
//!
//! `naive_dp` walks all 2^N single-resource states; `ddp` exploits the fact
//! that the value of a state is the sum of values of its maximal sequences
//! and runs over intervals only. The two `exact_online_*` functions extend
//! backward induction to joint states of several resources and are only
//! meant for tiny instances.

use serde::Serialize;

use crate::error::Error;
use crate::instance::{validate, Instance, RequestType, Scenario};
use crate::interval::{Interval, IntervalIndex};
use crate::slots::{split_effect, SlotState};

/// Largest N accepted by [`naive_dp`].
pub const NAIVE_SLOT_CAP: usize = 16;
/// Largest M·N accepted by the joint-state oracles.
pub const JOINT_BIT_CAP: usize = 12;
/// Largest M accepted by [`exact_online_choice`].
pub const CHOICE_RESOURCE_CAP: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactValue {
    pub value: f64,
    pub states_visited: u64,
}

fn ensure_valid(inst: &Instance) -> Result<(), Error> {
    let v = validate(inst);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(v))
    }
}

fn single_resource(inst: &Instance) -> Result<(), Error> {
    ensure_valid(inst)?;
    inst.require(Scenario::Reject)?;
    if inst.m != 1 {
        return Err(Error::WrongShape(format!("expected M = 1, got M = {}", inst.m)));
    }
    Ok(())
}

/// `G_t(s)` for every period `t ∈ 1..=T+1` and every state `s`.
#[derive(Clone, Debug)]
pub struct NaiveTable {
    n: usize,
    horizon: usize,
    /// Row `t-1` holds `G_t` indexed by the raw state bits.
    rows: Vec<Vec<f64>>,
}

impl NaiveTable {
    pub fn value(&self, t: usize, s: SlotState) -> f64 {
        assert!((1..=self.horizon + 1).contains(&t), "period {t} outside 1..={}", self.horizon + 1);
        assert_eq!(s.slots(), self.n);
        self.rows[t - 1][s.raw() as usize]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

pub fn naive_dp_table(inst: &Instance) -> Result<NaiveTable, Error> {
    single_resource(inst)?;
    let n = inst.n;
    if n > NAIVE_SLOT_CAP {
        return Err(Error::TooLarge {
            what: "N",
            size: n,
            cap: NAIVE_SLOT_CAP,
        });
    }
    let states = 1usize << n;
    let mut rows = vec![vec![0.0; states]; inst.t + 1];
    for t in (1..=inst.t).rev() {
        let req = inst.request(t);
        let iv = req.interval();
        let (head, tail) = rows.split_at_mut(t);
        let next = &tail[0];
        let cur = &mut head[t - 1];
        for (raw, g) in cur.iter_mut().enumerate() {
            let s = SlotState::from_raw(n, raw as u64);
            let keep = next[raw];
            *g = if s.covers(iv) {
                let sold = s.allocate(iv).expect("covered interval allocates");
                let accept = req.w[0] + next[sold.raw() as usize];
                (1.0 - req.p) * keep + req.p * accept.max(keep)
            } else {
                keep
            };
        }
    }
    Ok(NaiveTable {
        n,
        horizon: inst.t,
        rows,
    })
}

/// `G_1(1_[1,N])` by backward induction over all 2^N states.
pub fn naive_dp(inst: &Instance) -> Result<ExactValue, Error> {
    let table = naive_dp_table(inst)?;
    Ok(ExactValue {
        value: table.value(1, SlotState::full(inst.n)),
        states_visited: (inst.t as u64) << inst.n,
    })
}

/// `F_t([a,b])` for `t ∈ 1..=T+1`; the empty interval and `t = T+1` are 0.
#[derive(Clone, Debug)]
pub struct DdpTable {
    horizon: usize,
    index: IntervalIndex,
    /// Row-major by period, `T+1` rows of `N(N+1)/2` values.
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DdpEntry {
    pub t: usize,
    pub a: usize,
    pub b: usize,
    pub value: f64,
}

impl DdpTable {
    pub fn value(&self, t: usize, iv: Interval) -> f64 {
        assert!((1..=self.horizon + 1).contains(&t), "period {t} outside 1..={}", self.horizon + 1);
        if iv.is_empty() {
            return 0.0;
        }
        self.values[(t - 1) * self.index.len() + self.index.index(iv)]
    }

    /// `Σ_{[a,b] ~ s} F_t([a,b])`.
    pub fn state_value(&self, t: usize, s: SlotState) -> f64 {
        s.maximal_sequences().into_iter().map(|iv| self.value(t, iv)).sum()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn slots(&self) -> usize {
        self.index.slots()
    }

    pub fn entries(&self) -> Vec<DdpEntry> {
        (1..=self.horizon + 1)
            .flat_map(|t| {
                self.index.iter().map(move |iv| DdpEntry {
                    t,
                    a: iv.lo(),
                    b: iv.hi(),
                    value: self.value(t, iv),
                })
            })
            .collect()
    }
}

pub fn ddp(inst: &Instance) -> Result<DdpTable, Error> {
    single_resource(inst)?;
    let index = IntervalIndex::new(inst.n);
    let k = index.len();
    let mut table = DdpTable {
        horizon: inst.t,
        index,
        values: vec![0.0; (inst.t + 1) * k],
    };
    for t in (1..=inst.t).rev() {
        let req = inst.request(t);
        let dem = req.interval();
        for pos in 0..k {
            let seq = table.index.interval(pos);
            let keep = table.value(t + 1, seq);
            let f = match split_effect(seq, dem) {
                Ok((left, right)) => {
                    let accept = req.w[0] + table.value(t + 1, left) + table.value(t + 1, right);
                    (1.0 - req.p) * keep + req.p * accept.max(keep)
                }
                Err(_) => keep,
            };
            table.values[(t - 1) * k + pos] = f;
        }
    }
    Ok(table)
}

/// Optimal single-resource decision read off the DDP table. Ties (up to
/// round-off of 1e-12) accept.
pub fn ddp_policy_act(table: &DdpTable, t: usize, state: SlotState, arrived: bool, request: &RequestType) -> bool {
    if !arrived {
        return false;
    }
    let dem = request.interval();
    let Some(seq) = state.containing_sequence(dem) else {
        return false;
    };
    let (left, right) = split_effect(seq, dem).expect("containing sequence holds the demand");
    let accept = request.w[0] + table.value(t + 1, left) + table.value(t + 1, right);
    accept >= table.value(t + 1, seq) - 1e-12
}

/// Joint availability of all resources, resource `j` in bits `j·N..(j+1)·N`.
struct Joint {
    m: usize,
    n: usize,
    slot_mask: u64,
}

impl Joint {
    fn new(inst: &Instance) -> Result<Self, Error> {
        let bits = inst.m * inst.n;
        if bits > JOINT_BIT_CAP {
            return Err(Error::TooLarge {
                what: "M·N",
                size: bits,
                cap: JOINT_BIT_CAP,
            });
        }
        Ok(Self {
            m: inst.m,
            n: inst.n,
            slot_mask: (1u64 << inst.n) - 1,
        })
    }

    fn states(&self) -> usize {
        1 << (self.m * self.n)
    }

    fn full(&self) -> usize {
        self.states() - 1
    }

    fn resource(&self, joint: usize, j: usize) -> SlotState {
        SlotState::from_raw(self.n, (joint as u64 >> (j * self.n)) & self.slot_mask)
    }

    /// Joint state after selling `iv` on resource `j`, if it fits.
    fn sell(&self, joint: usize, j: usize, iv: Interval) -> Option<usize> {
        let s = self.resource(joint, j);
        let after = s.allocate(iv).ok()?;
        let cleared = (s.raw() ^ after.raw()) << (j * self.n);
        Some(joint & !(cleared as usize))
    }
}

/// Exact online optimum of a reject-or-accept instance over joint states.
pub fn exact_online_reject(inst: &Instance) -> Result<ExactValue, Error> {
    ensure_valid(inst)?;
    inst.require(Scenario::Reject)?;
    let joint = Joint::new(inst)?;
    let mut next = vec![0.0; joint.states()];
    let mut cur = vec![0.0; joint.states()];
    for t in (1..=inst.t).rev() {
        let req = inst.request(t);
        let iv = req.interval();
        for (s, v) in cur.iter_mut().enumerate() {
            let keep = next[s];
            let best = (0..joint.m)
                .filter_map(|j| joint.sell(s, j, iv).map(|s2| req.w[j] + next[s2]))
                .fold(keep, f64::max);
            *v = (1.0 - req.p) * keep + req.p * best;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(ExactValue {
        value: next[joint.full()],
        states_visited: inst.t as u64 * joint.states() as u64,
    })
}

/// Exact online optimum of a choice instance: each period the seller picks
/// an assortment among feasible resources with positive attraction, and
/// the customer chooses by the basic attraction model.
pub fn exact_online_choice(inst: &Instance) -> Result<ExactValue, Error> {
    ensure_valid(inst)?;
    inst.require(Scenario::Choice)?;
    if inst.m > CHOICE_RESOURCE_CAP {
        return Err(Error::TooLarge {
            what: "M",
            size: inst.m,
            cap: CHOICE_RESOURCE_CAP,
        });
    }
    let joint = Joint::new(inst)?;
    let mut next = vec![0.0; joint.states()];
    let mut cur = vec![0.0; joint.states()];
    let mut visited = 0u64;
    for t in (1..=inst.t).rev() {
        let req = inst.request(t);
        let iv = req.interval();
        let v0 = req.outside();
        for (s, val) in cur.iter_mut().enumerate() {
            let keep = next[s];
            let sold: Vec<Option<usize>> = (0..joint.m)
                .map(|j| {
                    if req.attraction(j) > 0.0 {
                        joint.sell(s, j, iv)
                    } else {
                        None
                    }
                })
                .collect();
            let offerable: u32 = (0..joint.m)
                .filter(|&j| sold[j].is_some())
                .fold(0, |acc, j| acc | 1 << j);
            let mut best = keep;
            // Every subset of the offerable mask, the empty one included.
            let mut sub = offerable;
            loop {
                if sub != 0 {
                    let total: f64 = v0 + (0..joint.m).filter(|j| sub >> j & 1 == 1).map(|j| req.attraction(j)).sum::<f64>();
                    if total <= 0.0 {
                        return Err(Error::ZeroDenominator(format!("assortment {sub:#b} at period {t}")));
                    }
                    let mut value = v0 / total * keep;
                    for j in (0..joint.m).filter(|j| sub >> j & 1 == 1) {
                        let s2 = sold[j].expect("offerable resources fit");
                        value += req.attraction(j) / total * (req.w[j] + next[s2]);
                    }
                    best = best.max(value);
                }
                visited += 1;
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & offerable;
            }
            *val = (1.0 - req.p) * keep + req.p * best;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(ExactValue {
        value: next[joint.full()],
        states_visited: visited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(n: usize, reqs: &[(f64, usize, usize, f64)]) -> Instance {
        Instance {
            scenario: Scenario::Reject,
            m: 1,
            n,
            t: reqs.len(),
            requests: reqs
                .iter()
                .map(|&(p, l, r, w)| RequestType {
                    p,
                    l,
                    r,
                    w: vec![w],
                    v: None,
                    v0: None,
                })
                .collect(),
        }
    }

    #[test]
    fn naive_single_accept() {
        let inst = single(2, &[(1.0, 1, 1, 5.0)]);
        assert_eq!(naive_dp(&inst).unwrap().value, 5.0);
    }

    #[test]
    fn naive_empty_horizon() {
        assert_eq!(naive_dp(&single(3, &[])).unwrap().value, 0.0);
    }

    #[test]
    fn naive_two_periods() {
        let inst = single(2, &[(1.0, 1, 2, 3.0), (1.0, 1, 1, 2.0)]);
        assert_eq!(naive_dp(&inst).unwrap().value, 3.0);
        let table = ddp(&inst).unwrap();
        assert_eq!(table.value(1, Interval::new(1, 2)), 3.0);
    }

    #[test]
    fn naive_rejects_bad_shapes() {
        let mut inst = single(2, &[(1.0, 1, 1, 5.0)]);
        inst.m = 2;
        inst.requests[0].w = vec![1.0, 2.0];
        assert!(matches!(naive_dp(&inst), Err(Error::WrongShape(_))));
        assert!(matches!(ddp(&inst), Err(Error::WrongShape(_))));
        let wide = single(17, &[(1.0, 1, 1, 5.0)]);
        assert!(matches!(naive_dp(&wide), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn ddp_terminal_row_is_zero() {
        let inst = single(4, &[(0.7, 2, 3, 4.0), (0.4, 1, 1, 1.0), (0.9, 3, 4, 2.5)]);
        let table = ddp(&inst).unwrap();
        assert!(table.entries().iter().filter(|e| e.t == 4).all(|e| e.value == 0.0));
        assert_eq!(table.value(2, Interval::EMPTY), 0.0);
    }

    #[test]
    fn ddp_monotone_in_time() {
        let inst = single(4, &[(0.7, 2, 3, 4.0), (0.4, 1, 1, 1.0), (0.9, 3, 4, 2.5)]);
        let table = ddp(&inst).unwrap();
        for e in table.entries().iter().filter(|e| e.t <= 3) {
            assert!(e.value >= table.value(e.t + 1, Interval::new(e.a, e.b)));
        }
    }

    #[test]
    fn ddp_never_fitting_is_zero() {
        let inst = single(4, &[(1.0, 2, 4, 4.0), (1.0, 1, 3, 1.0)]);
        let table = ddp(&inst).unwrap();
        assert_eq!(table.value(1, Interval::new(1, 2)), 0.0);
        assert_eq!(table.value(1, Interval::new(3, 4)), 0.0);
    }

    #[test]
    fn policy_act_examples() {
        let inst = single(2, &[(1.0, 1, 1, 0.0), (1.0, 1, 2, 5.0)]);
        let table = ddp(&inst).unwrap();
        let full = SlotState::full(2);
        // Last period, feasible, positive reward.
        assert!(ddp_policy_act(&table, 2, full, true, inst.request(2)));
        assert!(!ddp_policy_act(&table, 2, full, false, inst.request(2)));
        // Selling slot 1 for nothing blocks the later sale of [1,2].
        assert!(!ddp_policy_act(&table, 1, full, true, inst.request(1)));
    }

    #[test]
    fn exact_reject_single_period() {
        let inst = Instance {
            scenario: Scenario::Reject,
            m: 2,
            n: 2,
            t: 1,
            requests: vec![RequestType {
                p: 0.6,
                l: 1,
                r: 2,
                w: vec![2.0, 7.0],
                v: None,
                v0: None,
            }],
        };
        assert!((exact_online_reject(&inst).unwrap().value - 4.2).abs() < 1e-12);
    }

    #[test]
    fn exact_reject_matches_naive_on_one_resource() {
        let inst = single(4, &[(0.7, 2, 3, 4.0), (0.4, 1, 1, 1.0), (0.9, 3, 4, 2.5), (0.5, 1, 4, 6.0)]);
        assert_eq!(exact_online_reject(&inst).unwrap().value, naive_dp(&inst).unwrap().value);
    }

    fn choice_one(v: f64, v0: f64, w: f64) -> Instance {
        Instance {
            scenario: Scenario::Choice,
            m: 1,
            n: 1,
            t: 1,
            requests: vec![RequestType {
                p: 1.0,
                l: 1,
                r: 1,
                w: vec![w],
                v: Some(vec![v]),
                v0: Some(v0),
            }],
        }
    }

    #[test]
    fn exact_choice_single_bam() {
        assert_eq!(exact_online_choice(&choice_one(1.0, 1.0, 4.0)).unwrap().value, 2.0);
    }

    #[test]
    fn exact_choice_zero_attraction() {
        assert_eq!(exact_online_choice(&choice_one(0.0, 1.0, 4.0)).unwrap().value, 0.0);
        assert_eq!(exact_online_choice(&choice_one(0.0, 0.0, 4.0)).unwrap().value, 0.0);
    }

    #[test]
    fn exact_caps() {
        let mut inst = single(7, &[]);
        inst.m = 2;
        assert!(matches!(exact_online_reject(&inst), Err(Error::TooLarge { .. })));
    }
}
