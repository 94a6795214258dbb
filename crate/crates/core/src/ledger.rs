use log::warn;
use serde::Serialize;

use crate::fluid::FluidSolution;
use crate::instance::Instance;
use crate::interval::Interval;
use crate::slots::SlotState;

/// Virtual and real statuses of every resource, plus the current period.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VirtualLedger {
    pub virtual_status: Vec<SlotState>,
    pub real: Vec<SlotState>,
    pub period: usize,
}

impl VirtualLedger {
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            virtual_status: vec![SlotState::full(n); m],
            real: vec![SlotState::full(n); m],
            period: 1,
        }
    }

    /// Virtual status is slot-wise below the real one for every resource.
    pub fn lower_bound_holds(&self) -> bool {
        self.virtual_status.iter().zip(&self.real).all(|(v, r)| v.is_within(*r))
    }

    pub fn resources(&self) -> usize {
        self.real.len()
    }
}

/// Invariant breaches observed while running a policy. All zero is the
/// only acceptable outcome.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ViolationCounters {
    pub lower_bound: u64,
    pub occupied_slot: u64,
    pub coupler_condition: u64,
    pub infeasible_assortment: u64,
}

impl ViolationCounters {
    pub fn total(&self) -> u64 {
        self.lower_bound + self.occupied_slot + self.coupler_condition + self.infeasible_assortment
    }

    pub fn add(&mut self, other: &ViolationCounters) {
        self.lower_bound += other.lower_bound;
        self.occupied_slot += other.occupied_slot;
        self.coupler_condition += other.coupler_condition;
        self.infeasible_assortment += other.infeasible_assortment;
    }
}

/// Below this `x·p` a state is treated as unreachable and never proposes.
pub const DEGENERATE_MASS: f64 = 1e-12;
/// Clamping a ratio by more than this is reported as solver imprecision.
pub const CLAMP_WARN: f64 = 1e-6;

/// `mass / (x·p)` clamped to `[0,1]`, zero for degenerate states.
pub fn proposal_ratio(mass: f64, x: f64, p: f64) -> f64 {
    let denom = x * p;
    if denom <= DEGENERATE_MASS {
        return 0.0;
    }
    let ratio = mass / denom;
    let clamped = ratio.clamp(0.0, 1.0);
    if (ratio - clamped).abs() > CLAMP_WARN {
        warn!("proposal ratio {ratio} clamped to {clamped}");
    }
    clamped
}

/// Containing maximal sequence of the demand in `status`, if any.
pub(crate) fn containing(status: SlotState, dem: Interval) -> Option<Interval> {
    status.containing_sequence(dem)
}

pub(crate) fn check_shape(inst: &Instance, fluid: &FluidSolution) -> Result<(), crate::Error> {
    if fluid.matches(inst) {
        Ok(())
    } else {
        Err(crate::Error::Mismatch(format!(
            "fluid solution is {:?} M={} N={} T={}, instance is {:?} M={} N={} T={}",
            fluid.scenario, fluid.m, fluid.n, fluid.horizon, inst.scenario, inst.m, inst.n, inst.t
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_edges() {
        assert_eq!(proposal_ratio(0.3, 0.6, 0.5), 1.0);
        assert_eq!(proposal_ratio(0.0, 0.6, 0.5), 0.0);
        assert_eq!(proposal_ratio(0.1, 1e-13, 1.0), 0.0);
        assert_eq!(proposal_ratio(0.3 + 1e-9, 0.6, 0.5), 1.0);
        assert!((proposal_ratio(0.1, 0.5, 0.5) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn fresh_ledger() {
        let l = VirtualLedger::new(3, 5);
        assert_eq!(l.resources(), 3);
        assert!(l.virtual_status.iter().chain(&l.real).all(|s| *s == SlotState::full(5)));
        assert!(l.lower_bound_holds());
    }
}
