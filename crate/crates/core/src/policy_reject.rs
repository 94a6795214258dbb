//! Proposal/allocation policy for the reject-or-accept scenario.
//!
//! Each resource whose virtual status can host the demand proposes with
//! probability `y/(x·p)` read on its containing maximal sequence. The best
//! paying proposer takes the request if it arrives; every other proposer
//! still loses the demand from its virtual status with probability `p_t`,
//! which keeps the virtual marginals equal to the fluid `x`.

use log::error;
use serde::Serialize;

use crate::error::Error;
use crate::fluid::FluidSolution;
use crate::instance::{Instance, Scenario};
use crate::ledger::{check_shape, containing, proposal_ratio, VirtualLedger, ViolationCounters};
use crate::rng::PeriodDraws;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepOutcome {
    pub t: usize,
    pub arrived: bool,
    /// Proposers, ascending 0-based resource indices.
    pub proposals: Vec<usize>,
    pub chosen: Option<usize>,
    pub allocated: bool,
    pub revenue: f64,
}

#[derive(Clone)]
pub struct RejectPolicy<'a> {
    inst: &'a Instance,
    fluid: &'a FluidSolution,
    pub ledger: VirtualLedger,
    pub violations: ViolationCounters,
}

impl<'a> RejectPolicy<'a> {
    pub fn init(inst: &'a Instance, fluid: &'a FluidSolution) -> Result<Self, Error> {
        inst.require(Scenario::Reject)?;
        check_shape(inst, fluid)?;
        Ok(Self {
            inst,
            fluid,
            ledger: VirtualLedger::new(inst.m, inst.n),
            violations: ViolationCounters::default(),
        })
    }

    /// Probability that resource `j` proposes in period `t` given the
    /// current virtual status.
    pub fn proposal_probability(&self, t: usize, j: usize) -> f64 {
        let req = self.inst.request(t);
        match containing(self.ledger.virtual_status[j], req.interval()) {
            None => 0.0,
            Some(seq) => proposal_ratio(self.fluid.y(j, t, seq), self.fluid.x(j, t, seq), req.p),
        }
    }

    /// Resource `j` proposes iff `uniforms[j]` falls below its probability.
    pub fn proposal_stage(&self, t: usize, uniforms: &[f64]) -> Vec<usize> {
        assert_eq!(self.ledger.period, t, "proposal stage out of order");
        (0..self.inst.m)
            .filter(|&j| uniforms[j] < self.proposal_probability(t, j))
            .collect()
    }

    /// Allocates to the best proposer and downdates the other proposers.
    ///
    /// The ledger advances to `t+1` even when the real allocation fails;
    /// that failure is counted and returned as `OccupiedSlot`.
    pub fn allocation_stage(
        &mut self,
        t: usize,
        proposals: &[usize],
        arrived: bool,
        downdate: &[f64],
    ) -> Result<StepOutcome, Error> {
        match self.allocate_inner(t, proposals, arrived, downdate) {
            (outcome, None) => Ok(outcome),
            (_, Some(e)) => Err(e),
        }
    }

    fn allocate_inner(
        &mut self,
        t: usize,
        proposals: &[usize],
        arrived: bool,
        downdate: &[f64],
    ) -> (StepOutcome, Option<Error>) {
        assert_eq!(self.ledger.period, t, "allocation stage out of order");
        let req = self.inst.request(t);
        let dem = req.interval();
        // First maximum wins, so ties go to the lowest index.
        let chosen = proposals
            .iter()
            .copied()
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if req.w[b] >= req.w[j] => Some(b),
                _ => Some(j),
            });
        let mut breach = None;
        let mut outcome = StepOutcome {
            t,
            arrived,
            proposals: proposals.to_vec(),
            chosen,
            allocated: false,
            revenue: 0.0,
        };
        if let (Some(js), true) = (chosen, arrived) {
            match self.ledger.real[js].allocate(dem) {
                Ok(s) => {
                    self.ledger.real[js] = s;
                    outcome.allocated = true;
                    outcome.revenue = req.w[js];
                }
                Err(e) => breach = Some(e),
            }
            self.downdate(js, &mut breach);
        }
        for &j in proposals {
            if Some(j) != chosen && downdate[j] < req.p {
                self.downdate(j, &mut breach);
            }
        }
        self.ledger.period += 1;
        if !self.ledger.lower_bound_holds() {
            self.violations.lower_bound += 1;
            error!("virtual status exceeds real status after period {t}");
        }
        if let Some(e) = &breach {
            self.violations.occupied_slot += 1;
            error!("allocation failed in period {t}: {e}");
        }
        (outcome, breach)
    }

    fn downdate(&mut self, j: usize, breach: &mut Option<Error>) {
        let dem = self.inst.request(self.ledger.period).interval();
        match self.ledger.virtual_status[j].allocate(dem) {
            Ok(s) => self.ledger.virtual_status[j] = s,
            Err(e) => *breach = Some(e),
        }
    }

    /// One full period driven by pre-drawn uniforms. Breaches are counted in
    /// `violations` and the period still completes.
    pub fn step(&mut self, draws: &PeriodDraws) -> StepOutcome {
        let t = self.ledger.period;
        let req = self.inst.request(t);
        let arrived = draws.arrival < req.p;
        let proposals = self.proposal_stage(t, &draws.proposal);
        self.allocate_inner(t, &proposals, arrived, &draws.downdate).0
    }
}
