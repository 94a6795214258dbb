//! Assortment policy for the choice-based scenario and its coupling sampler.
//!
//! Resources propose as in the reject policy, using `(y0 + y)/(x·p)`. Each
//! proposer is then offered with probability `gamma`, the customer picks
//! under the basic attraction model, and [`random_coupler`] turns that
//! choice into the set of resources whose virtual status loses the demand.
//! The coupler's output is distributed as independent Bernoulli(`q_j`)
//! draws while always containing the realized choice, which is what keeps
//! the virtual statuses independent across resources.

use log::{error, warn};
use serde::Serialize;

use crate::error::Error;
use crate::fluid::FluidSolution;
use crate::instance::{Instance, RequestType, Scenario};
use crate::ledger::{check_shape, containing, proposal_ratio, VirtualLedger, ViolationCounters};
use crate::rng::PeriodDraws;

pub const DEFAULT_GAMMA: f64 = 0.25;
/// Slack for the coupler condition and the degenerate-denominator guards.
pub const COUPLER_TOL: f64 = 1e-12;
/// Largest M accepted by [`coupler_exact_distribution`].
pub const EXACT_COUPLER_CAP: usize = 12;

/// Inputs of the coupling sampler. `j_tilde` is the realized choice as a
/// 0-based resource, or `None` for the outside option / no arrival.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplerInput {
    pub q: Vec<f64>,
    pub q_prime: Vec<f64>,
    pub j_tilde: Option<usize>,
}

impl CouplerInput {
    /// Entries in `[0,1]`, equal lengths, `Σ q′ ≤ 1`.
    pub fn check(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::BadCoupler(msg));
        if self.q.len() != self.q_prime.len() {
            return bad(format!("q has {} entries, q' has {}", self.q.len(), self.q_prime.len()));
        }
        if let Some(v) = self.q.iter().chain(&self.q_prime).find(|v| !(0.0..=1.0).contains(*v)) {
            return bad(format!("probability {v} outside [0,1]"));
        }
        let total: f64 = self.q_prime.iter().sum();
        if total > 1.0 + COUPLER_TOL {
            return bad(format!("q' sums to {total} > 1"));
        }
        if let Some(j) = self.j_tilde {
            if j >= self.q.len() {
                return bad(format!("choice {} outside 1..={}", j + 1, self.q.len()));
            }
        }
        Ok(())
    }
}

/// `q′_j ≤ q_j·(1 − Σ_{j′>j} q′_{j′})` for every `j`, up to [`COUPLER_TOL`].
/// Written multiplied out so it stays meaningful when the tail mass is 1.
pub fn coupler_condition_holds(q: &[f64], q_prime: &[f64]) -> bool {
    let mut tail = 0.0;
    for j in (0..q.len()).rev() {
        if q_prime[j] > q[j] * (1.0 - tail) + COUPLER_TOL {
            return false;
        }
        tail += q_prime[j];
    }
    true
}

/// Probability that resource `j` joins the output when `j` is above the
/// realized choice.
fn above_choice_probability(q: f64, q_prime: f64, tail: f64, j: usize) -> Result<f64, Error> {
    let denom = 1.0 - tail;
    if denom <= COUPLER_TOL {
        return Err(Error::ZeroDenominator(format!(
            "q' mass above resource {} is {tail}",
            j + 1
        )));
    }
    let z = q_prime / denom;
    if z >= 1.0 - COUPLER_TOL {
        return Err(Error::ZeroDenominator(format!("z = {z} at resource {}", j + 1)));
    }
    Ok(((q - z) / (1.0 - z)).clamp(0.0, 1.0))
}

/// Per-resource inclusion probability for a fixed realized choice, walking
/// from the last resource down.
fn branch_probabilities(input: &CouplerInput) -> Result<Vec<f64>, Error> {
    let m = input.q.len();
    let mut probs = vec![0.0; m];
    let mut tail = 0.0;
    for j in (0..m).rev() {
        probs[j] = match input.j_tilde {
            Some(jt) if j == jt => 1.0,
            Some(jt) if j < jt => input.q[j],
            _ => above_choice_probability(input.q[j], input.q_prime[j], tail, j)?,
        };
        tail += input.q_prime[j];
    }
    Ok(probs)
}

/// The coupling sampler. Resource `j` is included when `uniforms[j]` falls
/// below its branch probability; the realized choice is always included.
/// Returns ascending 0-based indices.
pub fn random_coupler(input: &CouplerInput, uniforms: &[f64]) -> Result<Vec<usize>, Error> {
    let probs = branch_probabilities(input)?;
    Ok((0..probs.len()).filter(|&j| uniforms[j] < probs[j]).collect())
}

/// Distribution of the realized choice: `P(j) = q′_j`, `P(outside) = 1 − Σ q′`.
pub fn choice_distribution(q_prime: &[f64]) -> Vec<(Option<usize>, f64)> {
    let outside = (1.0 - q_prime.iter().sum::<f64>()).max(0.0);
    std::iter::once((None, outside))
        .chain(q_prime.iter().enumerate().map(|(j, &p)| (Some(j), p)))
        .collect()
}

/// Exact output law of the sampler when the choice is drawn from
/// [`choice_distribution`]. Entry `mask` is the probability of the subset
/// whose bit `j` marks resource `j`.
pub fn coupler_exact_distribution(q: &[f64], q_prime: &[f64]) -> Result<Vec<f64>, Error> {
    let m = q.len();
    if m > EXACT_COUPLER_CAP {
        return Err(Error::TooLarge {
            what: "M",
            size: m,
            cap: EXACT_COUPLER_CAP,
        });
    }
    let mut dist = vec![0.0; 1 << m];
    for (j_tilde, weight) in choice_distribution(q_prime) {
        if weight <= 0.0 {
            continue;
        }
        let input = CouplerInput {
            q: q.to_vec(),
            q_prime: q_prime.to_vec(),
            j_tilde,
        };
        let probs = branch_probabilities(&input)?;
        for (mask, d) in dist.iter_mut().enumerate() {
            *d += weight * subset_probability(&probs, mask);
        }
    }
    Ok(dist)
}

/// `Π_{j∈X} q_j · Π_{j∉X} (1 − q_j)` for the subset encoded by `mask`.
pub fn subset_probability(q: &[f64], mask: usize) -> f64 {
    q.iter()
        .enumerate()
        .map(|(j, &p)| if mask >> j & 1 == 1 { p } else { 1.0 - p })
        .product()
}

/// Keeps each proposer when its uniform falls below `gamma`.
pub fn build_assortment(proposals: &[usize], gamma: f64, uniforms: &[f64]) -> Result<Vec<usize>, Error> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::BadGamma(gamma));
    }
    Ok(proposals.iter().copied().filter(|&j| uniforms[j] < gamma).collect())
}

/// Customer choice under the basic attraction model, driven by one
/// uniform. `None` is the outside option.
pub fn simulate_choice(assortment: &[usize], req: &RequestType, arrived: bool, u: f64) -> Result<Option<usize>, Error> {
    if let Some(&j) = assortment.iter().find(|&&j| req.attraction(j) <= 0.0) {
        return Err(Error::ZeroAttraction { resource: j + 1 });
    }
    if !arrived || assortment.is_empty() {
        return Ok(None);
    }
    let total = req.outside() + assortment.iter().map(|&j| req.attraction(j)).sum::<f64>();
    let mut acc = req.outside() / total;
    if u < acc {
        return Ok(None);
    }
    for &j in assortment {
        acc += req.attraction(j) / total;
        if u < acc {
            return Ok(Some(j));
        }
    }
    // Round-off left the cumulative sum a hair below 1.
    Ok(assortment.last().copied())
}

/// `q_j = 1{j∈P}·p·v_j/(v_0+v_j)` and `q′_j = 1{j∈S}·p·v_j/(v_0+Σ_S v)`.
pub fn coupler_vectors(req: &RequestType, m: usize, proposals: &[usize], assortment: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut q = vec![0.0; m];
    for &j in proposals {
        let v = req.attraction(j);
        q[j] = req.p * v / (req.outside() + v);
    }
    let mut q_prime = vec![0.0; m];
    let total = req.outside() + assortment.iter().map(|&j| req.attraction(j)).sum::<f64>();
    for &j in assortment {
        q_prime[j] = req.p * req.attraction(j) / total;
    }
    (q, q_prime)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChoiceStepOutcome {
    pub t: usize,
    pub arrived: bool,
    pub proposals: Vec<usize>,
    pub assortment: Vec<usize>,
    pub chosen: Option<usize>,
    pub update_set: Vec<usize>,
    pub revenue: f64,
}

#[derive(Clone)]
pub struct ChoicePolicy<'a> {
    inst: &'a Instance,
    fluid: &'a FluidSolution,
    gamma: f64,
    pub ledger: VirtualLedger,
    pub violations: ViolationCounters,
}

impl<'a> ChoicePolicy<'a> {
    /// `gamma` must lie in `(0, 1/2]`; the guarantee is tuned for 1/4.
    pub fn init(inst: &'a Instance, fluid: &'a FluidSolution, gamma: f64) -> Result<Self, Error> {
        inst.require(Scenario::Choice)?;
        check_shape(inst, fluid)?;
        if !(gamma > 0.0 && gamma <= 0.5) {
            return Err(Error::BadGamma(gamma));
        }
        if gamma != DEFAULT_GAMMA {
            warn!("gamma = {gamma}; the revenue guarantee is proved for 1/4");
        }
        Ok(Self {
            inst,
            fluid,
            gamma,
            ledger: VirtualLedger::new(inst.m, inst.n),
            violations: ViolationCounters::default(),
        })
    }

    pub fn proposal_probability(&self, t: usize, j: usize) -> f64 {
        let req = self.inst.request(t);
        if req.attraction(j) <= 0.0 {
            return 0.0;
        }
        match containing(self.ledger.virtual_status[j], req.interval()) {
            None => 0.0,
            Some(seq) => {
                let mass = self.fluid.y0(j, t, seq) + self.fluid.y(j, t, seq);
                proposal_ratio(mass, self.fluid.x(j, t, seq), req.p)
            }
        }
    }

    pub fn proposal_stage_choice(&self, t: usize, uniforms: &[f64]) -> Vec<usize> {
        assert_eq!(self.ledger.period, t, "proposal stage out of order");
        (0..self.inst.m)
            .filter(|&j| uniforms[j] < self.proposal_probability(t, j))
            .collect()
    }

    /// One full period. Breaches are counted in `violations`; the period
    /// always completes.
    pub fn choice_step(&mut self, draws: &PeriodDraws) -> ChoiceStepOutcome {
        let t = self.ledger.period;
        let req = self.inst.request(t);
        let dem = req.interval();
        let m = self.inst.m;
        let arrived = draws.arrival < req.p;

        let proposals = self.proposal_stage_choice(t, &draws.proposal);
        let assortment = build_assortment(&proposals, self.gamma, &draws.assortment).expect("gamma checked at init");
        if assortment.iter().any(|&j| !self.ledger.real[j].covers(dem)) {
            self.violations.infeasible_assortment += 1;
            error!("period {t}: offered a resource that cannot host the demand");
        }
        let chosen = simulate_choice(&assortment, req, arrived, draws.customer).expect("proposers have positive attraction");

        let (q, q_prime) = coupler_vectors(req, m, &proposals, &assortment);
        if !coupler_condition_holds(&q, &q_prime) {
            self.violations.coupler_condition += 1;
            error!("period {t}: coupler condition fails for q = {q:?}, q' = {q_prime:?}");
        }
        let input = CouplerInput {
            q,
            q_prime,
            j_tilde: chosen,
        };
        let update_set = match random_coupler(&input, &draws.coupler) {
            Ok(set) => set,
            Err(e) => {
                self.violations.coupler_condition += 1;
                error!("period {t}: coupler failed: {e}");
                chosen.into_iter().collect()
            }
        };

        for &j in &update_set {
            match self.ledger.virtual_status[j].allocate(dem) {
                Ok(s) => self.ledger.virtual_status[j] = s,
                Err(e) => {
                    self.violations.occupied_slot += 1;
                    error!("period {t}: virtual update of resource {} failed: {e}", j + 1);
                }
            }
        }
        let mut revenue = 0.0;
        if let Some(j) = chosen {
            match self.ledger.real[j].allocate(dem) {
                Ok(s) => {
                    self.ledger.real[j] = s;
                    revenue = req.w[j];
                }
                Err(e) => {
                    self.violations.occupied_slot += 1;
                    error!("period {t}: allocation on resource {} failed: {e}", j + 1);
                }
            }
        }
        self.ledger.period += 1;
        if !self.ledger.lower_bound_holds() {
            self.violations.lower_bound += 1;
            error!("virtual status exceeds real status after period {t}");
        }
        ChoiceStepOutcome {
            t,
            arrived,
            proposals,
            assortment,
            chosen,
            update_set,
            revenue,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_resource_above_branch() {
        let input = CouplerInput {
            q: vec![0.5],
            q_prime: vec![0.3],
            j_tilde: None,
        };
        let p = branch_probabilities(&input).unwrap()[0];
        assert!((p - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn single_resource_exact_law() {
        let d = coupler_exact_distribution(&[0.5], &[0.3]).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-15 && (d[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_vectors() {
        let d = coupler_exact_distribution(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(d, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn choice_always_included() {
        let input = CouplerInput {
            q: vec![0.4, 0.6, 0.2],
            q_prime: vec![0.1, 0.3, 0.1],
            j_tilde: Some(1),
        };
        for u in [0.0, 0.5, 0.999] {
            assert!(random_coupler(&input, &[u; 3]).unwrap().contains(&1));
        }
    }

    #[test]
    fn degenerate_tail_mass() {
        let input = CouplerInput {
            q: vec![0.5, 1.0],
            q_prime: vec![0.0, 1.0],
            j_tilde: None,
        };
        assert!(matches!(random_coupler(&input, &[0.1, 0.1]), Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn condition_multiplied_form() {
        assert!(coupler_condition_holds(&[0.5], &[0.3]));
        assert!(!coupler_condition_holds(&[0.2], &[0.3]));
        // Tail mass 1 leaves nothing for resource 1; q'_1 = 0 is fine.
        assert!(coupler_condition_holds(&[0.0, 1.0], &[0.0, 1.0]));
    }

    #[test]
    fn assortment_edges() {
        assert!(build_assortment(&[], 0.25, &[]).unwrap().is_empty());
        assert_eq!(build_assortment(&[0, 2], 1.0, &[0.99, 0.0, 0.99]).unwrap(), vec![0, 2]);
        assert!(matches!(build_assortment(&[0], 1.5, &[0.0]), Err(Error::BadGamma(_))));
    }

    fn req(v: Vec<f64>, v0: f64) -> RequestType {
        RequestType {
            p: 1.0,
            l: 1,
            r: 1,
            w: vec![1.0; v.len()],
            v: Some(v),
            v0: Some(v0),
        }
    }

    #[test]
    fn customer_choice() {
        let r = req(vec![1.0, 0.0], 1.0);
        assert_eq!(simulate_choice(&[0], &r, true, 0.49).unwrap(), None);
        assert_eq!(simulate_choice(&[0], &r, true, 0.51).unwrap(), Some(0));
        assert_eq!(simulate_choice(&[0], &r, false, 0.9).unwrap(), None);
        assert!(matches!(simulate_choice(&[1], &r, true, 0.9), Err(Error::ZeroAttraction { resource: 2 })));
        let sure = req(vec![2.0], 0.0);
        assert_eq!(simulate_choice(&[0], &sure, true, 0.0).unwrap(), Some(0));
    }
}
