use consec_lp::DenseSimplex;
use consec_rm::policy_choice::{
    build_assortment, coupler_exact_distribution, coupler_vectors, simulate_choice, ChoicePolicy, COUPLER_TOL,
};
use consec_rm::rng::PeriodDraws;
use consec_rm::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reject(m: usize, n: usize, reqs: &[(f64, usize, usize, &[f64])]) -> Instance {
    Instance {
        scenario: Scenario::Reject,
        m,
        n,
        t: reqs.len(),
        requests: reqs
            .iter()
            .map(|&(p, l, r, w)| RequestType {
                p,
                l,
                r,
                w: w.to_vec(),
                v: None,
                v0: None,
            })
            .collect(),
    }
    .checked()
    .unwrap()
}

fn choice(m: usize, n: usize, reqs: &[(f64, usize, usize, &[f64], &[f64], f64)]) -> Instance {
    Instance {
        scenario: Scenario::Choice,
        m,
        n,
        t: reqs.len(),
        requests: reqs
            .iter()
            .map(|&(p, l, r, w, v, v0)| RequestType {
                p,
                l,
                r,
                w: w.to_vec(),
                v: Some(v.to_vec()),
                v0: Some(v0),
            })
            .collect(),
    }
    .checked()
    .unwrap()
}

fn solve(inst: &Instance) -> FluidSolution {
    solve_fluid(inst, &DenseSimplex::default()).unwrap()
}

fn draws(m: usize, arrival: f64, customer: f64, fill: f64) -> PeriodDraws {
    PeriodDraws {
        arrival,
        customer,
        proposal: vec![fill; m],
        downdate: vec![fill; m],
        assortment: vec![fill; m],
        coupler: vec![fill; m],
    }
}

#[test]
fn init_fills_every_row() {
    let inst = reject(3, 4, &[(0.5, 1, 2, &[1.0, 2.0, 3.0])]);
    let fluid = solve(&inst);
    let p = RejectPolicy::init(&inst, &fluid).unwrap();
    assert_eq!(p.ledger.resources(), 3);
    assert_eq!(p.ledger.period, 1);
    for j in 0..3 {
        assert_eq!(p.ledger.virtual_status[j], SlotState::full(4));
        assert_eq!(p.ledger.real[j], SlotState::full(4));
    }
}

#[test]
fn empty_horizon_initializes() {
    let inst = reject(2, 3, &[]);
    let fluid = solve(&inst);
    let p = RejectPolicy::init(&inst, &fluid).unwrap();
    assert_eq!(p.ledger.period, 1);
    assert!(p.ledger.lower_bound_holds());
}

#[test]
fn mismatched_fluid_rejected() {
    let a = reject(1, 3, &[(0.5, 1, 2, &[1.0])]);
    let b = reject(2, 3, &[(0.5, 1, 2, &[1.0, 1.0])]);
    let fluid = solve(&a);
    assert!(matches!(RejectPolicy::init(&b, &fluid), Err(Error::Mismatch(_))));
    let c = reduce_to_choice(&a).unwrap();
    assert!(matches!(
        ChoicePolicy::init(&c, &fluid, 0.25),
        Err(Error::WrongScenario { .. }) | Err(Error::Mismatch(_))
    ));
}

#[test]
fn saturated_state_proposes_surely() {
    // One slot, one period: the fluid sells the slot whenever the request comes.
    let inst = reject(1, 1, &[(0.6, 1, 1, &[5.0])]);
    let fluid = solve(&inst);
    let iv = Interval::new(1, 1);
    assert!((fluid.y(0, 1, iv) - 0.6).abs() < 1e-9);
    let p = RejectPolicy::init(&inst, &fluid).unwrap();
    assert_eq!(p.proposal_probability(1, 0), 1.0);
}

#[test]
fn zero_sale_mass_never_proposes() {
    // Slot 1 is worth far more in period 2, so period 1 sells nothing.
    let inst = reject(1, 1, &[(1.0, 1, 1, &[1.0]), (1.0, 1, 1, &[10.0])]);
    let fluid = solve(&inst);
    let p = RejectPolicy::init(&inst, &fluid).unwrap();
    assert_eq!(p.proposal_probability(1, 0), 0.0);
    assert_eq!(p.proposal_probability(2, 0), 1.0);
}

#[test]
fn no_containing_sequence_never_proposes() {
    let inst = reject(1, 2, &[(1.0, 1, 1, &[3.0]), (1.0, 1, 2, &[9.0])]);
    let fluid = solve(&inst);
    let mut p = RejectPolicy::init(&inst, &fluid).unwrap();
    p.ledger.virtual_status[0] = "01".parse().unwrap();
    p.ledger.period = 2;
    assert_eq!(p.proposal_probability(2, 0), 0.0);
}

#[test]
fn empty_proposals_change_nothing() {
    let inst = reject(2, 3, &[(1.0, 1, 2, &[4.0, 5.0])]);
    let fluid = solve(&inst);
    let mut p = RejectPolicy::init(&inst, &fluid).unwrap();
    let before = p.ledger.clone();
    let out = p.allocation_stage(1, &[], true, &[0.0, 0.0]).unwrap();
    assert_eq!(out.revenue, 0.0);
    assert!(!out.allocated && out.chosen.is_none());
    assert_eq!(p.ledger.virtual_status, before.virtual_status);
    assert_eq!(p.ledger.real, before.real);
    assert_eq!(p.ledger.period, 2);
}

#[test]
fn single_proposer_collects() {
    let inst = reject(2, 3, &[(1.0, 2, 3, &[4.0, 7.0])]);
    let fluid = solve(&inst);
    let mut p = RejectPolicy::init(&inst, &fluid).unwrap();
    let out = p.allocation_stage(1, &[1], true, &[1.0, 1.0]).unwrap();
    assert!(out.allocated);
    assert_eq!(out.chosen, Some(1));
    assert_eq!(out.revenue, 7.0);
    let expect: SlotState = "100".parse().unwrap();
    assert_eq!(p.ledger.real[1], expect);
    assert_eq!(p.ledger.virtual_status[1], expect);
    assert_eq!(p.ledger.real[0], SlotState::full(3));
}

#[test]
fn ties_go_to_lowest_index() {
    let inst = reject(2, 2, &[(1.0, 1, 1, &[6.0, 6.0])]);
    let fluid = solve(&inst);
    let mut p = RejectPolicy::init(&inst, &fluid).unwrap();
    // The loser keeps its virtual status because its downdate draw misses.
    let out = p.allocation_stage(1, &[0, 1], true, &[1.0, 1.0]).unwrap();
    assert_eq!(out.chosen, Some(0));
    assert_eq!(out.revenue, 6.0);
    assert_eq!(p.ledger.virtual_status[1], SlotState::full(2));
}

#[test]
fn losing_proposers_downdate_without_selling() {
    let inst = reject(2, 2, &[(0.5, 1, 1, &[6.0, 3.0])]);
    let fluid = solve(&inst);
    let mut p = RejectPolicy::init(&inst, &fluid).unwrap();
    let out = p.allocation_stage(1, &[0, 1], false, &[0.0, 0.0]).unwrap();
    assert!(!out.allocated);
    assert_eq!(p.ledger.virtual_status[0], SlotState::full(2));
    assert_eq!(p.ledger.virtual_status[1], "01".parse().unwrap());
    assert_eq!(p.ledger.real[1], SlotState::full(2));
    assert!(p.ledger.lower_bound_holds());
}

#[test]
fn real_breach_is_reported() {
    let inst = reject(1, 2, &[(1.0, 1, 2, &[2.0])]);
    let fluid = solve(&inst);
    let mut p = RejectPolicy::init(&inst, &fluid).unwrap();
    p.ledger.real[0] = "01".parse().unwrap();
    p.ledger.virtual_status[0] = "01".parse().unwrap();
    let err = p.allocation_stage(1, &[0], true, &[1.0]).unwrap_err();
    assert!(matches!(err, Error::OccupiedSlot { .. }));
    assert_eq!(p.violations.occupied_slot, 1);
    assert_eq!(p.ledger.period, 2);
}

#[test]
fn step_respects_outcome_invariants() {
    let spec = GeneratorSpec::new(Scenario::Reject, 3, 5, 10);
    let inst = generate(11, &spec).unwrap();
    let fluid = solve(&inst);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut p = RejectPolicy::init(&inst, &fluid).unwrap();
        for t in 1..=inst.t {
            let out = p.step(&PeriodDraws::from_rng(&mut rng, inst.m));
            if out.allocated {
                let j = out.chosen.unwrap();
                assert_eq!(out.revenue, inst.request(t).w[j]);
            } else {
                assert_eq!(out.revenue, 0.0);
            }
        }
        assert_eq!(p.violations.total(), 0);
    }
}

#[test]
fn zero_attraction_never_proposed() {
    let inst = choice(2, 2, &[(1.0, 1, 2, &[3.0, 4.0], &[0.0, 1.0], 1.0)]);
    let fluid = solve(&inst);
    let p = ChoicePolicy::init(&inst, &fluid, 0.25).unwrap();
    assert_eq!(p.proposal_probability(1, 0), 0.0);
    assert!(p.proposal_probability(1, 1) > 0.0);
}

#[test]
fn bad_gamma_rejected() {
    let inst = choice(1, 1, &[(1.0, 1, 1, &[1.0], &[1.0], 1.0)]);
    let fluid = solve(&inst);
    for g in [0.0, 0.6, -1.0, f64::NAN] {
        assert!(matches!(ChoicePolicy::init(&inst, &fluid, g), Err(Error::BadGamma(_))));
    }
    assert!(ChoicePolicy::init(&inst, &fluid, 0.5).is_ok());
}

#[test]
fn both_kept_at_quarter_gamma() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 100_000;
    let mut both = 0;
    for _ in 0..n {
        let u = [rng.random::<f64>(), rng.random::<f64>()];
        both += usize::from(build_assortment(&[0, 1], 0.25, &u).unwrap().len() == 2);
    }
    let freq = both as f64 / n as f64;
    let p = 1.0 / 16.0;
    assert!((freq - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{freq}");
}

#[test]
fn symmetric_choice_is_fair() {
    let r = RequestType {
        p: 1.0,
        l: 1,
        r: 1,
        w: vec![1.0],
        v: Some(vec![2.0]),
        v0: Some(2.0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 100_000;
    let picked = (0..n)
        .filter(|_| simulate_choice(&[0], &r, true, rng.random()).unwrap() == Some(0))
        .count();
    let freq = picked as f64 / n as f64;
    assert!((freq - 0.5).abs() <= 4.0 * (0.25 / n as f64).sqrt());
}

#[test]
fn quiet_period_changes_nothing() {
    let inst = choice(2, 3, &[(0.5, 1, 2, &[3.0, 4.0], &[1.0, 1.0], 1.0)]);
    let fluid = solve(&inst);
    let mut p = ChoicePolicy::init(&inst, &fluid, 0.25).unwrap();
    let out = p.choice_step(&draws(2, 1.0, 0.5, 1.0));
    assert!(!out.arrived);
    assert!(out.proposals.is_empty() && out.update_set.is_empty());
    assert_eq!(out.chosen, None);
    assert_eq!(out.revenue, 0.0);
    assert!(p.ledger.virtual_status.iter().chain(&p.ledger.real).all(|s| *s == SlotState::full(3)));
}

#[test]
fn chosen_resource_is_updated_and_sold() {
    // No outside option, so the offered resource is always bought.
    let inst = choice(2, 3, &[(1.0, 2, 2, &[3.0, 4.0], &[1.0, 1.0], 0.0)]);
    let fluid = solve(&inst);
    let mut p = ChoicePolicy::init(&inst, &fluid, 0.25).unwrap();
    assert_eq!(p.proposal_probability(1, 1), 1.0);
    let mut d = draws(2, 0.0, 0.5, 1.0);
    d.proposal = vec![1.0, 0.0];
    d.assortment = vec![1.0, 0.0];
    d.coupler = vec![0.5, 0.5];
    let out = p.choice_step(&d);
    assert_eq!(out.assortment, vec![1]);
    assert_eq!(out.chosen, Some(1));
    assert!(out.update_set.contains(&1));
    assert_eq!(out.revenue, 4.0);
    assert_eq!(p.ledger.real[1], "101".parse().unwrap());
    assert_eq!(p.ledger.real[0], SlotState::full(3));
    assert_eq!(p.violations.total(), 0);
}

#[test]
fn choice_steps_keep_invariants() {
    let spec = GeneratorSpec::new(Scenario::Choice, 3, 5, 12);
    let inst = generate(5, &spec).unwrap();
    let fluid = solve(&inst);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let mut p = ChoicePolicy::init(&inst, &fluid, 0.25).unwrap();
        for t in 1..=inst.t {
            let before = p.ledger.real.clone();
            let out = p.choice_step(&PeriodDraws::from_rng(&mut rng, inst.m));
            let dem = inst.request(t).interval();
            assert!(out.assortment.iter().all(|&j| before[j].covers(dem)));
            assert!(out.assortment.iter().all(|j| out.proposals.contains(j)));
            match out.chosen {
                Some(j) => {
                    assert!(out.assortment.contains(&j) && out.update_set.contains(&j));
                    assert_eq!(out.revenue, inst.request(t).w[j]);
                }
                None => assert_eq!(out.revenue, 0.0),
            }
        }
        assert_eq!(p.violations.total(), 0);
    }
}

#[test]
fn in_policy_coupler_vectors_meet_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..2000 {
        let m = rng.random_range(1..=5);
        let req = RequestType {
            p: rng.random_range(0.01..=1.0),
            l: 1,
            r: 1,
            w: vec![1.0; m],
            v: Some((0..m).map(|_| rng.random_range(0.01..5.0)).collect()),
            v0: Some(if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.01..5.0) }),
        };
        let props: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.6)).collect();
        let offered: Vec<usize> = props.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let (q, qp) = coupler_vectors(&req, m, &props, &offered);
        assert!(policy_choice::coupler_condition_holds(&q, &qp));
        let d = coupler_exact_distribution(&q, &qp).unwrap();
        for (mask, prob) in d.iter().enumerate() {
            let want = policy_choice::subset_probability(&q, mask);
            assert!((prob - want).abs() <= COUPLER_TOL);
        }
    }
}
