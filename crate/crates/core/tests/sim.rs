use consec_rm::sim::*;
use consec_rm::*;

fn reject_inst(m: usize, n: usize, reqs: &[(f64, usize, usize, &[f64])]) -> Instance {
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

#[test]
fn silent_horizon_earns_nothing() {
    let inst = reject_inst(2, 3, &[(0.0, 1, 2, &[5.0, 6.0]), (0.0, 2, 3, &[1.0, 9.0])]);
    for kind in [PolicyKind::Reject, PolicyKind::Choice] {
        let inst = if kind == PolicyKind::Choice { reduce_to_choice(&inst).unwrap() } else { inst.clone() };
        let r = evaluate(&inst, kind, &SimConfig::new(500, 1)).unwrap();
        assert_eq!(r.mean_revenue, 0.0);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.lp_bound, 0.0);
        assert!(r.verdict);
    }
}

#[test]
fn certain_sale_earns_its_price() {
    let inst = reject_inst(1, 2, &[(1.0, 1, 2, &[4.5])]);
    let (guide, bound) = Guide::prepare(&inst, PolicyKind::Reject).unwrap();
    assert_eq!(bound, 4.5);
    for e in 0..50 {
        let out = run_episode(&inst, &guide, PolicyKind::Reject, 0.25, 3, e, false).unwrap();
        assert_eq!(out.revenue, 4.5);
    }
    let r = evaluate(&inst, PolicyKind::Ddp, &SimConfig::new(100, 3)).unwrap();
    assert_eq!(r.mean_revenue, 4.5);
}

#[test]
fn replayed_episodes_match() {
    for (scenario, kind) in [
        (Scenario::Reject, PolicyKind::Reject),
        (Scenario::Choice, PolicyKind::Choice),
    ] {
        let inst = generate(17, &GeneratorSpec::new(scenario, 3, 5, 12)).unwrap();
        let (guide, _) = Guide::prepare(&inst, kind).unwrap();
        for e in [0, 1, 999] {
            let a = run_episode(&inst, &guide, kind, 0.25, 42, e, true).unwrap();
            let b = run_episode(&inst, &guide, kind, 0.25, 42, e, true).unwrap();
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.revenue.to_bits(), b.revenue.to_bits());
            assert_eq!(a.trace.len(), inst.t);
        }
    }
}

#[test]
fn trace_fields_are_one_based() {
    let inst = reject_inst(2, 2, &[(1.0, 1, 1, &[1.0, 8.0])]);
    let (guide, _) = Guide::prepare(&inst, PolicyKind::Reject).unwrap();
    let out = run_episode(&inst, &guide, PolicyKind::Reject, 0.25, 0, 0, true).unwrap();
    let line = &out.trace[0];
    assert_eq!(line["t"], 1);
    assert_eq!(line["j_star"], 2);
    assert_eq!(line["proposals"], serde_json::json!([2]));
    assert_eq!(line["revenue"], 8.0);
}

#[test]
fn reports_are_bit_identical_across_pools() {
    let inst = generate(5, &GeneratorSpec::new(Scenario::Choice, 3, 4, 10)).unwrap();
    let mut cfg = SimConfig::new(3000, 77);
    cfg.marginals = true;
    cfg.pairs = true;
    let a = evaluate(&inst, PolicyKind::Choice, &cfg).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = single.install(|| evaluate(&inst, PolicyKind::Choice, &cfg)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.mean_revenue.to_bits(), b.mean_revenue.to_bits());
}

#[test]
fn estimator_stays_in_range() {
    for seed in 0..5 {
        let inst = generate(seed, &GeneratorSpec::new(Scenario::Reject, 2, 4, 8)).unwrap();
        let r = evaluate(&inst, PolicyKind::Reject, &SimConfig::new(1000, seed)).unwrap();
        assert!(r.mean_revenue >= 0.0 && r.mean_revenue <= inst.revenue_cap());
        assert_eq!(r.episodes, 1000);
        assert!((r.ratio_lhs - (r.mean_revenue - 3.0 * r.std_error)).abs() < 1e-12);
    }
}

#[test]
fn too_few_episodes_refused() {
    let inst = reject_inst(1, 1, &[(1.0, 1, 1, &[1.0])]);
    assert!(matches!(
        evaluate(&inst, PolicyKind::Reject, &SimConfig::new(99, 0)),
        Err(Error::BadConfig(_))
    ));
}

#[test]
fn wrong_policy_for_scenario() {
    let inst = reject_inst(1, 1, &[(1.0, 1, 1, &[1.0])]);
    assert!(matches!(
        evaluate(&inst, PolicyKind::Choice, &SimConfig::new(100, 0)),
        Err(Error::WrongScenario { .. })
    ));
    let two = reject_inst(2, 1, &[(1.0, 1, 1, &[1.0, 1.0])]);
    assert!(evaluate(&two, PolicyKind::Ddp, &SimConfig::new(100, 0)).is_err());
}

#[test]
fn first_period_holds_the_whole_run() {
    let inst = generate(3, &GeneratorSpec::new(Scenario::Reject, 2, 4, 6)).unwrap();
    let mut cfg = SimConfig::new(10_000, 8);
    cfg.marginals = true;
    let r = evaluate(&inst, PolicyKind::Reject, &cfg).unwrap();
    for c in r.marginal_table.iter().filter(|c| c.t == 1) {
        if (c.a, c.b) == (1, inst.n) {
            assert_eq!(c.count, 10_000);
        } else {
            assert_eq!(c.count, 0);
        }
    }
    // Probability-zero cells stay empty.
    for c in &r.marginal_table {
        if c.fluid_x <= ZERO_MASS {
            assert_eq!(c.count, 0, "{c:?}");
        }
    }
    let gate = marginal_gate(&r);
    assert!(gate.pass, "{gate:?}");
    assert!(gate.worst.len() <= 10);
    assert!(gate.worst.windows(2).all(|w| w[0].z.abs() >= w[1].z.abs()));
}

#[test]
fn marginal_gate_needs_enough_episodes() {
    let inst = generate(3, &GeneratorSpec::new(Scenario::Reject, 2, 4, 6)).unwrap();
    let mut cfg = SimConfig::new(2_000, 8);
    cfg.marginals = true;
    let r = evaluate(&inst, PolicyKind::Reject, &cfg).unwrap();
    assert!(!marginal_gate(&r).pass);
}

#[test]
fn marginal_gate_catches_a_biased_table() {
    let inst = generate(3, &GeneratorSpec::new(Scenario::Reject, 2, 4, 6)).unwrap();
    let mut cfg = SimConfig::new(10_000, 8);
    cfg.marginals = true;
    let mut r = evaluate(&inst, PolicyKind::Reject, &cfg).unwrap();
    assert!(marginal_gate(&r).pass);
    let mut biased = 0;
    for c in r.marginal_table.iter_mut() {
        if c.fluid_x > ZERO_MASS && c.fluid_x < 1.0 - ZERO_MASS {
            c.z = 10.0;
            biased += 1;
        }
    }
    assert!(biased > 0);
    assert!(!marginal_gate(&r).pass);
}

#[test]
fn marginal_csv_has_one_row_per_cell() {
    let inst = generate(4, &GeneratorSpec::new(Scenario::Reject, 2, 3, 4)).unwrap();
    let mut cfg = SimConfig::new(200, 1);
    cfg.marginals = true;
    let r = evaluate(&inst, PolicyKind::Reject, &cfg).unwrap();
    let csv = marginal_csv(&r);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("j,t,a,b,fluid_x,count,empirical,z"));
    assert_eq!(lines.count(), 2 * 4 * 6);
}

#[test]
fn independence_gate_on_tiny_instance() {
    let inst = generate(2, &GeneratorSpec::new(Scenario::Reject, 2, 3, 4)).unwrap();
    let mut cfg = SimConfig::new(50_000, 5);
    cfg.pairs = true;
    let r = evaluate(&inst, PolicyKind::Reject, &cfg).unwrap();
    let gate = independence_gate(&r);
    assert!(gate.pass && gate.cells_tested > 0, "{gate:?}");
}

#[test]
fn ddp_policy_matches_dp_value() {
    let inst = generate(6, &GeneratorSpec::new(Scenario::Reject, 1, 5, 8)).unwrap();
    let r = evaluate(&inst, PolicyKind::Ddp, &SimConfig::new(10_000, 2)).unwrap();
    assert!(r.verdict, "{r:?}");
    assert_eq!(r.ratio_target, 1.0);
}
