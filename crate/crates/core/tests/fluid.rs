use consec_lp::{solve, DenseSimplex};
use consec_rm::fluid::{build, FLUID_TOL};
use consec_rm::oracle::{exact_online_choice, exact_online_reject, naive_dp};
use consec_rm::{
    build_lp, build_sblp, extract, generate, solve_fluid, GeneratorSpec, Instance, Interval, RequestType, Scenario,
};

fn one_request(scenario: Scenario, p: f64, w: f64, v: f64, v0: f64) -> Instance {
    let choice = scenario == Scenario::Choice;
    Instance {
        scenario,
        m: 1,
        n: 1,
        t: 1,
        requests: vec![RequestType {
            p,
            l: 1,
            r: 1,
            w: vec![w],
            v: choice.then(|| vec![v]),
            v0: choice.then_some(v0),
        }],
    }
}

#[test]
fn lp_hand_example() {
    let inst = one_request(Scenario::Reject, 1.0, 5.0, 0.0, 0.0);
    let fm = build_lp(&inst).unwrap();
    let sol = solve(&fm.model);
    assert!((sol.objective - 5.0).abs() < 1e-9);
    let f = extract(&inst, &fm, &sol).unwrap();
    let iv = Interval::new(1, 1);
    assert!((f.x(0, 1, iv) - 1.0).abs() < 1e-9);
    assert!((f.y(0, 1, iv) - 1.0).abs() < 1e-9);
}

#[test]
fn empty_horizon_models() {
    let mut inst = one_request(Scenario::Reject, 1.0, 5.0, 0.0, 0.0);
    inst.t = 0;
    inst.requests.clear();
    let fm = build_lp(&inst).unwrap();
    assert_eq!(fm.num_vars(), 0);
    let f = extract(&inst, &fm, &solve(&fm.model)).unwrap();
    assert_eq!(f.objective, 0.0);
}

#[test]
fn sblp_hand_example() {
    let inst = one_request(Scenario::Choice, 1.0, 4.0, 1.0, 1.0);
    let fm = build_sblp(&inst).unwrap();
    let sol = solve(&fm.model);
    assert!((sol.objective - 2.0).abs() < 1e-9, "{}", sol.objective);
    let f = extract(&inst, &fm, &sol).unwrap();
    let iv = Interval::new(1, 1);
    assert!((f.y(0, 1, iv) - 0.5).abs() < 1e-9);
    assert!((f.y0(0, 1, iv) - 0.5).abs() < 1e-9);
}

#[test]
fn sblp_zero_attractions() {
    let mut spec = GeneratorSpec::new(Scenario::Choice, 2, 3, 4);
    spec.zero_v_prob = 1.0;
    let inst = generate(4, &spec).unwrap();
    let f = solve_fluid(&inst, &DenseSimplex::default()).unwrap();
    assert_eq!(f.objective, 0.0);
}

#[test]
fn wrong_scenarios() {
    let r = one_request(Scenario::Reject, 1.0, 5.0, 0.0, 0.0);
    let c = one_request(Scenario::Choice, 1.0, 5.0, 1.0, 1.0);
    assert!(build_sblp(&r).is_err());
    assert!(build_lp(&c).is_err());
}

#[test]
fn variable_counts() {
    for (m, n, t) in [(1, 1, 1), (2, 3, 4), (3, 5, 2), (1, 6, 7)] {
        let k = n * (n + 1) / 2;
        let r = generate(1, &GeneratorSpec::new(Scenario::Reject, m, n, t)).unwrap();
        assert_eq!(build_lp(&r).unwrap().num_vars(), m * t * k * 2);
        let c = generate(1, &GeneratorSpec::new(Scenario::Choice, m, n, t)).unwrap();
        assert_eq!(build_sblp(&c).unwrap().num_vars(), m * t * k * 3 + t);
    }
}

#[test]
fn dominance_and_structure_on_small_instances() {
    for seed in 0..12 {
        let spec = GeneratorSpec::with_ranges(Scenario::Reject, (1, 2), (1, 4), (1, 5));
        let inst = generate(seed, &spec).unwrap();
        let f = solve_fluid(&inst, &DenseSimplex::default()).unwrap();
        let exact = exact_online_reject(&inst).unwrap().value;
        assert!(f.objective >= exact - 1e-6, "seed {seed}: {} < {exact}", f.objective);
        if inst.m == 1 {
            assert!(f.objective >= naive_dp(&inst).unwrap().value - 1e-6);
        }
        // Balance never creates slot mass.
        for j in 0..inst.m {
            let mass = |t: usize| -> f64 { f.intervals().iter().map(|iv| f.x(j, t, iv) * iv.len() as f64).sum() };
            for t in 2..=inst.t {
                assert!(mass(t) <= mass(t - 1) + 1e-7);
            }
        }
    }
    for seed in 0..8 {
        let spec = GeneratorSpec::with_ranges(Scenario::Choice, (1, 2), (1, 3), (1, 4));
        let inst = generate(seed, &spec).unwrap();
        let f = solve_fluid(&inst, &DenseSimplex::default()).unwrap();
        let exact = exact_online_choice(&inst).unwrap().value;
        assert!(f.objective >= exact - 1e-6, "seed {seed}: {} < {exact}", f.objective);
        for t in 1..=inst.t {
            let req = inst.request(t);
            for j in 0..inst.m {
                for iv in f.intervals().iter() {
                    let r = req.outside() * f.y(j, t, iv) - req.attraction(j) * f.y0(j, t, iv);
                    assert!(r.abs() <= FLUID_TOL);
                }
            }
        }
    }
}

#[test]
fn json_roundtrip() {
    for scenario in [Scenario::Reject, Scenario::Choice] {
        let inst = generate(9, &GeneratorSpec::new(scenario, 2, 3, 3)).unwrap();
        let f = solve_fluid(&inst, &DenseSimplex::default()).unwrap();
        let text = f.to_json();
        assert!(text.contains("\"1:1:1:3\""));
        assert_eq!(consec_rm::FluidSolution::from_json(&text).unwrap(), f);
    }
}

#[test]
fn largest_sizes_solve() {
    for scenario in [Scenario::Reject, Scenario::Choice] {
        let inst = generate(3, &GeneratorSpec::new(scenario, 5, 6, 20)).unwrap();
        let fm = build(&inst).unwrap();
        let sol = solve(&fm.model);
        assert_eq!(sol.status, consec_lp::LpStatus::Optimal, "{scenario:?}");
        assert!(sol.max_violation <= 1e-7, "{scenario:?}: {:e}", sol.max_violation);
        extract(&inst, &fm, &sol).unwrap();
    }
}

#[test]
fn degenerate_choice_instance_solves() {
    // Long degenerate pivot runs on this instance used to wreck the tableau.
    let spec = GeneratorSpec::with_ranges(Scenario::Choice, (1, 5), (1, 6), (1, 20));
    let inst = generate(9 + (7 << 40), &spec).unwrap();
    assert_eq!((inst.m, inst.n, inst.t), (3, 5, 20));
    let f = solve_fluid(&inst, &DenseSimplex::default()).unwrap();
    assert!(f.objective > 0.0 && f.clamp_magnitude < 1e-9);
}
