//! Verification batteries. Each suite draws its instances from the base
//! seed, checks one property against an independent oracle or a statistical
//! gate, and returns a serializable report. Reports hold no timings, so a
//! rerun with the same options serializes to the same bytes.

use std::fmt;
use std::str::FromStr;

use consec_lp::DenseSimplex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::Error;
use crate::fluid::solve_fluid;
use crate::generate::{generate, GeneratorSpec};
use crate::instance::{reduce_to_choice, Instance, Scenario};
use crate::oracle::{ddp, exact_online_choice, exact_online_reject, naive_dp_table};
use crate::policy_choice::{
    choice_distribution, coupler_exact_distribution, random_coupler, subset_probability, CouplerInput, COUPLER_TOL,
};
use crate::sim::{evaluate, independence_gate, marginal_gate, PolicyKind, SimConfig, SimReport};
use crate::slots::SlotState;

/// Slack for the LP dominance checks.
pub const DOMINANCE_TOL: f64 = 1e-6;
/// Tolerance for equalities between two exact DP values.
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Decomposability,
    DdpOptimality,
    LpDominance,
    SblpDominance,
    CouplerExact,
    MarginalGate,
    RatioGates,
    Lemma1Reduction,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] = [
        Suite::Decomposability,
        Suite::DdpOptimality,
        Suite::LpDominance,
        Suite::SblpDominance,
        Suite::CouplerExact,
        Suite::MarginalGate,
        Suite::RatioGates,
        Suite::Lemma1Reduction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Decomposability => "decomposability",
            Suite::DdpOptimality => "ddp-optimality",
            Suite::LpDominance => "lp-dominance",
            Suite::SblpDominance => "sblp-dominance",
            Suite::CouplerExact => "coupler-exact",
            Suite::MarginalGate => "marginal-gate",
            Suite::RatioGates => "ratio-gates",
            Suite::Lemma1Reduction => "lemma1-reduction",
            Suite::All => "all",
        }
    }

    /// Distinct per suite so suites never share instance seeds.
    fn tag(self) -> u64 {
        Suite::EACH.iter().position(|&s| s == self).map_or(0, |i| i as u64 + 1)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Suite::EACH
            .iter()
            .chain(&[Suite::All])
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown suite {s:?}")))
    }
}

/// Overrides for the suite defaults. `trials` scales instance (or input)
/// counts, `episodes` the Monte Carlo sample sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub base_seed: u64,
    pub trials: Option<usize>,
    pub episodes: Option<u64>,
}

impl VerifyOptions {
    pub fn new(base_seed: u64) -> Self {
        Self {
            base_seed,
            trials: None,
            episodes: None,
        }
    }

    fn trials(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    fn episodes(&self, default: u64) -> u64 {
        self.episodes.unwrap_or(default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub base_seed: u64,
    pub pass: bool,
    /// One line per checked item, for human eyes.
    pub summary: String,
    pub details: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub suites: Vec<SuiteReport>,
}

fn instance_seed(base: u64, suite: Suite, i: usize) -> u64 {
    base.wrapping_add(suite.tag() << 40).wrapping_add(i as u64)
}

fn instances(opts: &VerifyOptions, suite: Suite, count: usize, spec: &GeneratorSpec) -> Result<Vec<(u64, Instance)>, Error> {
    (0..count)
        .map(|i| {
            let seed = instance_seed(opts.base_seed, suite, i);
            Ok((seed, generate(seed, spec)?))
        })
        .collect()
}

fn report(suite: Suite, opts: &VerifyOptions, pass: bool, summary: String, details: impl Serialize) -> SuiteReport {
    SuiteReport {
        suite,
        base_seed: opts.base_seed,
        pass,
        summary,
        details: serde_json::to_value(details).expect("report values serialize"),
    }
}

/// Runs one suite, or every suite for [`Suite::All`].
pub fn run(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport, Error> {
    let suites = match suite {
        Suite::All => Suite::EACH.iter().map(|&s| run_one(s, opts)).collect::<Result<Vec<_>, _>>()?,
        s => vec![run_one(s, opts)?],
    };
    Ok(VerifyReport {
        pass: suites.iter().all(|s| s.pass),
        suites,
    })
}

pub fn run_one(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport, Error> {
    match suite {
        Suite::Decomposability => decomposability(opts),
        Suite::DdpOptimality => ddp_optimality(opts),
        Suite::LpDominance => lp_dominance(opts),
        Suite::SblpDominance => sblp_dominance(opts),
        Suite::CouplerExact => coupler_suite(opts),
        Suite::MarginalGate => marginal_suite(opts),
        Suite::RatioGates => ratio_gates(opts),
        Suite::Lemma1Reduction => lemma1_reduction(opts),
        Suite::All => Err(Error::Parse("`all` is not a single suite".into())),
    }
}

/// States reachable from the full state, indexed by period `1..=T+1`.
pub fn reachable_states(inst: &Instance) -> Vec<Vec<SlotState>> {
    let mut layers = vec![vec![SlotState::full(inst.n)]];
    for t in 1..=inst.t {
        let dem = inst.request(t).interval();
        let mut next: Vec<SlotState> = Vec::new();
        for &s in &layers[t - 1] {
            next.push(s);
            if let Ok(after) = s.allocate(dem) {
                next.push(after);
            }
        }
        next.sort_by_key(|s| s.raw());
        next.dedup();
        layers.push(next);
    }
    layers
}

#[derive(Serialize)]
struct DecompositionRow {
    seed: u64,
    n: usize,
    t: usize,
    states_checked: usize,
    max_abs_diff: f64,
}

fn decomposability(opts: &VerifyOptions) -> Result<SuiteReport, Error> {
    let suite = Suite::Decomposability;
    let spec = GeneratorSpec::with_ranges(Scenario::Reject, (1, 1), (1, 6), (1, 8));
    let insts = instances(opts, suite, opts.trials(100), &spec)?;
    let rows: Vec<DecompositionRow> = insts
        .par_iter()
        .map(|(seed, inst)| -> Result<DecompositionRow, Error> {
            let naive = naive_dp_table(inst)?;
            let table = ddp(inst)?;
            let mut checked = 0;
            let mut worst: f64 = 0.0;
            for (k, layer) in reachable_states(inst).iter().enumerate() {
                for &s in layer {
                    let diff = (naive.value(k + 1, s) - table.state_value(k + 1, s)).abs();
                    worst = worst.max(diff);
                    checked += 1;
                }
            }
            Ok(DecompositionRow {
                seed: *seed,
                n: inst.n,
                t: inst.t,
                states_checked: checked,
                max_abs_diff: worst,
            })
        })
        .collect::<Result<_, _>>()?;
    let max = rows.iter().map(|r| r.max_abs_diff).fold(0.0, f64::max);
    let states: usize = rows.iter().map(|r| r.states_checked).sum();
    let pass = max <= EXACT_TOL;
    let summary = format!(
        "{} instances, {states} reachable states, max |G - sum F| = {max:e} (tolerance {EXACT_TOL:e})",
        rows.len()
    );
    Ok(report(suite, opts, pass, summary, serde_json::json!({"max_abs_diff": max, "instances": rows})))
}

#[derive(Serialize)]
struct SimRow {
    seed: u64,
    m: usize,
    n: usize,
    t: usize,
    report: SimReport,
}

fn sim_rows(
    insts: &[(u64, Instance)],
    kind: PolicyKind,
    episodes: u64,
) -> Result<Vec<SimRow>, Error> {
    insts
        .iter()
        .map(|(seed, inst)| {
            let report = evaluate(inst, kind, &SimConfig::new(episodes, *seed))?;
            Ok(SimRow {
                seed: *seed,
                m: inst.m,
                n: inst.n,
                t: inst.t,
                report,
            })
        })
        .collect()
}

fn ddp_optimality(opts: &VerifyOptions) -> Result<SuiteReport, Error> {
    let suite = Suite::DdpOptimality;
    let spec = GeneratorSpec::with_ranges(Scenario::Reject, (1, 1), (1, 6), (1, 8));
    let insts = instances(opts, suite, opts.trials(20), &spec)?;
    let rows = sim_rows(&insts, PolicyKind::Ddp, opts.episodes(10_000))?;
    let failing = rows.iter().filter(|r| !r.report.verdict).count();
    let summary = format!(
        "{} instances, {failing} with |mean - optimum| above 3 standard errors",
        rows.len()
    );
    Ok(report(suite, opts, failing == 0, summary, serde_json::json!({"instances": rows})))
}

#[derive(Serialize)]
struct DominanceRow {
    seed: u64,
    m: usize,
    n: usize,
    t: usize,
    fluid: f64,
    exact: f64,
    slack: f64,
}

fn dominance(
    opts: &VerifyOptions,
    suite: Suite,
    spec: GeneratorSpec,
    count: usize,
    exact: fn(&Instance) -> Result<crate::oracle::ExactValue, Error>,
) -> Result<SuiteReport, Error> {
    let insts = instances(opts, suite, opts.trials(count), &spec)?;
    let rows: Vec<DominanceRow> = insts
        .par_iter()
        .map(|(seed, inst)| -> Result<DominanceRow, Error> {
            let fluid = solve_fluid(inst, &DenseSimplex::default())?.objective;
            let exact = exact(inst)?.value;
            Ok(DominanceRow {
                seed: *seed,
                m: inst.m,
                n: inst.n,
                t: inst.t,
                fluid,
                exact,
                slack: fluid - exact,
            })
        })
        .collect::<Result<_, _>>()?;
    let worst = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let pass = rows.iter().all(|r| r.slack >= -DOMINANCE_TOL);
    let summary = format!(
        "{} instances, min (fluid - exact online optimum) = {worst:e} (tolerance -{DOMINANCE_TOL:e})",
        rows.len()
    );
    Ok(report(suite, opts, pass, summary, serde_json::json!({"min_slack": worst, "instances": rows})))
}

fn lp_dominance(opts: &VerifyOptions) -> Result<SuiteReport, Error> {
    let spec = GeneratorSpec::with_ranges(Scenario::Reject, (1, 2), (1, 4), (1, 5));
    dominance(opts, Suite::LpDominance, spec, 50, exact_online_reject)
}

fn sblp_dominance(opts: &VerifyOptions) -> Result<SuiteReport, Error> {
    let spec = GeneratorSpec::with_ranges(Scenario::Choice, (1, 2), (1, 3), (1, 4));
    dominance(opts, Suite::SblpDominance, spec, 30, exact_online_choice)
}

/// Random `(q, q′)` satisfying the coupler condition, built from the last
/// resource down. About one entry in eight is pinned to 0 or 1.
pub fn random_coupler_pair(rng: &mut ChaCha8Rng, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut q = vec![0.0; m];
    let mut q_prime = vec![0.0; m];
    let mut tail = 0.0;
    for j in (0..m).rev() {
        q[j] = match rng.random_range(0..16) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        };
        let cap = q[j] * (1.0 - tail);
        q_prime[j] = if rng.random_range(0..8) == 0 { 0.0 } else { cap * rng.random::<f64>() };
        tail += q_prime[j];
    }
    (q, q_prime)
}

fn draw_choice(q_prime: &[f64], u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (j, p) in choice_distribution(q_prime) {
        acc += p;
        if u < acc {
            return j;
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplerExactCheck {
    pub inputs: usize,
    pub max_abs_diff: f64,
    pub pass: bool,
}

/// Compares the exact output law with the product of Bernoulli(q_j) for
/// every subset of `count` random inputs with M in 1..=3.
pub fn coupler_exact_check(seed: u64, count: usize) -> Result<CouplerExactCheck, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let m = rng.random_range(1..=3);
        let (q, q_prime) = random_coupler_pair(&mut rng, m);
        worst = worst.max(exact_product_gap(&q, &q_prime)?);
    }
    Ok(CouplerExactCheck {
        inputs: count,
        max_abs_diff: worst,
        pass: worst <= COUPLER_TOL,
    })
}

/// Largest per-subset gap between the exact law and the product law.
pub fn exact_product_gap(q: &[f64], q_prime: &[f64]) -> Result<f64, Error> {
    let dist = coupler_exact_distribution(q, q_prime)?;
    Ok(dist
        .iter()
        .enumerate()
        .map(|(mask, d)| (d - subset_probability(q, mask)).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionCheck {
    pub calls: usize,
    pub misses: usize,
    pub pass: bool,
}

/// Calls the sampler with a realized choice inside the resource set and
/// counts outputs that miss it.
pub fn coupler_inclusion_check(seed: u64, calls: usize) -> Result<InclusionCheck, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut misses = 0;
    for _ in 0..calls {
        let m = rng.random_range(1..=6);
        let (q, q_prime) = random_coupler_pair(&mut rng, m);
        let mass: f64 = q_prime.iter().sum();
        let j_tilde = if mass > 0.0 {
            // Drawn in proportion to q′ so the choice has positive probability.
            let u = rng.random::<f64>() * mass;
            let mut acc = 0.0;
            (0..m).find(|&j| {
                acc += q_prime[j];
                u < acc && q_prime[j] > 0.0
            })
            .unwrap_or_else(|| (0..m).rev().find(|&j| q_prime[j] > 0.0).expect("positive mass"))
        } else {
            rng.random_range(0..m)
        };
        let uniforms: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let input = CouplerInput {
            q,
            q_prime,
            j_tilde: Some(j_tilde),
        };
        let out = random_coupler(&input, &uniforms)?;
        misses += usize::from(!out.contains(&j_tilde));
    }
    Ok(InclusionCheck {
        calls,
        misses,
        pass: misses == 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplerMonteCarlo {
    pub q: Vec<f64>,
    pub q_prime: Vec<f64>,
    pub trials: u64,
    pub inclusion_frequency: Vec<f64>,
    /// `(freq − q)/sqrt(q(1−q)/trials)`; 0 where q is 0 or 1.
    pub z: Vec<f64>,
    /// Resources with q ∈ {0,1} whose frequency was not exactly q.
    pub exact_breaches: usize,
    pub pass: bool,
}

/// Draws the realized choice from q′, runs the sampler `trials` times and
/// compares per-resource inclusion frequencies with `q` at 4σ.
pub fn coupler_monte_carlo(q: &[f64], q_prime: &[f64], trials: u64, seed: u64) -> Result<CouplerMonteCarlo, Error> {
    let m = q.len();
    CouplerInput {
        q: q.to_vec(),
        q_prime: q_prime.to_vec(),
        j_tilde: None,
    }
    .check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0u64; m];
    let mut uniforms = vec![0.0; m];
    for _ in 0..trials {
        let j_tilde = draw_choice(q_prime, rng.random());
        uniforms.iter_mut().for_each(|u| *u = rng.random());
        let input = CouplerInput {
            q: q.to_vec(),
            q_prime: q_prime.to_vec(),
            j_tilde,
        };
        for j in random_coupler(&input, &uniforms)? {
            hits[j] += 1;
        }
    }
    let n = trials.max(1) as f64;
    let freq: Vec<f64> = hits.iter().map(|&h| h as f64 / n).collect();
    let mut z = vec![0.0; m];
    let mut breaches = 0;
    for j in 0..m {
        if q[j] <= 0.0 || q[j] >= 1.0 {
            breaches += usize::from(freq[j] != q[j]);
        } else {
            z[j] = (freq[j] - q[j]) / (q[j] * (1.0 - q[j]) / n).sqrt();
        }
    }
    let pass = breaches == 0 && z.iter().all(|v| v.abs() <= 4.0);
    Ok(CouplerMonteCarlo {
        q: q.to_vec(),
        q_prime: q_prime.to_vec(),
        trials,
        inclusion_frequency: freq,
        z,
        exact_breaches: breaches,
        pass,
    })
}

fn coupler_suite(opts: &VerifyOptions) -> Result<SuiteReport, Error> {
    let suite = Suite::CouplerExact;
    let seed = instance_seed(opts.base_seed, suite, 0);
    let exact = coupler_exact_check(seed, opts.trials(1000))?;
    let calls = opts.episodes(100_000);
    let inclusion = coupler_inclusion_check(seed.wrapping_add(1), calls as usize)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let configs: Vec<(Vec<f64>, Vec<f64>)> = (0..10)
        .map(|i| random_coupler_pair(&mut rng, 1 + i % 4))
        .collect();
    let mc: Vec<CouplerMonteCarlo> = configs
        .par_iter()
        .enumerate()
        .map(|(i, (q, qp))| coupler_monte_carlo(q, qp, calls, seed.wrapping_add(100 + i as u64)))
        .collect::<Result<_, _>>()?;
    let mc_pass = mc.iter().filter(|c| c.pass).count();
    let pass = exact.pass && inclusion.pass && mc_pass == mc.len();
    let summary = format!(
        "exact law: {} inputs, max gap {:e}; inclusion: {} misses in {} calls; Monte Carlo: {}/{} configurations within 4 sigma",
        exact.inputs,
        exact.max_abs_diff,
        inclusion.misses,
        inclusion.calls,
        mc_pass,
        mc.len()
    );
    Ok(report(
        suite,
        opts,
        pass,
        summary,
        serde_json::json!({"exact": exact, "inclusion": inclusion, "monte_carlo": mc}),
    ))
}

#[derive(Serialize)]
struct GateRow {
    seed: u64,
    policy: PolicyKind,
    violations: u64,
    gate: Value,
    pass: bool,
}

fn marginal_suite(opts: &VerifyOptions) -> Result<SuiteReport, Error> {
    let suite = Suite::MarginalGate;
    let episodes = opts.episodes(100_000);
    let designated = opts.trials(5);
    let mut rows = Vec::new();
    for (scenario, kind) in [(Scenario::Reject, PolicyKind::Reject), (Scenario::Choice, PolicyKind::Choice)] {
        let spec = GeneratorSpec::with_ranges(scenario, (2, 4), (3, 6), (8, 16));
        for (seed, inst) in instances(opts, suite, designated, &spec)? {
            let mut cfg = SimConfig::new(episodes, seed);
            cfg.marginals = true;
            let r = evaluate(&inst, kind, &cfg)?;
            let gate = marginal_gate(&r);
            let violations = r.invariant_violations.total();
            rows.push(GateRow {
                seed,
                policy: kind,
                violations,
                pass: gate.pass && violations == 0,
                gate: serde_json::to_value(gate).expect("gate serializes"),
            });
        }
    }
    let mut pair_rows = Vec::new();
    for (scenario, kind) in [(Scenario::Reject, PolicyKind::Reject), (Scenario::Choice, PolicyKind::Choice)] {
        let spec = GeneratorSpec::new(scenario, 2, 3, 4);
        for (seed, inst) in instances(opts, suite, 2, &spec)? {
            let mut cfg = SimConfig::new(episodes, seed ^ 0x5eed);
            cfg.pairs = true;
            let r = evaluate(&inst, kind, &cfg)?;
            let gate = independence_gate(&r);
            let violations = r.invariant_violations.total();
            pair_rows.push(GateRow {
                seed,
                policy: kind,
                violations,
                pass: gate.pass && violations == 0,
                gate: serde_json::to_value(gate).expect("gate serializes"),
            });
        }
    }
    let marg_ok = rows.iter().filter(|r| r.pass).count();
    let pair_ok = pair_rows.iter().filter(|r| r.pass).count();
    let violations: u64 = rows.iter().chain(&pair_rows).map(|r| r.violations).sum();
    let pass = marg_ok == rows.len() && pair_ok == pair_rows.len();
    let summary = format!(
        "marginal gate {marg_ok}/{} runs, independence gate {pair_ok}/{} runs, {violations} invariant violations",
        rows.len(),
        pair_rows.len()
    );
    Ok(report(
        suite,
        opts,
        pass,
        summary,
        serde_json::json!({"episodes": episodes, "marginal": rows, "independence": pair_rows}),
    ))
}

fn ratio_gates(opts: &VerifyOptions) -> Result<SuiteReport, Error> {
    let suite = Suite::RatioGates;
    let episodes = opts.episodes(10_000);
    let count = opts.trials(10);
    let reject_spec = GeneratorSpec::with_ranges(Scenario::Reject, (1, 5), (1, 6), (1, 20));
    let choice_spec = GeneratorSpec { scenario: Scenario::Choice, ..reject_spec.clone() };
    let reject = sim_rows(&instances(opts, suite, count, &reject_spec)?, PolicyKind::Reject, episodes)?;
    let choice = sim_rows(&instances(opts, suite, count, &choice_spec)?, PolicyKind::Choice, episodes)?;
    let ok_r = reject.iter().filter(|r| r.report.verdict).count();
    let ok_c = choice.iter().filter(|r| r.report.verdict).count();
    let summary = format!(
        "reject policy {ok_r}/{} instances at (1-1/e)*LP, choice policy {ok_c}/{} instances at 0.125*SBLP",
        reject.len(),
        choice.len()
    );
    let pass = ok_r == reject.len() && ok_c == choice.len();
    Ok(report(suite, opts, pass, summary, serde_json::json!({"reject": reject, "choice": choice})))
}

#[derive(Serialize)]
struct ReductionRow {
    seed: u64,
    m: usize,
    n: usize,
    t: usize,
    exact_reject: f64,
    exact_reduced: f64,
    abs_diff: f64,
    choice_policy: SimReport,
}

fn lemma1_reduction(opts: &VerifyOptions) -> Result<SuiteReport, Error> {
    let suite = Suite::Lemma1Reduction;
    let spec = GeneratorSpec::with_ranges(Scenario::Reject, (1, 2), (1, 3), (1, 4));
    let episodes = opts.episodes(10_000);
    let rows: Vec<ReductionRow> = instances(opts, suite, opts.trials(20), &spec)?
        .iter()
        .map(|(seed, inst)| -> Result<ReductionRow, Error> {
            let reduced = reduce_to_choice(inst)?;
            let exact_reject = exact_online_reject(inst)?.value;
            let exact_reduced = exact_online_choice(&reduced)?.value;
            let choice_policy = evaluate(&reduced, PolicyKind::Choice, &SimConfig::new(episodes, *seed))?;
            Ok(ReductionRow {
                seed: *seed,
                m: inst.m,
                n: inst.n,
                t: inst.t,
                exact_reject,
                exact_reduced,
                abs_diff: (exact_reject - exact_reduced).abs(),
                choice_policy,
            })
        })
        .collect::<Result<_, _>>()?;
    let max = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let verdicts = rows.iter().filter(|r| r.choice_policy.verdict).count();
    let pass = max <= EXACT_TOL && verdicts == rows.len();
    let summary = format!(
        "{} instances, max |reduced - original| = {max:e}, choice policy verdict {verdicts}/{}",
        rows.len(),
        rows.len()
    );
    Ok(report(suite, opts, pass, summary, serde_json::json!({"max_abs_diff": max, "instances": rows})))
}
