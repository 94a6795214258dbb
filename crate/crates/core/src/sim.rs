//! Monte Carlo evaluation of the policies.
//!
//! Episodes run in fixed-size chunks on the rayon pool. Each chunk folds its
//! episodes in index order, and chunk summaries are merged in chunk order,
//! so every statistic is bit-identical however the pool schedules work.

use consec_lp::DenseSimplex;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::fluid::{solve_fluid, FluidSolution};
use crate::instance::{Instance, Scenario};
use crate::interval::Interval;
use crate::ledger::ViolationCounters;
use crate::oracle::{ddp, ddp_policy_act, naive_dp, DdpTable};
use crate::policy_choice::{ChoicePolicy, DEFAULT_GAMMA};
use crate::policy_reject::RejectPolicy;
use crate::rng::EpisodeStreams;
use crate::slots::SlotState;

/// Episodes per parallel work unit. Part of the reproducibility contract:
/// changing it changes the floating-point merge order.
pub const CHUNK: u64 = 512;
/// Approximation ratio guaranteed for the reject policy.
pub const REJECT_RATIO: f64 = 1.0 - 1.0 / std::f64::consts::E;
/// Approximation ratio guaranteed for the choice policy.
pub const CHOICE_RATIO: f64 = 0.125;
/// Fewest episodes [`evaluate`] accepts.
pub const MIN_EPISODES: u64 = 100;
/// Minimum number of episodes for the marginal gate to be meaningful.
pub const MARGINAL_MIN_EPISODES: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Reject,
    Choice,
    /// Optimal single-resource policy read off the decomposed DP.
    Ddp,
}

/// What a policy needs besides the instance.
pub enum Guide {
    Fluid(FluidSolution),
    Ddp(DdpTable),
}

impl Guide {
    /// Solves whatever `kind` needs, returning it with the benchmark value.
    pub fn prepare(inst: &Instance, kind: PolicyKind) -> Result<(Guide, f64), Error> {
        match kind {
            PolicyKind::Reject | PolicyKind::Choice => {
                let scenario = if kind == PolicyKind::Reject { Scenario::Reject } else { Scenario::Choice };
                inst.require(scenario)?;
                let f = solve_fluid(inst, &DenseSimplex::default())?;
                let bound = f.objective;
                Ok((Guide::Fluid(f), bound))
            }
            PolicyKind::Ddp => {
                let bound = naive_dp(inst)?.value;
                Ok((Guide::Ddp(ddp(inst)?), bound))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub episodes: u64,
    pub base_seed: u64,
    pub gamma: f64,
    /// Fill the per-(j,t,[a,b]) marginal table.
    pub marginals: bool,
    /// Fill joint counts for pairs of resources (tiny instances only).
    pub pairs: bool,
}

impl SimConfig {
    pub fn new(episodes: u64, base_seed: u64) -> Self {
        Self {
            episodes,
            base_seed,
            gamma: DEFAULT_GAMMA,
            marginals: false,
            pairs: false,
        }
    }
}

pub struct EpisodeResult {
    pub revenue: f64,
    pub violations: ViolationCounters,
    /// One JSON object per period when tracing was requested.
    pub trace: Vec<Value>,
}

fn one_based(set: &[usize]) -> Vec<usize> {
    set.iter().map(|j| j + 1).collect()
}

/// Runs episode `episode` of the stream family `base_seed`. `observe` sees
/// the virtual statuses (real status for the DDP policy) at the start of
/// every period.
pub fn run_episode_with(
    inst: &Instance,
    guide: &Guide,
    kind: PolicyKind,
    gamma: f64,
    base_seed: u64,
    episode: u64,
    trace: bool,
    mut observe: impl FnMut(usize, &[SlotState]),
) -> Result<EpisodeResult, Error> {
    let mut streams = EpisodeStreams::new(base_seed, episode, inst.m);
    let mut revenue = 0.0;
    let mut lines = Vec::new();
    let violations = match (kind, guide) {
        (PolicyKind::Reject, Guide::Fluid(f)) => {
            let mut policy = RejectPolicy::init(inst, f)?;
            for t in 1..=inst.t {
                observe(t, &policy.ledger.virtual_status);
                let o = policy.step(&streams.next_period());
                revenue += o.revenue;
                if trace {
                    lines.push(json!({
                        "t": o.t,
                        "arrived": o.arrived,
                        "proposals": one_based(&o.proposals),
                        "j_star": o.chosen.map_or(0, |j| j + 1),
                        "allocated": o.allocated,
                        "revenue": o.revenue,
                    }));
                }
            }
            policy.violations
        }
        (PolicyKind::Choice, Guide::Fluid(f)) => {
            let mut policy = ChoicePolicy::init(inst, f, gamma)?;
            for t in 1..=inst.t {
                observe(t, &policy.ledger.virtual_status);
                let o = policy.choice_step(&streams.next_period());
                revenue += o.revenue;
                if trace {
                    lines.push(json!({
                        "t": o.t,
                        "arrived": o.arrived,
                        "proposals": one_based(&o.proposals),
                        "assortment": one_based(&o.assortment),
                        "j_star": o.chosen.map_or(0, |j| j + 1),
                        "Q": one_based(&o.update_set),
                        "revenue": o.revenue,
                    }));
                }
            }
            policy.violations
        }
        (PolicyKind::Ddp, Guide::Ddp(table)) => {
            let mut state = SlotState::full(inst.n);
            let mut violations = ViolationCounters::default();
            for t in 1..=inst.t {
                observe(t, std::slice::from_ref(&state));
                let draws = streams.next_period();
                let req = inst.request(t);
                let arrived = draws.arrival < req.p;
                let accept = ddp_policy_act(table, t, state, arrived, req);
                let mut gained = 0.0;
                if accept {
                    match state.allocate(req.interval()) {
                        Ok(s) => {
                            state = s;
                            gained = req.w[0];
                        }
                        Err(_) => violations.occupied_slot += 1,
                    }
                }
                revenue += gained;
                if trace {
                    lines.push(json!({"t": t, "arrived": arrived, "accepted": accept, "revenue": gained}));
                }
            }
            violations
        }
        _ => return Err(Error::Mismatch(format!("policy {kind:?} does not match the prepared guide"))),
    };
    Ok(EpisodeResult {
        revenue,
        violations,
        trace: lines,
    })
}

/// Runs one episode without observation.
pub fn run_episode(
    inst: &Instance,
    guide: &Guide,
    kind: PolicyKind,
    gamma: f64,
    base_seed: u64,
    episode: u64,
    trace: bool,
) -> Result<EpisodeResult, Error> {
    run_episode_with(inst, guide, kind, gamma, base_seed, episode, trace, |_, _| {})
}

/// Counting layout for maximal-sequence events.
struct Cells {
    m: usize,
    horizon: usize,
    k: usize,
    pairs: usize,
}

impl Cells {
    fn new(inst: &Instance, resources: usize) -> Self {
        Self {
            m: resources,
            horizon: inst.t,
            k: inst.n * (inst.n + 1) / 2,
            pairs: resources * resources.saturating_sub(1) / 2,
        }
    }

    fn single(&self, j: usize, t: usize, k: usize) -> usize {
        (j * self.horizon + t - 1) * self.k + k
    }

    fn pair_index(&self, j: usize, k: usize) -> usize {
        // Pairs j < k enumerated row by row.
        j * self.m - j * (j + 1) / 2 + (k - j - 1)
    }

    fn pair(&self, t: usize, pair: usize, kj: usize, kk: usize) -> usize {
        (((t - 1) * self.pairs + pair) * self.k + kj) * self.k + kk
    }
}

/// Running summary of a contiguous block of episodes.
#[derive(Clone)]
struct Summary {
    n: u64,
    mean: f64,
    m2: f64,
    violations: ViolationCounters,
    singles: Vec<u64>,
    joint: Vec<u64>,
}

impl Summary {
    fn empty(singles: usize, joint: usize) -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            violations: ViolationCounters::default(),
            singles: vec![0; singles],
            joint: vec![0; joint],
        }
    }

    fn push(&mut self, revenue: f64) {
        self.n += 1;
        let delta = revenue - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (revenue - self.mean);
    }

    fn merge(&mut self, other: &Summary) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
        self.violations.add(&other.violations);
        for (a, b) in self.singles.iter_mut().zip(&other.singles) {
            *a += b;
        }
        for (a, b) in self.joint.iter_mut().zip(&other.joint) {
            *a += b;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalCell {
    /// 1-based resource.
    pub j: usize,
    pub t: usize,
    pub a: usize,
    pub b: usize,
    pub fluid_x: f64,
    pub count: u64,
    pub empirical: f64,
    /// `(empirical − x)/sqrt(x(1−x)/n)`; 0 when x is 0 or 1.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCell {
    pub t: usize,
    pub j: usize,
    pub k: usize,
    pub interval_j: [usize; 2],
    pub interval_k: [usize; 2],
    pub joint: f64,
    pub marginal_j: f64,
    pub marginal_k: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub policy: PolicyKind,
    pub episodes: u64,
    pub base_seed: u64,
    pub mean_revenue: f64,
    pub std_error: f64,
    /// Fluid objective, or the exact DP value for the DDP policy.
    pub lp_bound: f64,
    pub ratio_target: f64,
    pub ratio_lhs: f64,
    pub verdict: bool,
    pub invariant_violations: ViolationCounters,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub marginal_table: Vec<MarginalCell>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pair_table: Vec<PairCell>,
}

/// Runs `cfg.episodes` episodes against a prepared guide.
pub fn evaluate_with(
    inst: &Instance,
    guide: &Guide,
    bound: f64,
    kind: PolicyKind,
    cfg: &SimConfig,
) -> Result<SimReport, Error> {
    if cfg.episodes < MIN_EPISODES {
        return Err(Error::BadConfig(format!(
            "{} episodes requested, at least {MIN_EPISODES} needed",
            cfg.episodes
        )));
    }
    let resources = if kind == PolicyKind::Ddp { 1 } else { inst.m };
    let cells = Cells::new(inst, resources);
    let singles_len = if cfg.marginals || cfg.pairs { resources * inst.t * cells.k } else { 0 };
    let joint_len = if cfg.pairs { inst.t * cells.pairs * cells.k * cells.k } else { 0 };
    let index = crate::interval::IntervalIndex::new(inst.n);

    let chunks = cfg.episodes.div_ceil(CHUNK);
    let summaries: Vec<Summary> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Summary, Error> {
            let mut s = Summary::empty(singles_len, joint_len);
            let end = ((c + 1) * CHUNK).min(cfg.episodes);
            let mut seqs: Vec<Vec<usize>> = vec![Vec::new(); resources];
            for e in c * CHUNK..end {
                let singles = &mut s.singles;
                let joint = &mut s.joint;
                let result = run_episode_with(inst, guide, kind, cfg.gamma, cfg.base_seed, e, false, |t, status| {
                    if singles_len == 0 {
                        return;
                    }
                    for (j, st) in status.iter().enumerate() {
                        seqs[j].clear();
                        seqs[j].extend(st.maximal_sequences().into_iter().map(|iv| index.index(iv)));
                        for &k in &seqs[j] {
                            singles[cells.single(j, t, k)] += 1;
                        }
                    }
                    if joint_len > 0 {
                        for j in 0..resources {
                            for k in j + 1..resources {
                                let pair = cells.pair_index(j, k);
                                for &kj in &seqs[j] {
                                    for &kk in &seqs[k] {
                                        joint[cells.pair(t, pair, kj, kk)] += 1;
                                    }
                                }
                            }
                        }
                    }
                })?;
                s.push(result.revenue);
                s.violations.add(&result.violations);
            }
            Ok(s)
        })
        .collect::<Result<_, _>>()?;

    let mut total = Summary::empty(singles_len, joint_len);
    for s in &summaries {
        total.merge(s);
    }
    let n = total.n.max(1) as f64;
    let std_error = if total.n > 1 {
        (total.m2 / (total.n - 1) as f64).sqrt() / n.sqrt()
    } else {
        0.0
    };
    let ratio_lhs = total.mean - 3.0 * std_error;
    let clean = total.violations.total() == 0;
    let (ratio_target, verdict) = match kind {
        PolicyKind::Reject => (REJECT_RATIO, clean && ratio_lhs >= REJECT_RATIO * bound),
        PolicyKind::Choice => (CHOICE_RATIO, clean && ratio_lhs >= CHOICE_RATIO * bound),
        // The optimal policy must match the DP value from both sides.
        PolicyKind::Ddp => (1.0, clean && (total.mean - bound).abs() <= 3.0 * std_error + 1e-9),
    };

    let marginal_table = match (cfg.marginals, guide) {
        (true, Guide::Fluid(f)) => marginal_cells(f, &cells, &total.singles, total.n),
        _ => Vec::new(),
    };
    let pair_table = if cfg.pairs {
        pair_cells(inst, &cells, &total.singles, &total.joint, total.n)
    } else {
        Vec::new()
    };

    Ok(SimReport {
        policy: kind,
        episodes: total.n,
        base_seed: cfg.base_seed,
        mean_revenue: total.mean,
        std_error,
        lp_bound: bound,
        ratio_target,
        ratio_lhs,
        verdict,
        invariant_violations: total.violations,
        marginal_table,
        pair_table,
    })
}

/// Solves the guide for `kind` and evaluates it.
pub fn evaluate(inst: &Instance, kind: PolicyKind, cfg: &SimConfig) -> Result<SimReport, Error> {
    let (guide, bound) = Guide::prepare(inst, kind)?;
    evaluate_with(inst, &guide, bound, kind, cfg)
}

fn marginal_cells(f: &FluidSolution, cells: &Cells, singles: &[u64], n: u64) -> Vec<MarginalCell> {
    let nf = n.max(1) as f64;
    let mut out = Vec::with_capacity(singles.len());
    for j in 0..cells.m {
        for t in 1..=cells.horizon {
            for (k, iv) in f.intervals().iter().enumerate() {
                let x = f.x(j, t, iv);
                let count = singles[cells.single(j, t, k)];
                let empirical = count as f64 / nf;
                let z = if x > ZERO_MASS && x < 1.0 - ZERO_MASS {
                    (empirical - x) / (x * (1.0 - x) / nf).sqrt()
                } else {
                    0.0
                };
                out.push(MarginalCell {
                    j: j + 1,
                    t,
                    a: iv.lo(),
                    b: iv.hi(),
                    fluid_x: x,
                    count,
                    empirical,
                    z,
                });
            }
        }
    }
    out
}

fn pair_cells(inst: &Instance, cells: &Cells, singles: &[u64], joint: &[u64], n: u64) -> Vec<PairCell> {
    let nf = n.max(1) as f64;
    let index = crate::interval::IntervalIndex::new(inst.n);
    let mut out = Vec::new();
    for t in 1..=cells.horizon {
        for j in 0..cells.m {
            for k in j + 1..cells.m {
                let pair = cells.pair_index(j, k);
                for kj in 0..cells.k {
                    let pj = singles[cells.single(j, t, kj)] as f64 / nf;
                    for kk in 0..cells.k {
                        let pk = singles[cells.single(k, t, kk)] as f64 / nf;
                        let pjk = joint[cells.pair(t, pair, kj, kk)] as f64 / nf;
                        let se = (pj * (1.0 - pj) * pk * (1.0 - pk) / nf).sqrt();
                        let z = if se > 0.0 { (pjk - pj * pk) / se } else { 0.0 };
                        let (ij, ik): (Interval, Interval) = (index.interval(kj), index.interval(kk));
                        out.push(PairCell {
                            t,
                            j: j + 1,
                            k: k + 1,
                            interval_j: [ij.lo(), ij.hi()],
                            interval_k: [ik.lo(), ik.hi()],
                            joint: pjk,
                            marginal_j: pj,
                            marginal_k: pk,
                            z,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Fluid values at or below this (or within it of 1) are treated as exact
/// zero (one) mass and must be matched exactly.
pub const ZERO_MASS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalGate {
    pub pass: bool,
    pub episodes: u64,
    pub cells_tested: usize,
    pub cells_within: usize,
    pub fraction_within: f64,
    /// Cells with fluid mass 0 (or 1) whose frequency was not exactly 0 (or 1).
    pub exact_mass_breaches: usize,
    pub worst: Vec<MarginalCell>,
}

/// Passes iff at least 99% of cells with fluid x strictly inside (0,1) sit
/// within 4 standard errors, and cells with x = 0 or x = 1 are matched
/// exactly. Needs at least [`MARGINAL_MIN_EPISODES`] episodes.
pub fn marginal_gate(report: &SimReport) -> MarginalGate {
    let n = report.episodes;
    let mut tested: Vec<&MarginalCell> = Vec::new();
    let mut breaches = 0;
    for c in &report.marginal_table {
        if c.fluid_x <= ZERO_MASS {
            breaches += usize::from(c.count != 0);
        } else if c.fluid_x >= 1.0 - ZERO_MASS {
            breaches += usize::from(c.count != n);
        } else {
            tested.push(c);
        }
    }
    let within = tested.iter().filter(|c| c.z.abs() <= 4.0).count();
    let fraction = if tested.is_empty() { 1.0 } else { within as f64 / tested.len() as f64 };
    tested.sort_by(|a, b| b.z.abs().total_cmp(&a.z.abs()));
    MarginalGate {
        pass: n >= MARGINAL_MIN_EPISODES && !report.marginal_table.is_empty() && breaches == 0 && fraction >= 0.99,
        episodes: n,
        cells_tested: tested.len(),
        cells_within: within,
        fraction_within: fraction,
        exact_mass_breaches: breaches,
        worst: tested.into_iter().take(10).cloned().collect(),
    }
}

/// Smallest expected joint count for a pair cell to be tested.
pub const PAIR_MIN_EXPECTED: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceGate {
    pub pass: bool,
    pub cells_tested: usize,
    pub worst: Vec<PairCell>,
}

/// Every pair cell whose marginals are strictly inside (0,1) and whose
/// expected joint count is at least [`PAIR_MIN_EXPECTED`] must have
/// `|joint − product|` within 4 standard errors.
pub fn independence_gate(report: &SimReport) -> IndependenceGate {
    let n = report.episodes as f64;
    let mut tested: Vec<&PairCell> = report
        .pair_table
        .iter()
        .filter(|c| {
            c.marginal_j > 0.0
                && c.marginal_j < 1.0
                && c.marginal_k > 0.0
                && c.marginal_k < 1.0
                && c.marginal_j * c.marginal_k * n >= PAIR_MIN_EXPECTED
        })
        .collect();
    let pass = !tested.is_empty() && tested.iter().all(|c| c.z.abs() <= 4.0);
    tested.sort_by(|a, b| b.z.abs().total_cmp(&a.z.abs()));
    IndependenceGate {
        pass,
        cells_tested: tested.len(),
        worst: tested.into_iter().take(10).cloned().collect(),
    }
}

/// Marginal table as CSV text with a header row.
pub fn marginal_csv(report: &SimReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if report.marginal_table.is_empty() {
        w.write_record(["j", "t", "a", "b", "fluid_x", "count", "empirical", "z"])
            .expect("writing to memory");
    }
    for c in &report.marginal_table {
        w.serialize(c).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is UTF-8")
}
