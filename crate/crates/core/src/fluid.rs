//! Fluid relaxations over interval-indexed state probabilities.
//!
//! `x^j_t([a,b])` is the probability that `[a,b]` is a maximal sequence of
//! resource `j` at the start of period `t`; `y^j_t([a,b])` is the joint
//! probability of selling `[l_t,r_t]` out of it. The choice relaxation adds
//! `y^{j0}_t([a,b])` (offered, customer walked away) and `y^0_t`.
//!
//! Every interval of every period gets variables, reachable or not. Variable
//! order is family (x, y, y0, then y_out) and inside a family lexicographic in
//! (j, t, a, b).

use std::collections::BTreeMap;

use consec_lp::{LinExpr, LpModel, LpSolution, LpSolver, Relation, Var};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::instance::{validate, Instance, Scenario};
use crate::interval::{Interval, IntervalIndex};

/// Tolerance for the invariants checked on extraction.
pub const FLUID_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct FluidLayout {
    pub scenario: Scenario,
    pub m: usize,
    pub horizon: usize,
    pub n: usize,
    pub index: IntervalIndex,
}

impl FluidLayout {
    fn new(inst: &Instance) -> Self {
        Self {
            scenario: inst.scenario,
            m: inst.m,
            horizon: inst.t,
            n: inst.n,
            index: IntervalIndex::new(inst.n),
        }
    }

    /// Entries per family, `M·T·N(N+1)/2`.
    pub fn block(&self) -> usize {
        self.m * self.horizon * self.index.len()
    }

    /// Position of `(j, t, [a,b])` inside a family; `j` 0-based, `t` 1-based.
    pub fn pos(&self, j: usize, t: usize, iv: Interval) -> usize {
        (j * self.horizon + (t - 1)) * self.index.len() + self.index.index(iv)
    }

    /// Inverse of [`pos`](Self::pos).
    pub fn entry(&self, pos: usize) -> (usize, usize, Interval) {
        let k = self.index.len();
        let jt = pos / k;
        (jt / self.horizon, jt % self.horizon + 1, self.index.interval(pos % k))
    }

    pub fn num_vars(&self) -> usize {
        match self.scenario {
            Scenario::Reject => 2 * self.block(),
            Scenario::Choice => 3 * self.block() + self.horizon,
        }
    }
}

/// A built relaxation together with the handles of its variables.
pub struct FluidModel {
    pub model: LpModel,
    pub layout: FluidLayout,
    x: Vec<Var>,
    y: Vec<Var>,
    y0: Vec<Var>,
    y_out: Vec<Var>,
}

fn name(family: &str, j: usize, t: usize, iv: Interval) -> String {
    format!("{family}_{}_{t}_{}_{}", j + 1, iv.lo(), iv.hi())
}

fn add_family(model: &mut LpModel, layout: &FluidLayout, family: &str) -> Vec<Var> {
    (0..layout.block())
        .map(|pos| {
            let (j, t, iv) = layout.entry(pos);
            model.add_nonneg(name(family, j, t, iv)).expect("fluid variable names are unique")
        })
        .collect()
}

fn constrain(model: &mut LpModel, row: String, expr: LinExpr, rel: Relation, rhs: f64) {
    model
        .add_constraint(Some(row), expr, rel, rhs)
        .expect("fluid rows reference declared variables with finite data");
}

impl FluidModel {
    fn new(inst: &Instance) -> Self {
        let layout = FluidLayout::new(inst);
        let mut model = LpModel::new();
        let x = add_family(&mut model, &layout, "x");
        let y = add_family(&mut model, &layout, "y");
        let (y0, y_out) = match inst.scenario {
            Scenario::Reject => (Vec::new(), Vec::new()),
            Scenario::Choice => {
                let y0 = add_family(&mut model, &layout, "y0");
                let y_out = (1..=inst.t)
                    .map(|t| model.add_nonneg(format!("yout_{t}")).expect("unique"))
                    .collect();
                (y0, y_out)
            }
        };
        Self {
            model,
            layout,
            x,
            y,
            y0,
            y_out,
        }
    }

    /// Rows shared by both relaxations: Online, Feasibility, Balance,
    /// Boundary and the objective. With `choice` the Online and Feasibility
    /// rows also carry `y0`, and Feasibility requires positive attraction.
    fn common_rows(&mut self, inst: &Instance, choice: bool) {
        let lay = self.layout.clone();
        let mut objective = LinExpr::new();
        for j in 0..lay.m {
            for t in 1..=lay.horizon {
                let req = inst.request(t);
                let dem = req.interval();
                for iv in lay.index.iter() {
                    let pos = lay.pos(j, t, iv);
                    let tag = format!("{}_{t}_{}_{}", j + 1, iv.lo(), iv.hi());
                    objective.add(self.y[pos], req.w[j]);

                    let mut sold = LinExpr::new().term(self.y[pos], 1.0);
                    if choice {
                        sold.add(self.y0[pos], 1.0);
                    }
                    let online = sold.clone().term(self.x[pos], -req.p);
                    constrain(&mut self.model, format!("online_{tag}"), online, Relation::Le, 0.0);

                    let fits = iv.contains(dem) && (!choice || req.attraction(j) > 0.0);
                    let cap = if fits { 1.0 } else { 0.0 };
                    constrain(&mut self.model, format!("feas_{tag}"), sold, Relation::Le, cap);

                    if t == 1 {
                        let start = if iv == Interval::new(1, lay.n) { 1.0 } else { 0.0 };
                        let expr = LinExpr::new().term(self.x[pos], 1.0);
                        constrain(&mut self.model, format!("boundary_{tag}"), expr, Relation::Eq, start);
                    } else {
                        let prev = inst.request(t - 1);
                        let (l, r) = (prev.l, prev.r);
                        let before = lay.pos(j, t - 1, iv);
                        let mut bal = LinExpr::new()
                            .term(self.x[pos], 1.0)
                            .term(self.x[before], -1.0)
                            .term(self.y[before], 1.0);
                        // Left fragment [a,b] of a sale out of [a,b'], b' ≥ r.
                        if iv.hi() + 1 == l {
                            for b2 in r..=lay.n {
                                bal.add(self.y[lay.pos(j, t - 1, Interval::new(iv.lo(), b2))], -1.0);
                            }
                        }
                        // Right fragment [a,b] of a sale out of [a',b], a' ≤ l.
                        if iv.lo() == r + 1 {
                            for a2 in 1..=l {
                                bal.add(self.y[lay.pos(j, t - 1, Interval::new(a2, iv.hi()))], -1.0);
                            }
                        }
                        constrain(&mut self.model, format!("balance_{tag}"), bal, Relation::Eq, 0.0);
                    }
                }
            }
        }
        self.model.set_objective(objective).expect("objective uses declared variables");
    }

    pub fn num_vars(&self) -> usize {
        self.model.num_vars()
    }
}

fn checked(inst: &Instance, scenario: Scenario) -> Result<(), Error> {
    let v = validate(inst);
    if !v.is_empty() {
        return Err(Error::Invalid(v));
    }
    inst.require(scenario)
}

/// Fluid relaxation of a reject-or-accept instance.
pub fn build_lp(inst: &Instance) -> Result<FluidModel, Error> {
    checked(inst, Scenario::Reject)?;
    let mut fm = FluidModel::new(inst);
    fm.common_rows(inst, false);
    let lay = fm.layout.clone();
    for t in 1..=lay.horizon {
        let cap: LinExpr = (0..lay.m)
            .flat_map(|j| lay.index.iter().map(move |iv| (j, iv)))
            .map(|(j, iv)| (fm.y[lay.pos(j, t, iv)], 1.0))
            .collect();
        constrain(&mut fm.model, format!("capacity_{t}"), cap, Relation::Le, inst.request(t).p);
    }
    Ok(fm)
}

/// Sales-based relaxation of a choice instance.
pub fn build_sblp(inst: &Instance) -> Result<FluidModel, Error> {
    checked(inst, Scenario::Choice)?;
    let mut fm = FluidModel::new(inst);
    fm.common_rows(inst, true);
    let lay = fm.layout.clone();
    for t in 1..=lay.horizon {
        let req = inst.request(t);
        let mut cap = LinExpr::new().term(fm.y_out[t - 1], 1.0);
        for j in 0..lay.m {
            let mut opt_out = LinExpr::new().term(fm.y_out[t - 1], -1.0);
            for iv in lay.index.iter() {
                let pos = lay.pos(j, t, iv);
                cap.add(fm.y[pos], 1.0);
                opt_out.add(fm.y0[pos], 1.0);
                let scale = LinExpr::new()
                    .term(fm.y[pos], req.outside())
                    .term(fm.y0[pos], -req.attraction(j));
                let tag = format!("{}_{t}_{}_{}", j + 1, iv.lo(), iv.hi());
                constrain(&mut fm.model, format!("scale_{tag}"), scale, Relation::Eq, 0.0);
            }
            constrain(&mut fm.model, format!("optout_{}_{t}", j + 1), opt_out, Relation::Le, 0.0);
        }
        constrain(&mut fm.model, format!("capacity_{t}"), cap, Relation::Eq, req.p);
    }
    Ok(fm)
}

/// Builds the relaxation matching the instance's scenario.
pub fn build(inst: &Instance) -> Result<FluidModel, Error> {
    match inst.scenario {
        Scenario::Reject => build_lp(inst),
        Scenario::Choice => build_sblp(inst),
    }
}

/// Solved relaxation, values clamped to `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidSolution {
    pub scenario: Scenario,
    pub m: usize,
    pub horizon: usize,
    pub n: usize,
    pub objective: f64,
    /// Largest amount any value was moved by clamping.
    pub clamp_magnitude: f64,
    index: IntervalIndex,
    x: Vec<f64>,
    y: Vec<f64>,
    y0: Vec<f64>,
    y_out: Vec<f64>,
}

struct Worst {
    what: &'static str,
    magnitude: f64,
}

impl Worst {
    fn see(&mut self, what: &'static str, magnitude: f64) {
        if magnitude > self.magnitude {
            self.what = what;
            self.magnitude = magnitude;
        }
    }
}

/// Maps an optimal solution back onto the interval layout and verifies it.
pub fn extract(inst: &Instance, fm: &FluidModel, sol: &LpSolution) -> Result<FluidSolution, Error> {
    if !sol.is_optimal() {
        return Err(Error::NotOptimal(sol.status));
    }
    let lay = &fm.layout;
    if (lay.m, lay.horizon, lay.n, lay.scenario) != (inst.m, inst.t, inst.n, inst.scenario) {
        return Err(Error::Mismatch("model was built for a different instance".into()));
    }
    let mut clamp: f64 = 0.0;
    let mut read = |vars: &[Var]| -> Vec<f64> {
        vars.iter()
            .map(|&v| {
                let raw = sol.value(v);
                let c = raw.clamp(0.0, 1.0);
                clamp = clamp.max((raw - c).abs());
                c
            })
            .collect()
    };
    let x = read(&fm.x);
    let y = read(&fm.y);
    let y0 = read(&fm.y0);
    let y_out = read(&fm.y_out);
    let objective = (0..lay.block())
        .map(|pos| {
            let (j, t, _) = lay.entry(pos);
            inst.request(t).w[j] * y[pos]
        })
        .sum();
    let out = FluidSolution {
        scenario: lay.scenario,
        m: lay.m,
        horizon: lay.horizon,
        n: lay.n,
        objective,
        clamp_magnitude: clamp,
        index: lay.index.clone(),
        x,
        y,
        y0,
        y_out,
    };
    let mut worst = Worst {
        what: "clamping",
        magnitude: clamp,
    };
    out.check(inst, &mut worst);
    if worst.magnitude > FLUID_TOL {
        return Err(Error::InvariantBreach {
            what: worst.what.to_string(),
            magnitude: worst.magnitude,
        });
    }
    Ok(out)
}

/// Builds, solves and extracts the relaxation matching the scenario.
pub fn solve_fluid(inst: &Instance, solver: &dyn LpSolver) -> Result<FluidSolution, Error> {
    let fm = build(inst)?;
    let sol = solver.solve(&fm.model);
    extract(inst, &fm, &sol)
}

impl FluidSolution {
    fn check(&self, inst: &Instance, worst: &mut Worst) {
        let choice = self.scenario == Scenario::Choice;
        let full = Interval::new(1, self.n);
        for t in 1..=self.horizon {
            let req = inst.request(t);
            let mut sold = 0.0;
            for j in 0..self.m {
                for iv in self.index.iter() {
                    let (x, y, y0) = (self.x(j, t, iv), self.y(j, t, iv), self.y0(j, t, iv));
                    sold += y;
                    worst.see("Online", y + y0 - x * req.p);
                    if choice {
                        worst.see("Scale", (req.outside() * y - req.attraction(j) * y0).abs());
                    }
                    if t == 1 {
                        let target = if iv == full { 1.0 } else { 0.0 };
                        worst.see("Boundary", (x - target).abs());
                    }
                }
            }
            if choice {
                worst.see("Capacity", (self.y_out(t) + sold - req.p).abs());
            } else {
                worst.see("Capacity", sold - req.p);
            }
        }
    }

    fn pos(&self, j: usize, t: usize, iv: Interval) -> usize {
        (j * self.horizon + (t - 1)) * self.index.len() + self.index.index(iv)
    }

    pub fn x(&self, j: usize, t: usize, iv: Interval) -> f64 {
        self.x[self.pos(j, t, iv)]
    }

    pub fn y(&self, j: usize, t: usize, iv: Interval) -> f64 {
        self.y[self.pos(j, t, iv)]
    }

    /// Zero for the reject relaxation.
    pub fn y0(&self, j: usize, t: usize, iv: Interval) -> f64 {
        if self.y0.is_empty() {
            0.0
        } else {
            self.y0[self.pos(j, t, iv)]
        }
    }

    /// Zero for the reject relaxation.
    pub fn y_out(&self, t: usize) -> f64 {
        self.y_out.get(t - 1).copied().unwrap_or(0.0)
    }

    pub fn intervals(&self) -> &IntervalIndex {
        &self.index
    }

    /// Whether the solution was computed for an instance of this shape.
    pub fn matches(&self, inst: &Instance) -> bool {
        (self.scenario, self.m, self.horizon, self.n) == (inst.scenario, inst.m, inst.t, inst.n)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fluid solutions always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn key(j: usize, t: usize, iv: Interval) -> String {
    format!("{}:{t}:{}:{}", j + 1, iv.lo(), iv.hi())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluidRepr {
    scenario: Scenario,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    horizon: usize,
    objective: f64,
    clamp_magnitude: f64,
    x: BTreeMap<String, f64>,
    y: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y0: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y_out: Option<BTreeMap<String, f64>>,
}

impl Serialize for FluidSolution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let family = |vals: &[f64]| -> BTreeMap<String, f64> {
            vals.iter()
                .enumerate()
                .map(|(pos, &v)| {
                    let k = self.index.len();
                    let jt = pos / k;
                    (key(jt / self.horizon, jt % self.horizon + 1, self.index.interval(pos % k)), v)
                })
                .collect()
        };
        let choice = self.scenario == Scenario::Choice;
        FluidRepr {
            scenario: self.scenario,
            m: self.m,
            n: self.n,
            horizon: self.horizon,
            objective: self.objective,
            clamp_magnitude: self.clamp_magnitude,
            x: family(&self.x),
            y: family(&self.y),
            y0: choice.then(|| family(&self.y0)),
            y_out: choice.then(|| {
                self.y_out
                    .iter()
                    .enumerate()
                    .map(|(t, &v)| ((t + 1).to_string(), v))
                    .collect()
            }),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FluidSolution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = FluidRepr::deserialize(deserializer)?;
        if repr.n == 0 || repr.n > crate::slots::MAX_SLOTS {
            return Err(D::Error::custom(format!("N = {} unsupported", repr.n)));
        }
        let index = IntervalIndex::new(repr.n);
        let size = repr.m * repr.horizon * index.len();
        let family = |map: &BTreeMap<String, f64>| -> Result<Vec<f64>, D::Error> {
            let mut out = vec![0.0; size];
            for j in 0..repr.m {
                for t in 1..=repr.horizon {
                    for iv in index.iter() {
                        let k = key(j, t, iv);
                        let v = *map.get(&k).ok_or_else(|| D::Error::custom(format!("missing entry {k}")))?;
                        out[(j * repr.horizon + t - 1) * index.len() + index.index(iv)] = v;
                    }
                }
            }
            if map.len() != size {
                return Err(D::Error::custom("unexpected entries in fluid family"));
            }
            Ok(out)
        };
        let x = family(&repr.x)?;
        let y = family(&repr.y)?;
        let (y0, y_out) = match repr.scenario {
            Scenario::Reject => (Vec::new(), Vec::new()),
            Scenario::Choice => {
                let y0 = family(repr.y0.as_ref().ok_or_else(|| D::Error::custom("missing y0"))?)?;
                let outs = repr.y_out.as_ref().ok_or_else(|| D::Error::custom("missing y_out"))?;
                let y_out = (1..=repr.horizon)
                    .map(|t| {
                        outs.get(&t.to_string())
                            .copied()
                            .ok_or_else(|| D::Error::custom(format!("missing y_out {t}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                (y0, y_out)
            }
        };
        Ok(FluidSolution {
            scenario: repr.scenario,
            m: repr.m,
            horizon: repr.horizon,
            n: repr.n,
            objective: repr.objective,
            clamp_magnitude: repr.clamp_magnitude,
            index,
            x,
            y,
            y0,
            y_out,
        })
    }
}
