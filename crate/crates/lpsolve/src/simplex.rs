//! Dense bounded-variable primal simplex (two phases).
//!
//! Every row owns one unit column: a slack for `<=` rows with a
//! non-negative right-hand side, otherwise an artificial. Those columns form
//! the starting basis, and their tableau columns hold `B^-1` throughout,
//! which is what the final value refresh and the dual estimate read.
//!
//! Pricing is Dantzig's largest reduced cost with a Harris ratio test.
//! After a run of degenerate pivots the solver switches to Bland's
//! smallest-index rule and stays there until it makes progress again.
//! Each phase ends by recomputing reduced costs from scratch, since the
//! incrementally updated ones drift over long runs.

use log::debug;

use crate::model::Relation;
use crate::presolve::Reduced;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const DROP_TOL: f64 = 1e-14;
const DEGENERATE_STREAK: usize = 50;
const HARRIS_TOL: f64 = 1e-9;
const RECHECKS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub(crate) struct SimplexResult {
    pub outcome: Outcome,
    /// Values of the reduced columns (unshifted).
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Relative gap between the primal objective and the dual estimate.
    pub duality_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    ncols: usize,
    data: Vec<f64>,
    /// Basic value per row.
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    /// Unit column of each row, i.e. column `k` of `B^-1` lives there.
    unit: Vec<usize>,
    /// Rows after sign normalisation, over all columns, for refreshes.
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    fn build(problem: &Reduced, max_iterations: usize) -> (Self, Vec<usize>) {
        let n = problem.cols.len();
        let m = problem.rows.len();

        // Shift x = lower + x' so every column starts at zero.
        let lower: Vec<f64> = (0..n).map(|k| problem.col_lower(k)).collect();
        let mut upper: Vec<f64> = (0..n).map(|k| problem.col_upper(k) - lower[k]).collect();
        let mut cost = problem.obj.clone();

        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut unit = Vec::with_capacity(m);
        let mut artificials = Vec::new();
        let mut ncols = n;
        for row in &problem.rows {
            let shift: f64 = row.terms.iter().map(|&(k, a)| a * lower[k]).sum();
            let b = row.rhs - shift;
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            let mut terms: Vec<(usize, f64)> = row.terms.iter().map(|&(k, a)| (k, sign * a)).collect();
            if row.relation == Relation::Le {
                terms.push((ncols, sign));
                upper.push(f64::INFINITY);
                cost.push(0.0);
                if sign > 0.0 {
                    unit.push(ncols);
                }
                ncols += 1;
            }
            if row.relation == Relation::Eq || sign < 0.0 {
                terms.push((ncols, 1.0));
                upper.push(f64::INFINITY);
                cost.push(0.0);
                unit.push(ncols);
                artificials.push(ncols);
                ncols += 1;
            }
            rows.push(terms);
            rhs.push(sign * b);
        }

        let mut data = vec![0.0; m * ncols];
        for (i, terms) in rows.iter().enumerate() {
            for &(j, a) in terms {
                data[i * ncols + j] += a;
            }
        }
        let mut status = vec![Status::Lower; ncols];
        for &u in &unit {
            status[u] = Status::Basic;
        }
        let tableau = Tableau {
            m,
            ncols,
            data,
            beta: rhs.clone(),
            basis: unit.clone(),
            status,
            upper,
            cost,
            reduced: vec![0.0; ncols],
            unit,
            rows,
            rhs,
            iterations: 0,
            max_iterations,
        };
        (tableau, artificials)
    }

    fn reset_reduced_costs(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.data[i * self.ncols..(i + 1) * self.ncols];
            for (d, &t) in self.reduced.iter_mut().zip(row) {
                *d -= cb * t;
            }
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            let dir = match self.status[j] {
                Status::Basic => continue,
                Status::Lower if self.reduced[j] > COST_TOL => 1.0,
                Status::Upper if self.reduced[j] < -COST_TOL => -1.0,
                _ => continue,
            };
            if self.upper[j] <= 0.0 {
                continue;
            }
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(b, _)| self.reduced[j].abs() > self.reduced[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    /// Step limit imposed by row `i` on entering column `q`, with basic
    /// bounds relaxed by `slack`. `None` when the row does not block.
    fn row_limit(&self, i: usize, alpha: f64, slack: f64) -> Option<f64> {
        let b = self.basis[i];
        let value = self.beta[i];
        if alpha > 0.0 {
            Some((value + slack).max(0.0) / alpha)
        } else if self.upper[b].is_finite() {
            Some((self.upper[b] - value + slack).max(0.0) / -alpha)
        } else {
            None
        }
    }

    /// Returns `(theta, leaving row)`; `None` row means a bound flip.
    ///
    /// Dantzig mode uses Harris' two passes: the first finds the longest
    /// step allowed with bounds relaxed by `HARRIS_TOL`, the second picks
    /// the largest pivot among rows blocking within that step. Bland mode
    /// takes the exact minimum and breaks ties by smallest basic index.
    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Option<(f64, Option<usize>)> {
        let blocking = (0..self.m).filter_map(|i| {
            let alpha = dir * self.at(i, q);
            (alpha.abs() > PIVOT_TOL).then_some((i, alpha))
        });
        if bland {
            let mut theta = self.upper[q];
            let mut leave: Option<usize> = None;
            for (i, alpha) in blocking {
                let Some(limit) = self.row_limit(i, alpha, 0.0) else { continue };
                let better = limit < theta - 1e-12
                    || (limit <= theta + 1e-12 && leave.is_some_and(|r| self.basis[i] < self.basis[r]));
                if better {
                    theta = limit;
                    leave = Some(i);
                }
            }
            return theta.is_finite().then_some((theta, leave));
        }
        let mut relaxed = f64::INFINITY;
        for (i, alpha) in blocking.clone() {
            if let Some(limit) = self.row_limit(i, alpha, HARRIS_TOL) {
                relaxed = relaxed.min(limit);
            }
        }
        if self.upper[q] <= relaxed {
            return self.upper[q].is_finite().then_some((self.upper[q], None));
        }
        if relaxed.is_infinite() {
            return None;
        }
        let mut leave: Option<(usize, f64, f64)> = None;
        for (i, alpha) in blocking {
            let Some(limit) = self.row_limit(i, alpha, 0.0) else { continue };
            if limit <= relaxed && leave.is_none_or(|(_, a, _)| alpha.abs() > a) {
                leave = Some((i, alpha.abs(), limit));
            }
        }
        let (r, _, limit) = leave.expect("a row attains the relaxed minimum");
        Some((limit, Some(r)))
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let piv = self.data[r * nc + q];
        let mut nz = Vec::new();
        for j in 0..nc {
            let v = self.data[r * nc + j];
            if v != 0.0 {
                let scaled = v / piv;
                self.data[r * nc + j] = if scaled.abs() < DROP_TOL { 0.0 } else { scaled };
                if self.data[r * nc + j] != 0.0 {
                    nz.push(j);
                }
            }
        }
        self.data[r * nc + q] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        let update = |row: &mut [f64]| {
            let f = row[q];
            if f == 0.0 {
                return;
            }
            for &j in &nz {
                let v = row[j] - f * prow[j];
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
        };
        before.chunks_exact_mut(nc).for_each(&update);
        after.chunks_exact_mut(nc).for_each(&update);

        let f = self.reduced[q];
        if f != 0.0 {
            for &j in &nz {
                self.reduced[j] -= f * prow[j];
            }
            self.reduced[q] = 0.0;
        }
    }

    fn step(&mut self, bland: bool) -> (Step, bool) {
        let Some((q, dir)) = self.choose_entering(bland) else {
            return (Step::Optimal, false);
        };
        let Some((theta, leave)) = self.ratio_test(q, dir, bland) else {
            return (Step::Unbounded, false);
        };
        self.iterations += 1;
        for i in 0..self.m {
            let a = self.at(i, q);
            if a != 0.0 {
                self.beta[i] -= dir * a * theta;
            }
        }
        let degenerate = theta <= 1e-12;
        match leave {
            None => {
                self.status[q] = if dir > 0.0 { Status::Upper } else { Status::Lower };
            }
            Some(r) => {
                let out = self.basis[r];
                let alpha = dir * self.at(r, q);
                self.status[out] = if alpha > 0.0 || !self.upper[out].is_finite() {
                    Status::Lower
                } else {
                    Status::Upper
                };
                let start = if self.status[q] == Status::Upper { self.upper[q] } else { 0.0 };
                self.beta[r] = start + dir * theta;
                self.basis[r] = q;
                self.status[q] = Status::Basic;
                self.pivot(r, q);
            }
        }
        (Step::Continue, degenerate)
    }

    fn run(&mut self) -> Outcome {
        let mut streak = 0;
        loop {
            if self.iterations >= self.max_iterations {
                return Outcome::IterationLimit;
            }
            let bland = streak >= DEGENERATE_STREAK;
            match self.step(bland) {
                (Step::Optimal, _) => return Outcome::Optimal,
                (Step::Unbounded, _) => return Outcome::Unbounded,
                (Step::Continue, true) => streak += 1,
                (Step::Continue, false) => streak = 0,
            }
        }
    }

    /// Runs to a verdict, then recomputes reduced costs from scratch and
    /// resumes if round-off hid an improving column.
    fn run_checked(&mut self, cost: &[f64]) -> Outcome {
        self.reset_reduced_costs(cost);
        for _ in 0..RECHECKS {
            let outcome = self.run();
            if outcome != Outcome::Optimal {
                return outcome;
            }
            self.reset_reduced_costs(cost);
            if self.choose_entering(false).is_none() {
                return Outcome::Optimal;
            }
            debug!("reduced costs drifted; resuming after {} iterations", self.iterations);
        }
        self.run()
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Upper => self.upper[j],
            _ => 0.0,
        }
    }

    /// Recomputes basic values as `B^-1 (b - N x_N)` from the unit columns.
    fn refresh(&mut self) {
        let mut r = self.rhs.clone();
        for (k, terms) in self.rows.iter().enumerate() {
            for &(j, a) in terms {
                if self.status[j] == Status::Upper {
                    r[k] -= a * self.upper[j];
                }
            }
        }
        for i in 0..self.m {
            self.beta[i] = (0..self.m).map(|k| self.at(i, self.unit[k]) * r[k]).sum();
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.ncols).map(|j| self.nonbasic_value(j)).collect();
        for i in 0..self.m {
            x[self.basis[i]] = self.beta[i];
        }
        x
    }

    /// Relative gap between `c x` and the dual bound `pi b + sum d_j u_j`.
    fn duality_gap(&self, x: &[f64]) -> f64 {
        let primal: f64 = self.cost.iter().zip(x).map(|(c, v)| c * v).sum();
        let mut dual: f64 = (0..self.m)
            .map(|k| (self.cost[self.unit[k]] - self.reduced[self.unit[k]]) * self.rhs[k])
            .sum();
        for j in 0..self.ncols {
            if self.status[j] == Status::Upper {
                dual += self.reduced[j] * self.upper[j];
            }
        }
        (primal - dual).abs() / primal.abs().max(1.0)
    }
}

pub(crate) fn solve_reduced(problem: &Reduced, max_iterations: usize) -> SimplexResult {
    let n = problem.cols.len();
    let lower: Vec<f64> = (0..n).map(|k| problem.col_lower(k)).collect();
    let (mut t, artificials) = Tableau::build(problem, max_iterations);

    if !artificials.is_empty() {
        let mut phase1 = vec![0.0; t.ncols];
        for &a in &artificials {
            phase1[a] = -1.0;
        }
        let outcome = t.run_checked(&phase1);
        debug!("phase 1 finished after {} iterations: {outcome:?}", t.iterations);
        if outcome == Outcome::IterationLimit {
            return finish(&t, &lower, Outcome::IterationLimit, f64::NAN);
        }
        t.refresh();
        let infeasibility: f64 = (0..t.m)
            .filter(|&i| artificials.contains(&t.basis[i]))
            .map(|i| t.beta[i].max(0.0))
            .sum();
        if infeasibility > FEAS_TOL {
            return finish(&t, &lower, Outcome::Infeasible, f64::NAN);
        }
        for &a in &artificials {
            t.upper[a] = 0.0;
            if t.status[a] == Status::Upper {
                t.status[a] = Status::Lower;
            }
        }
    }

    let cost = t.cost.clone();
    let outcome = t.run_checked(&cost);
    debug!("phase 2 finished after {} iterations: {outcome:?}", t.iterations);
    if outcome != Outcome::Optimal {
        return finish(&t, &lower, outcome, f64::NAN);
    }
    t.refresh();
    let gap = t.duality_gap(&t.column_values());
    finish(&t, &lower, Outcome::Optimal, gap)
}

fn finish(t: &Tableau, lower: &[f64], outcome: Outcome, duality_gap: f64) -> SimplexResult {
    let x = t.column_values();
    SimplexResult {
        outcome,
        values: x.iter().zip(lower).map(|(v, l)| v + l).collect(),
        iterations: t.iterations,
        duality_gap,
    }
}
