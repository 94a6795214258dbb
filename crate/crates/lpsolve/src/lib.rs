//! Linear-programming layer: a small model builder, a presolve, and a dense
//! bounded-variable simplex that serves as the reference solver.
//!
//! Problems are always maximizations. Solvers plug in through
//! [`LpSolver`], so callers can swap the reference path for an external
//! engine without touching model construction.
//!
//! The reference solver keeps a dense tableau over the rows that survive
//! presolve. That is comfortable up to a few thousand rows; beyond that
//! memory (rows x columns doubles) becomes the wall.

mod export;
mod model;
mod presolve;
mod simplex;

pub use export::write_lp_format;
pub use model::{Constraint, LinExpr, LpModel, ModelError, Relation, Var, VarDef};

use log::warn;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective recomputed from `values`; NaN unless optimal.
    pub objective: f64,
    /// One value per model variable, in declaration order.
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Relative primal/dual gap read off the final basis.
    pub duality_gap: f64,
    /// Worst absolute bound or row violation of `values`.
    pub max_violation: f64,
}

impl LpSolution {
    pub fn value(&self, var: Var) -> f64 {
        self.values[var.index()]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_values(status: LpStatus, n: usize, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: vec![f64::NAN; n],
            iterations,
            duality_gap: f64::NAN,
            max_violation: f64::NAN,
        }
    }
}

pub trait LpSolver {
    fn solve(&self, model: &LpModel) -> LpSolution;
}

/// Reference solver: presolve followed by the dense two-phase simplex.
#[derive(Clone, Debug)]
pub struct DenseSimplex {
    pub max_iterations: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
        }
    }
}

/// Feasibility tolerance the reference solver guarantees on optimal output.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Relative duality-gap tolerance checked on optimal output.
pub const DUALITY_GAP_TOL: f64 = 1e-6;

impl LpSolver for DenseSimplex {
    fn solve(&self, model: &LpModel) -> LpSolution {
        let n = model.num_vars();
        let reduced = match presolve::presolve(model) {
            presolve::Presolved::Infeasible => return LpSolution::without_values(LpStatus::Infeasible, n, 0),
            presolve::Presolved::Reduced(r) => r,
        };
        let result = simplex::solve_reduced(&reduced, self.max_iterations);
        let status = match result.outcome {
            simplex::Outcome::Optimal => LpStatus::Optimal,
            simplex::Outcome::Infeasible => LpStatus::Infeasible,
            simplex::Outcome::Unbounded => LpStatus::Unbounded,
            simplex::Outcome::IterationLimit => LpStatus::IterationLimit,
        };
        if status != LpStatus::Optimal {
            return LpSolution::without_values(status, n, result.iterations);
        }

        let mut values = reduced.lower.clone();
        for (k, &v) in reduced.cols.iter().enumerate() {
            let def = model.var_def(Var(v));
            // Round-off can push a value a hair outside its bounds.
            values[v] = result.values[k].max(def.lower).min(def.upper);
        }
        let objective = model.objective().eval(&values);
        let max_violation = model.max_violation(&values);
        if max_violation > FEASIBILITY_TOL {
            warn!("simplex solution violates the model by {max_violation:e}");
        }
        if result.duality_gap > DUALITY_GAP_TOL {
            warn!("duality gap {:e} exceeds tolerance", result.duality_gap);
        }
        LpSolution {
            status,
            objective,
            values,
            iterations: result.iterations,
            duality_gap: result.duality_gap,
            max_violation,
        }
    }
}

/// Solves `model` with the reference solver.
pub fn solve(model: &LpModel) -> LpSolution {
    DenseSimplex::default().solve(model)
}
