//! Bound-propagating presolve.
//!
//! Repeats four reductions until nothing changes: substitute fixed
//! variables, turn singleton rows into bounds, drop rows that the bounds
//! already imply, and fix every variable of a forcing row. On the fluid
//! models this removes all structurally-zero allocation variables and the
//! interval states that can never be reached from the initial status.

use crate::model::{LpModel, Relation};

/// Tolerance beyond which a bound or row conflict is declared infeasible.
const INFEAS_TOL: f64 = 1e-7;
/// Slack allowed when deciding that a row is redundant or forcing.
const TIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Problem left after presolve, indexed by surviving columns.
#[derive(Clone, Debug)]
pub(crate) struct Reduced {
    /// Tightened bounds for every original variable.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Original index of each surviving column.
    pub cols: Vec<usize>,
    /// Rows over surviving columns (column ids are positions in `cols`).
    pub rows: Vec<Row>,
    /// Objective coefficients of surviving columns.
    pub obj: Vec<f64>,
}

impl Reduced {
    pub fn col_lower(&self, k: usize) -> f64 {
        self.lower[self.cols[k]]
    }

    pub fn col_upper(&self, k: usize) -> f64 {
        self.upper[self.cols[k]]
    }
}

#[derive(Debug)]
pub(crate) enum Presolved {
    Reduced(Reduced),
    Infeasible,
}

fn is_fixed(lower: f64, upper: f64) -> bool {
    upper == lower
}

fn fix(lower: &mut [f64], upper: &mut [f64], var: usize, value: f64) {
    lower[var] = value;
    upper[var] = value;
}

/// Applies `lo <= x` / `x <= hi` tightenings; false on conflict.
fn tighten(lower: &mut [f64], upper: &mut [f64], var: usize, lo: f64, hi: f64) -> bool {
    let new_lo = lower[var].max(lo);
    let new_hi = upper[var].min(hi);
    if new_lo > new_hi + INFEAS_TOL {
        return false;
    }
    if new_hi - new_lo <= TIGHT_TOL {
        let value = if new_lo <= new_hi {
            new_lo
        } else {
            (0.5 * (new_lo + new_hi)).clamp(lower[var], upper[var])
        };
        fix(lower, upper, var, value);
    } else {
        lower[var] = new_lo;
        upper[var] = new_hi;
    }
    true
}

fn activity(terms: &[(usize, f64)], lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let mut min = 0.0;
    let mut max = 0.0;
    for &(v, a) in terms {
        if a > 0.0 {
            min += a * lower[v];
            max += a * upper[v];
        } else {
            min += a * upper[v];
            max += a * lower[v];
        }
    }
    (min, max)
}

/// Sets every variable of `terms` to the bound attaining the minimum
/// (`at_min`) or maximum activity.
fn force(terms: &[(usize, f64)], lower: &mut [f64], upper: &mut [f64], at_min: bool) {
    for &(v, a) in terms {
        let take_lower = (a > 0.0) == at_min;
        let value = if take_lower { lower[v] } else { upper[v] };
        fix(lower, upper, v, value);
    }
}

pub(crate) fn presolve(model: &LpModel) -> Presolved {
    let n = model.num_vars();
    let mut lower: Vec<f64> = model.vars().iter().map(|d| d.lower).collect();
    let mut upper: Vec<f64> = model.vars().iter().map(|d| d.upper).collect();

    let mut rows: Vec<Option<Row>> = model
        .constraints()
        .iter()
        .map(|c| {
            Some(Row {
                terms: c.expr.terms().iter().map(|&(v, a)| (v.index(), a)).collect(),
                relation: c.relation,
                rhs: c.rhs,
            })
        })
        .collect();

    let mut changed = true;
    while changed {
        changed = false;
        for slot in rows.iter_mut() {
            let Some(row) = slot.as_mut() else { continue };

            let before = row.terms.len();
            let mut shift = 0.0;
            row.terms.retain(|&(v, a)| {
                if is_fixed(lower[v], upper[v]) {
                    shift += a * lower[v];
                    false
                } else {
                    true
                }
            });
            row.rhs -= shift;
            if row.terms.len() != before {
                changed = true;
            }

            match row.terms.len() {
                0 => {
                    let ok = match row.relation {
                        Relation::Le => row.rhs >= -INFEAS_TOL,
                        Relation::Eq => row.rhs.abs() <= INFEAS_TOL,
                    };
                    if !ok {
                        return Presolved::Infeasible;
                    }
                    *slot = None;
                    changed = true;
                }
                1 => {
                    let (v, a) = row.terms[0];
                    let bound = row.rhs / a;
                    let ok = match (row.relation, a > 0.0) {
                        (Relation::Eq, _) => tighten(&mut lower, &mut upper, v, bound, bound),
                        (Relation::Le, true) => tighten(&mut lower, &mut upper, v, f64::NEG_INFINITY, bound),
                        (Relation::Le, false) => tighten(&mut lower, &mut upper, v, bound, f64::INFINITY),
                    };
                    if !ok {
                        return Presolved::Infeasible;
                    }
                    *slot = None;
                    changed = true;
                }
                _ => {
                    let (min_act, max_act) = activity(&row.terms, &lower, &upper);
                    let scale = 1.0 + row.rhs.abs();
                    match row.relation {
                        Relation::Le => {
                            if min_act > row.rhs + INFEAS_TOL * scale {
                                return Presolved::Infeasible;
                            }
                            if max_act <= row.rhs + TIGHT_TOL * scale {
                                *slot = None;
                                changed = true;
                            } else if min_act >= row.rhs - TIGHT_TOL * scale {
                                force(&row.terms, &mut lower, &mut upper, true);
                                *slot = None;
                                changed = true;
                            }
                        }
                        Relation::Eq => {
                            if min_act > row.rhs + INFEAS_TOL * scale || max_act < row.rhs - INFEAS_TOL * scale {
                                return Presolved::Infeasible;
                            }
                            if min_act >= row.rhs - TIGHT_TOL * scale {
                                force(&row.terms, &mut lower, &mut upper, true);
                                *slot = None;
                                changed = true;
                            } else if max_act <= row.rhs + TIGHT_TOL * scale {
                                force(&row.terms, &mut lower, &mut upper, false);
                                *slot = None;
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut position = vec![usize::MAX; n];
    let mut cols = Vec::new();
    for v in 0..n {
        if !is_fixed(lower[v], upper[v]) {
            position[v] = cols.len();
            cols.push(v);
        }
    }
    let mut obj = vec![0.0; cols.len()];
    for &(v, c) in model.objective().terms() {
        let p = position[v.index()];
        if p != usize::MAX {
            obj[p] = c;
        }
    }
    let rows = rows
        .into_iter()
        .flatten()
        .map(|mut r| {
            // Fixed columns were substituted in the last sweep.
            debug_assert!(r.terms.iter().all(|&(v, _)| position[v] != usize::MAX));
            for t in r.terms.iter_mut() {
                t.0 = position[t.0];
            }
            r
        })
        .collect();

    Presolved::Reduced(Reduced {
        lower,
        upper,
        cols,
        rows,
        obj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinExpr;

    #[test]
    fn singleton_rows_become_bounds() {
        let mut m = LpModel::new();
        let x = m.add_nonneg("x").unwrap();
        let y = m.add_nonneg("y").unwrap();
        m.add_constraint(None, LinExpr::new().term(x, 2.0), Relation::Le, 3.0).unwrap();
        m.add_constraint(None, LinExpr::new().term(x, 1.0).term(y, 1.0), Relation::Le, 5.0)
            .unwrap();
        let Presolved::Reduced(r) = presolve(&m) else { panic!() };
        assert_eq!(r.upper[0], 1.5);
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.cols, vec![0, 1]);
    }

    #[test]
    fn forcing_row_cascades() {
        // x1 fixed at 0 forces y <= 0 through y - x1 <= 0, then z = y is fixed.
        let mut m = LpModel::new();
        let x1 = m.add_nonneg("x1").unwrap();
        let y = m.add_nonneg("y").unwrap();
        let z = m.add_nonneg("z").unwrap();
        m.add_constraint(None, LinExpr::new().term(x1, 1.0), Relation::Eq, 0.0).unwrap();
        m.add_constraint(None, LinExpr::new().term(y, 1.0).term(x1, -1.0), Relation::Le, 0.0)
            .unwrap();
        m.add_constraint(None, LinExpr::new().term(z, 1.0).term(y, -1.0), Relation::Eq, 0.0)
            .unwrap();
        let Presolved::Reduced(r) = presolve(&m) else { panic!() };
        assert!(r.cols.is_empty());
        assert!(r.rows.is_empty());
        assert_eq!((r.lower[2], r.upper[2]), (0.0, 0.0));
    }

    #[test]
    fn conflicting_bounds_are_infeasible() {
        let mut m = LpModel::new();
        let x = m.add_nonneg("x").unwrap();
        m.add_constraint(None, LinExpr::new().term(x, 1.0), Relation::Le, -1.0).unwrap();
        assert!(matches!(presolve(&m), Presolved::Infeasible));
    }
}
