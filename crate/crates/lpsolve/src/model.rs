use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable name `{0}` is already declared")]
    DuplicateName(String),
    #[error("bad bounds for `{name}`: lower {lower}, upper {upper}")]
    BadBounds { name: String, lower: f64, upper: f64 },
    #[error("variable handle {0} does not belong to this model")]
    UnknownVariable(usize),
    #[error("non-finite coefficient {value} on `{name}`")]
    NonFiniteCoefficient { name: String, value: f64 },
    #[error("non-finite right-hand side {0}")]
    NonFiniteRhs(f64),
}

/// Handle to a variable declared in an [`LpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Le => f.write_str("<="),
            Relation::Eq => f.write_str("="),
        }
    }
}

/// Sparse linear expression. Repeated variables are summed when the
/// expression is attached to a model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(Var, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, var: Var, coef: f64) -> Self {
        self.terms.push((var, coef));
        self
    }

    pub fn add(&mut self, var: Var, coef: f64) {
        self.terms.push((var, coef));
    }

    pub fn terms(&self) -> &[(Var, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    fn merged(&self) -> Vec<(Var, f64)> {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|&(v, _)| v);
        let mut out: Vec<(Var, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match out.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        out
    }
}

impl FromIterator<(Var, f64)> for LinExpr {
    fn from_iter<I: IntoIterator<Item = (Var, f64)>>(iter: I) -> Self {
        Self {
            terms: iter.into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarDef {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: Option<String>,
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    /// Signed violation: positive when the constraint is broken.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.expr.eval(values);
        match self.relation {
            Relation::Le => lhs - self.rhs,
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A maximization LP over bounded variables.
///
/// Variables default to `[0, +inf)`. Lower bounds must be finite; upper
/// bounds may be `f64::INFINITY`.
#[derive(Clone, Debug, Default)]
pub struct LpModel {
    vars: Vec<VarDef>,
    by_name: HashMap<String, Var>,
    constraints: Vec<Constraint>,
    objective: LinExpr,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<Var, ModelError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        if !lower.is_finite() || upper.is_nan() || upper == f64::NEG_INFINITY || lower > upper {
            return Err(ModelError::BadBounds { name, lower, upper });
        }
        let var = Var(self.vars.len());
        self.by_name.insert(name.clone(), var);
        self.vars.push(VarDef { name, lower, upper });
        Ok(var)
    }

    /// Shorthand for a `[0, +inf)` variable.
    pub fn add_nonneg(&mut self, name: impl Into<String>) -> Result<Var, ModelError> {
        self.add_var(name, 0.0, f64::INFINITY)
    }

    pub fn add_constraint(
        &mut self,
        name: Option<String>,
        expr: LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        self.check_expr(&expr)?;
        if !rhs.is_finite() {
            return Err(ModelError::NonFiniteRhs(rhs));
        }
        let expr = LinExpr { terms: expr.merged() };
        self.constraints.push(Constraint {
            name,
            expr,
            relation,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, expr: LinExpr) -> Result<(), ModelError> {
        self.check_expr(&expr)?;
        self.objective = LinExpr { terms: expr.merged() };
        Ok(())
    }

    fn check_expr(&self, expr: &LinExpr) -> Result<(), ModelError> {
        for &(v, c) in expr.terms() {
            let def = self.vars.get(v.0).ok_or(ModelError::UnknownVariable(v.0))?;
            if !c.is_finite() {
                return Err(ModelError::NonFiniteCoefficient {
                    name: def.name.clone(),
                    value: c,
                });
            }
        }
        Ok(())
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.by_name.get(name).copied()
    }

    pub fn var_def(&self, var: Var) -> &VarDef {
        &self.vars[var.0]
    }

    pub fn vars(&self) -> &[VarDef] {
        &self.vars
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    /// Largest bound or constraint violation of `values`, in absolute terms.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self.vars.iter().zip(values).map(|(d, &x)| {
            let below = d.lower - x;
            let above = if d.upper.is_finite() { x - d.upper } else { f64::NEG_INFINITY };
            below.max(above)
        });
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }
}
