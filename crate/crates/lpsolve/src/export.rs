//! CPLEX LP text export.
//!
//! Layout: a `Maximize` section with a single `obj:` row, `Subject To` with
//! one row per constraint (named `c<index>` unless the model names it),
//! a `Bounds` section listing every variable, then `End`. Coefficients use
//! Rust's shortest round-trip float formatting, so reading the file back
//! reproduces the model bit for bit.

use std::io::{self, Write};

use crate::model::{LinExpr, LpModel, Relation};

fn write_expr<W: Write>(out: &mut W, model: &LpModel, expr: &LinExpr) -> io::Result<()> {
    if expr.is_empty() {
        return match model.vars().first() {
            Some(v) => write!(out, " 0 {}", v.name),
            None => write!(out, " 0"),
        };
    }
    for (i, &(var, coef)) in expr.terms().iter().enumerate() {
        let name = &model.var_def(var).name;
        let sign = if coef < 0.0 { '-' } else { '+' };
        if i == 0 && coef >= 0.0 {
            write!(out, " {} {}", coef, name)?;
        } else {
            write!(out, " {} {} {}", sign, coef.abs(), name)?;
        }
    }
    Ok(())
}

pub fn write_lp_format<W: Write>(model: &LpModel, out: &mut W) -> io::Result<()> {
    writeln!(out, "Maximize")?;
    write!(out, " obj:")?;
    write_expr(out, model, model.objective())?;
    writeln!(out)?;
    writeln!(out, "Subject To")?;
    for (i, c) in model.constraints().iter().enumerate() {
        match &c.name {
            Some(name) => write!(out, " {name}:")?,
            None => write!(out, " c{i}:")?,
        }
        write_expr(out, model, &c.expr)?;
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
        };
        writeln!(out, " {rel} {}", c.rhs)?;
    }
    writeln!(out, "Bounds")?;
    for v in model.vars() {
        if v.upper.is_finite() {
            writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper)?;
        } else {
            writeln!(out, " {} >= {}", v.name, v.lower)?;
        }
    }
    writeln!(out, "End")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_model_text() {
        let mut m = LpModel::new();
        let x = m.add_nonneg("x").unwrap();
        let y = m.add_var("y", 0.0, 2.5).unwrap();
        m.set_objective(LinExpr::new().term(x, 3.0).term(y, 1.0)).unwrap();
        m.add_constraint(None, LinExpr::new().term(x, 1.0).term(y, -0.5), Relation::Le, 4.0)
            .unwrap();
        m.add_constraint(Some("bal".into()), LinExpr::new().term(y, 1.0), Relation::Eq, 1.0)
            .unwrap();
        let mut buf = Vec::new();
        write_lp_format(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "Maximize\n obj: 3 x + 1 y\nSubject To\n c0: 1 x - 0.5 y <= 4\n bal: 1 y = 1\nBounds\n x >= 0\n 0 <= y <= 2.5\nEnd\n"
        );
    }
}
