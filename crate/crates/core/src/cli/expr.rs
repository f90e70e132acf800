//! Scalar field descriptors written as expressions in the torus coordinates
//! `x1, y1, …, xn, yn` (each in `[0, 1)`), e.g. `1 + 0.1*sin(2*PI*x1)`.

use exmex::prelude::*;
use exmex::FlatEx;

use crate::error::{Error, Result};
use crate::torus::{ScalarField, TorusGrid};

enum Slot {
    Axis(usize),
    Param(usize),
    Field(usize),
}

/// Parsed expression with its variables resolved to grid axes or named parameters.
pub struct FieldExpr {
    text: String,
    expr: FlatEx<f64>,
    slots: Vec<Slot>,
}

impl std::fmt::Debug for FieldExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("FieldExpr").field(&self.text).finish()
    }
}

fn axis_of(name: &str, n: usize) -> Option<usize> {
    let (kind, idx) = name.split_at(1);
    let j: usize = idx.parse().ok()?;
    if j == 0 || j > n {
        return None;
    }
    match kind {
        "x" => Some(2 * (j - 1)),
        "y" => Some(2 * (j - 1) + 1),
        _ => None,
    }
}

impl FieldExpr {
    /// Parses `text` for complex dimension `n`; `params` name extra scalar variables.
    pub fn parse(text: &str, n: usize, params: &[&str]) -> Result<Self> {
        Self::parse_with_fields(text, n, params, &[])
    }

    /// As [`parse`](Self::parse), with further variables bound to field values.
    pub fn parse_with_fields(text: &str, n: usize, params: &[&str], fields: &[&str]) -> Result<Self> {
        let expr =
            exmex::parse::<f64>(text).map_err(|e| Error::Input(format!("cannot parse expression {text:?}: {e}")))?;
        let slots = expr
            .var_names()
            .iter()
            .map(|v| {
                if let Some(a) = axis_of(v, n) {
                    Ok(Slot::Axis(a))
                } else if let Some(p) = params.iter().position(|p| p == v) {
                    Ok(Slot::Param(p))
                } else if let Some(k) = fields.iter().position(|f| f == v) {
                    Ok(Slot::Field(k))
                } else {
                    Err(Error::Input(format!("unknown variable {v:?} in {text:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldExpr { text: text.into(), expr, slots })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Samples the expression on the grid with the given parameter values.
    pub fn sample(&self, grid: TorusGrid, params: &[f64]) -> Result<ScalarField> {
        self.sample_with_fields(grid, params, &[])
    }

    pub fn sample_with_fields(&self, grid: TorusGrid, params: &[f64], fields: &[&ScalarField]) -> Result<ScalarField> {
        if fields.iter().any(|f| *f.grid() != grid) {
            return Err(Error::Input("field variable lives on a different grid".into()));
        }
        let mut x = vec![0.0; grid.axes()];
        let mut vars = vec![0.0; self.slots.len()];
        let mut values = Vec::with_capacity(grid.len());
        for p in 0..grid.len() {
            grid.coords(p, &mut x);
            for (v, slot) in vars.iter_mut().zip(&self.slots) {
                *v = match *slot {
                    Slot::Axis(a) => x[a],
                    Slot::Param(k) => params[k],
                    Slot::Field(k) => fields[k].values()[p],
                };
            }
            let v = self.expr.eval(&vars).map_err(|e| Error::Input(format!("cannot evaluate {:?}: {e}", self.text)))?;
            if !v.is_finite() {
                return Err(Error::Input(format!("{:?} is not finite at grid point {p}", self.text)));
            }
            values.push(v);
        }
        ScalarField::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_coordinates_and_params() {
        let g = TorusGrid::new(2, 4).unwrap();
        let e = FieldExpr::parse("x1 + 10*y2 + amp", 2, &["amp"]).unwrap();
        let f = e.sample(g, &[100.0]).unwrap();
        let mut x = [0.0; 4];
        for p in 0..g.len() {
            g.coords(p, &mut x);
            assert!((f.values()[p] - (x[0] + 10.0 * x[3] + 100.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn field_variables() {
        let g = TorusGrid::new(2, 4).unwrap();
        let base = ScalarField::from_fn(g, |x| 1.0 + x[1]);
        let e = FieldExpr::parse_with_fields("f1*(1 + amp)", 2, &["amp"], &["f1"]).unwrap();
        let f = e.sample_with_fields(g, &[0.5], &[&base]).unwrap();
        for (a, b) in f.values().iter().zip(base.values()) {
            assert!((a - 1.5 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn constants_and_functions() {
        let g = TorusGrid::new(2, 4).unwrap();
        let f = FieldExpr::parse("cos(2*PI*x1)", 2, &[]).unwrap().sample(g, &[]).unwrap();
        assert!((f.values()[0] - 1.0).abs() < 1e-15);
        assert!((FieldExpr::parse("2", 2, &[]).unwrap().sample(g, &[]).unwrap().mean() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(FieldExpr::parse("x3", 2, &[]).is_err());
        assert!(FieldExpr::parse("z1", 2, &[]).is_err());
        assert!(FieldExpr::parse("x1 +", 2, &[]).is_err());
        let g = TorusGrid::new(2, 4).unwrap();
        assert!(FieldExpr::parse("1/x1", 2, &[]).unwrap().sample(g, &[]).is_err());
    }
}
