use std::sync::Arc;

use crate::error::{Error, Result};
use crate::torus::quadrature::{integrate_scalar, volume_density};
use crate::torus::{HermitianFormField, ScalarField, Spectral};

/// How the scalar unknown `b` enters the equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownMode {
    /// `S_n(X) = (h/C) S_m(X) + b·r`.
    Additive,
    /// `S_n(X) = (e^b h/C) S_m(X) + r`.
    Multiplicative,
}

/// One member of the equation family: background form, metric, coefficient
/// field `h`, source field `r` and the role of `b`.
#[derive(Debug, Clone)]
pub struct EquationSpec {
    pub n: usize,
    pub m: usize,
    pub background: HermitianFormField,
    pub omega: HermitianFormField,
    pub coefficient: ScalarField,
    pub source: ScalarField,
    pub mode: UnknownMode,
    /// Continuation parameter, carried for bookkeeping.
    pub t: f64,
    /// Quadrature value of `b` the discrete solution should reproduce.
    pub expected_b: Option<f64>,
    /// Points where `sup w` is tracked separately (e.g. away from a degenerate set).
    pub watch_mask: Option<Arc<Vec<bool>>>,
}

impl EquationSpec {
    /// Checks shapes, signs and (additive mode) the normalization `∫r ωⁿ = ∫ωⁿ`.
    pub fn validate(&self, sp: &Spectral) -> Result<()> {
        let grid = *self.background.grid();
        if self.n != grid.n() || self.m >= self.n {
            return Err(Error::Input(format!("need 0 <= m < n = complex dimension, got n={}, m={}", self.n, self.m)));
        }
        for (name, g) in
            [("metric", self.omega.grid()), ("coefficient", self.coefficient.grid()), ("source", self.source.grid())]
        {
            if *g != grid {
                return Err(Error::Input(format!("{name} lives on a different grid")));
            }
        }
        if *sp.grid() != grid {
            return Err(Error::Input("spectral context built for a different grid".into()));
        }
        if self.coefficient.min() < 0.0 || self.source.min() < 0.0 {
            return Err(Error::Input("coefficient and source fields must be >= 0".into()));
        }
        if let Some(mask) = &self.watch_mask {
            if mask.len() != grid.len() {
                return Err(Error::Input("watch mask has the wrong length".into()));
            }
        }
        if self.mode == UnknownMode::Additive {
            let rho = volume_density(&self.omega.sample(sp))?;
            let vol = integrate_scalar(&ScalarField::constant(grid, 1.0), &rho);
            let mass = integrate_scalar(&self.source, &rho);
            if (mass - vol).abs() > 1e-10 * vol {
                return Err(Error::Input(format!("source is not normalized: ∫f ωⁿ = {mass}, ∫ωⁿ = {vol}")));
            }
        }
        Ok(())
    }
}

/// Newton / Krylov controls.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Stop when the sup-norm of the inverse-form residual is below this.
    pub tol: f64,
    pub max_newton: usize,
    pub gmres_restart: usize,
    pub gmres_max_iters: usize,
    /// Smallest accepted damping factor.
    pub damping_floor: f64,
    /// Eigenvalues must stay above this for a step to be admissible.
    pub admissibility_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_newton: 60,
            gmres_restart: 40,
            gmres_max_iters: 600,
            damping_floor: 2f64.powi(-30),
            admissibility_tol: 0.0,
        }
    }
}

impl SolverConfig {
    /// Looser tolerance used for degenerate instances.
    pub fn degenerate() -> Self {
        SolverConfig { tol: 1e-8, ..Self::default() }
    }
}
