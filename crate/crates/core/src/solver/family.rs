//! The approximation family `((1+t)χ + χ̃ + i∂∂̄φ)ⁿ = c(…)ᵐ∧ω^{n−m} + b_t f ωⁿ`
//! and the shipped test instances.

use std::f64::consts::PI;
use std::sync::Arc;

use super::spec::{EquationSpec, UnknownMode};
use crate::error::{Error, Result};
use crate::hermitian::HMat;
use crate::symmetric::{binomial, elementary_sym};
use crate::torus::instances::{
    calibrate_instance, canonical_boundary_shape, distance_to_set, make_degenerate_big, potential_family,
    CalibrationMode,
};
use crate::torus::quadrature::{compute_b, compute_c, normalize_density};
use crate::torus::{relative_eigenvalues_of, HermitianFormField, ScalarField, Spectral, TorusGrid};

/// Data `(χ, χ̃, ω, c, f, m)` of one approximation family.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub m: usize,
    pub chi: HermitianFormField,
    pub chi_tilde: HermitianFormField,
    pub omega: HermitianFormField,
    pub c: f64,
    /// Normalized density, `∫f ωⁿ = ∫ωⁿ`.
    pub f: ScalarField,
    /// Degenerate set of `χ̃`, when it has one.
    pub degenerate: Option<Arc<Vec<bool>>>,
    /// Points farther than the watch radius from the degenerate set.
    pub watch_mask: Option<Arc<Vec<bool>>>,
    pub calibration: Option<CalibrationMode>,
}

/// Distance from the degenerate set beyond which `sup w` is watched.
pub const WATCH_RADIUS: f64 = 0.2;

impl Instance {
    pub fn grid(&self) -> &TorusGrid {
        self.chi.grid()
    }

    pub fn n(&self) -> usize {
        self.grid().n()
    }

    /// `(1+t)χ + χ̃`.
    pub fn background(&self, t: f64) -> Result<HermitianFormField> {
        HermitianFormField::linear_combination(&[(1.0 + t, &self.chi), (1.0, &self.chi_tilde)])
    }

    /// `b_t` by quadrature.
    pub fn quadrature_b(&self, sp: &Spectral, t: f64) -> Result<f64> {
        compute_b(sp, &self.chi, &self.chi_tilde, &self.omega, t, self.c, self.m)
    }

    /// Same instance with a different (raw, positive) density.
    pub fn with_density(&self, sp: &Spectral, f_raw: &ScalarField) -> Result<Instance> {
        Ok(Instance { f: normalize_density(sp, f_raw, &self.omega)?, ..self.clone() })
    }

    /// The equation at parameter `t`.
    pub fn spec_at(&self, sp: &Spectral, t: f64) -> Result<EquationSpec> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("t must be >= 0, got {t}")));
        }
        Ok(EquationSpec {
            n: self.n(),
            m: self.m,
            background: self.background(t)?,
            omega: self.omega.clone(),
            coefficient: ScalarField::constant(*self.grid(), self.c),
            source: self.f.clone(),
            mode: UnknownMode::Additive,
            t,
            expected_b: Some(self.quadrature_b(sp, t)?),
            watch_mask: self.watch_mask.clone(),
        })
    }
}

fn identity_form(grid: TorusGrid, s: f64) -> Result<HermitianFormField> {
    HermitianFormField::constant(grid, HMat::scaled_identity(grid.n(), s))
}

/// `χ = ω = I`, `χ̃ = εω`, `f = 1`: the solution is `φ ≡ 0`, `b_t = s² − s`
/// with `s = 1 + t + ε` for `n = 2`, `m = 1`.
pub fn uniform_instance(grid: TorusGrid, m: usize, eps: f64) -> Result<Instance> {
    let omega = identity_form(grid, 1.0)?;
    Ok(Instance {
        name: "uniform".into(),
        m,
        chi: omega.clone(),
        chi_tilde: identity_form(grid, eps)?,
        c: 1.0,
        f: ScalarField::constant(grid, 1.0),
        omega,
        degenerate: None,
        watch_mask: None,
        calibration: None,
    })
}

/// `0.1·sin(2πx₁)·cos(2πy₂)`.
pub fn default_manufactured_potential(grid: TorusGrid) -> ScalarField {
    ScalarField::from_fn(grid, |x| 0.1 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[3]).cos())
}

/// Instance whose solution at `t` is `φ*` exactly: `χ = ω = I`, `χ̃ = 0.5ω`,
/// `f ∝ S_n(X*) − (c/C) S_m(X*)` with `X* = (1+t)χ + χ̃ + i∂∂̄φ*`.
pub fn manufactured_instance(sp: &Spectral, m: usize, phi_star: &ScalarField, t: f64) -> Result<Instance> {
    let grid = *sp.grid();
    let n = grid.n();
    let omega = identity_form(grid, 1.0)?;
    let chi = omega.clone();
    let chi_tilde = identity_form(grid, 0.5)?;
    let c = compute_c(sp, &chi, &omega, m)?;
    let x_star = HermitianFormField::linear_combination(&[(1.0 + t, &chi), (1.0, &chi_tilde)])?;
    let x_star = HermitianFormField::new(grid, *x_star.constant_part(), Some(phi_star.clone()))?;
    let lam = relative_eigenvalues_of(sp, &x_star, &omega)?;
    let scaled = c / binomial(n, m as isize);
    let raw: Vec<f64> =
        lam.chunks(n).map(|l| elementary_sym(n as isize, l) - scaled * elementary_sym(m as isize, l)).collect();
    if raw.iter().any(|&v| !(v > 0.0)) || lam.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Construction("manufactured potential too large: X* or f is not positive".into()));
    }
    let f = normalize_density(sp, &ScalarField::new(grid, raw)?, &omega)?;
    Ok(Instance {
        name: "manufactured".into(),
        m,
        chi,
        chi_tilde,
        omega,
        c,
        f,
        degenerate: None,
        watch_mask: None,
        calibration: None,
    })
}

/// Boundary-tuned `χ = I + a·i∂∂̄(cos 2πx₁ + cos 2πy₁)` with the degenerate
/// `χ̃ = εI + a′·i∂∂̄cos(2πx₁)` (zero eigenvalue on `{x₁ = 0}`), calibrated.
pub fn boundary_degenerate_instance(sp: &Spectral, m: usize, eps: f64) -> Result<Instance> {
    let grid = *sp.grid();
    let n = grid.n();
    let omega = identity_form(grid, 1.0)?;
    let family = potential_family(sp, HMat::identity(n), canonical_boundary_shape(grid))?;
    let shape = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).cos());
    let degenerate = make_degenerate_big(sp, &HMat::scaled_identity(n, eps), &shape)?;
    let bracket = (0.0, 1.0 / (3.0 * PI * PI));
    let cal = calibrate_instance(sp, &family, bracket, &degenerate.form, &omega, m)?;
    let dist = distance_to_set(&grid, &degenerate.degenerate);
    let watch: Vec<bool> = dist.iter().map(|&d| d > WATCH_RADIUS).collect();
    Ok(Instance {
        name: "boundary-degenerate".into(),
        m,
        chi: cal.chi,
        chi_tilde: cal.chi_tilde,
        omega,
        c: cal.c,
        f: ScalarField::constant(grid, 1.0),
        degenerate: Some(Arc::new(degenerate.degenerate)),
        watch_mask: Some(Arc::new(watch)),
        calibration: Some(cal.mode),
    })
}
