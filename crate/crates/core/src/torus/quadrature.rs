//! Trapezoidal quadrature of mixed wedge products.
//!
//! `∫ αᵏ ∧ ω^{n−k}` is represented as `∫ S_k(λ_ω(α))/C(n,k) · ρ_ω dV` with the
//! volume density `ρ_ω = det(ω_{ij̄})`. Any constant in front of `ρ_ω` cancels in
//! every ratio; the `_scaled` entry points expose it so that this can be tested.

use rayon::prelude::*;

use super::forms::{HermitianFormField, MatrixField};
use super::grid::ScalarField;
use super::ordered_sum;
use super::spectral::Spectral;
use crate::error::{Error, Result};
use crate::hermitian::HMat;
use crate::symmetric::{binomial, elementary_sym};

fn describe_point(omega: &MatrixField, p: usize) -> String {
    let g = omega.grid();
    let mut x = vec![0.0; g.axes()];
    g.coords(p, &mut x);
    format!("grid point {p} at {x:?}")
}

/// `det(ω_{ij̄})` at every point; fails where `ω` is not positive definite.
pub fn volume_density(omega: &MatrixField) -> Result<Vec<f64>> {
    let len = omega.grid().len();
    let dens: Vec<Option<f64>> = (0..len)
        .into_par_iter()
        .map(|p| omega.point(p).cholesky().ok().map(|l| (0..l.n()).map(|i| l.get(i, i).re.powi(2)).product()))
        .collect();
    dens.into_iter()
        .enumerate()
        .map(|(p, d)| {
            d.ok_or_else(|| Error::Domain(format!("ω is not positive definite at {}", describe_point(omega, p))))
        })
        .collect()
}

/// Per-point integrand `S_k(λ_ω(α))/C(n,k) · det ω`.
pub fn mixed_density(alpha: &MatrixField, k: usize, omega: &MatrixField) -> Result<Vec<f64>> {
    let n = alpha.grid().n();
    let norm = binomial(n, k as isize);
    let len = alpha.grid().len();
    if let Some(w) = omega.uniform_value() {
        if let Ok(l) = w.cholesky() {
            let det: f64 = (0..n).map(|i| l.get(i, i).re.powi(2)).product();
            let linv = l.lower_inverse();
            return Ok((0..len)
                .into_par_iter()
                .map(|p| {
                    let mut lam = [0.0; 8];
                    linv.relative_eigvals_packed(alpha.packed(p), &mut lam[..n]);
                    elementary_sym(k as isize, &lam[..n]) / norm * det
                })
                .collect());
        }
    }
    let vals: Vec<Option<f64>> = (0..len)
        .into_par_iter()
        .map(|p| {
            let l = omega.point(p).cholesky().ok()?;
            let det: f64 = (0..n).map(|i| l.get(i, i).re.powi(2)).product();
            let lam = alpha.point(p).congruence(&l.lower_inverse()).eigvalsh();
            Some(elementary_sym(k as isize, &lam) / norm * det)
        })
        .collect();
    vals.into_iter()
        .enumerate()
        .map(|(p, v)| {
            v.ok_or_else(|| Error::Domain(format!("ω is not positive definite at {}", describe_point(omega, p))))
        })
        .collect()
}

fn constant_mixed(alpha: &HMat, k: usize, omega: &HMat) -> Result<f64> {
    let n = alpha.n();
    let l = omega.cholesky().map_err(|_| Error::Domain("ω is not positive definite (constant form)".into()))?;
    let det: f64 = (0..n).map(|i| l.get(i, i).re.powi(2)).product();
    let lam = alpha.congruence(&l.lower_inverse()).eigvalsh();
    Ok(elementary_sym(k as isize, &lam) / binomial(n, k as isize) * det)
}

/// `∫ αᵏ ∧ ω^{n−k}` (normalized so that `∫ ωⁿ` is the ω-volume).
pub fn integrate_mixed(sp: &Spectral, alpha: &HermitianFormField, k: usize, omega: &HermitianFormField) -> Result<f64> {
    integrate_mixed_scaled(sp, alpha, k, omega, 1.0)
}

/// [`integrate_mixed`] with the volume convention `ωⁿ ↔ scale · det(ω) dV`.
pub fn integrate_mixed_scaled(
    sp: &Spectral,
    alpha: &HermitianFormField,
    k: usize,
    omega: &HermitianFormField,
    scale: f64,
) -> Result<f64> {
    if k > alpha.grid().n() {
        return Ok(0.0);
    }
    if alpha.is_constant() && omega.is_constant() {
        return Ok(scale * constant_mixed(alpha.constant_part(), k, omega.constant_part())?);
    }
    let a = alpha.sample(sp);
    let w = omega.sample(sp);
    let dens = mixed_density(&a, k, &w)?;
    Ok(scale * ordered_sum(&dens) * a.grid().cell_volume())
}

/// `c = ∫χⁿ / ∫χᵐ∧ω^{n−m}`.
pub fn compute_c(sp: &Spectral, chi: &HermitianFormField, omega: &HermitianFormField, m: usize) -> Result<f64> {
    compute_c_scaled(sp, chi, omega, m, 1.0)
}

pub fn compute_c_scaled(
    sp: &Spectral,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    m: usize,
    scale: f64,
) -> Result<f64> {
    let n = chi.grid().n();
    require_positive(sp, chi, "χ")?;
    let top = integrate_mixed_scaled(sp, chi, n, omega, scale)?;
    let mixed = integrate_mixed_scaled(sp, chi, m, omega, scale)?;
    Ok(top / mixed)
}

/// `b_t` from `∫Xₜⁿ = c∫Xₜᵐ∧ω^{n−m} + b_t∫ωⁿ` with `Xₜ = (1+t)χ + χ̃`.
pub fn compute_b(
    sp: &Spectral,
    chi: &HermitianFormField,
    chi_tilde: &HermitianFormField,
    omega: &HermitianFormField,
    t: f64,
    c: f64,
    m: usize,
) -> Result<f64> {
    compute_b_scaled(sp, chi, chi_tilde, omega, t, c, m, 1.0)
}

#[allow(clippy::too_many_arguments)]
pub fn compute_b_scaled(
    sp: &Spectral,
    chi: &HermitianFormField,
    chi_tilde: &HermitianFormField,
    omega: &HermitianFormField,
    t: f64,
    c: f64,
    m: usize,
    scale: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    let x = HermitianFormField::linear_combination(&[(1.0 + t, chi), (1.0, chi_tilde)])?;
    background_b(sp, &x, omega, c, m, scale)
}

/// `[∫Xⁿ − c∫Xᵐ∧ω^{n−m}] / ∫ωⁿ` for a given background form.
pub fn background_b(
    sp: &Spectral,
    x: &HermitianFormField,
    omega: &HermitianFormField,
    c: f64,
    m: usize,
    scale: f64,
) -> Result<f64> {
    let n = x.grid().n();
    let top = integrate_mixed_scaled(sp, x, n, omega, scale)?;
    let mixed = integrate_mixed_scaled(sp, x, m, omega, scale)?;
    let vol = integrate_mixed_scaled(sp, omega, 0, omega, scale)?;
    Ok((top - c * mixed) / vol)
}

fn require_positive(sp: &Spectral, form: &HermitianFormField, name: &str) -> Result<()> {
    let check = |m: &HMat| m.cholesky().is_ok();
    if form.is_constant() {
        if !check(form.constant_part()) {
            return Err(Error::Domain(format!("{name} is not positive definite")));
        }
        return Ok(());
    }
    let s = form.sample(sp);
    let n = s.grid().n();
    let id = HMat::identity(n);
    let bad = (0..s.grid().len()).into_par_iter().find_first(|&p| {
        let mut eig = [0.0; 4];
        id.relative_eigvals_packed(s.packed(p), &mut eig[..n]);
        !(eig[n - 1] > 0.0)
    });
    match bad {
        Some(p) => Err(Error::Domain(format!("{name} is not positive definite at {}", describe_point(&s, p)))),
        None => Ok(()),
    }
}

/// Rescales `f_raw > 0` so that `∫ f ωⁿ = ∫ ωⁿ`.
pub fn normalize_density(sp: &Spectral, f_raw: &ScalarField, omega: &HermitianFormField) -> Result<ScalarField> {
    if let Some(p) = f_raw.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("density is not positive at grid point {p}")));
    }
    let w = omega.sample(sp);
    let rho = volume_density(&w)?;
    let vol = ordered_sum(&rho);
    let weighted: Vec<f64> = f_raw.values().iter().zip(&rho).map(|(f, r)| f * r).collect();
    let mass = ordered_sum(&weighted);
    Ok(f_raw.scale(vol / mass))
}

/// `∫ f ωⁿ`.
pub fn integrate_scalar(f: &ScalarField, rho: &[f64]) -> f64 {
    let weighted: Vec<f64> = f.values().iter().zip(rho).map(|(f, r)| f * r).collect();
    ordered_sum(&weighted) * f.grid().cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::grid::TorusGrid;
    use std::f64::consts::PI;

    fn setup(n: usize, size: usize) -> (TorusGrid, Spectral) {
        let g = TorusGrid::new(n, size).unwrap();
        (g, Spectral::new(&g))
    }

    #[test]
    fn constant_forms() {
        let (g, sp) = setup(2, 4);
        let omega = HermitianFormField::constant(g, HMat::from_diag(&[1.0, 2.0])).unwrap();
        let alpha = omega.scaled(3.0);
        let v = integrate_mixed(&sp, &alpha, 2, &omega).unwrap();
        assert!((v - 9.0 * 2.0).abs() < 1e-12);
        let vol = integrate_mixed(&sp, &alpha, 0, &omega).unwrap();
        assert!((vol - 2.0).abs() < 1e-12);
        let c = compute_c(&sp, &omega.scaled(2.0), &omega, 1).unwrap();
        assert!((c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_terms_drop_out() {
        let (g, sp) = setup(2, 16);
        let omega = HermitianFormField::constant(g, HMat::identity(2)).unwrap();
        let u = ScalarField::from_fn(g, |x| 0.01 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[3]).sin());
        let chi = HermitianFormField::new(g, HMat::identity(2), Some(u)).unwrap();
        let c = compute_c(&sp, &chi, &omega, 1).unwrap();
        assert!((c - 1.0).abs() < 1e-12, "c = {c}");
    }

    #[test]
    fn uniform_b() {
        let (g, sp) = setup(2, 4);
        let omega = HermitianFormField::constant(g, HMat::identity(2)).unwrap();
        let tilde = omega.scaled(0.1);
        let b = compute_b(&sp, &omega, &tilde, &omega, 0.5, 1.0, 1).unwrap();
        assert!((b - 0.96).abs() < 1e-12);
    }

    #[test]
    fn normalization() {
        let (g, sp) = setup(2, 8);
        let omega = HermitianFormField::constant(g, HMat::identity(2)).unwrap();
        let f = normalize_density(&sp, &ScalarField::constant(g, 7.0), &omega).unwrap();
        assert!(f.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let raw = ScalarField::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).sin());
        let f = normalize_density(&sp, &raw, &omega).unwrap();
        assert!((f.mean() - 1.0).abs() < 1e-12);
        assert!(normalize_density(&sp, &ScalarField::zeros(g), &omega).is_err());
    }

    #[test]
    fn nonpositive_metric_is_located() {
        let (g, sp) = setup(2, 4);
        let bad =
            HermitianFormField::new(g, HMat::identity(2), Some(ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos())))
                .unwrap();
        let err = integrate_mixed(&sp, &bad, 2, &bad).unwrap_err();
        assert!(err.to_string().contains("grid point"));
    }
}
