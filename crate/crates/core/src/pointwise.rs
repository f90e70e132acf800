//! Per-point Hermitian algebra for the quotient operator.
//!
//! At a grid point the unknown form `X` and the metric `ω` are `n × n` Hermitian
//! matrices. Eigenvalues of `X` relative to `ω` are obtained by congruence with
//! the Cholesky factor of `ω`, sorted descending.

use num_complex::Complex64;
use num_traits::{FromPrimitive, Num};

use crate::error::{Error, Result};
use crate::hermitian::HMat;
use crate::symmetric::{binomial, elementary_sym, sym_without, sym_without_generic, Spectrum};

/// Hermitian tolerance for point data, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-14;

/// Form coefficients `X_{ij̄}` together with the metric `ω_{ij̄}` at one point.
#[derive(Debug, Clone)]
pub struct HermitianPoint {
    matrix: HMat,
    metric: HMat,
    metric_chol: HMat,
}

impl HermitianPoint {
    pub fn new(matrix: HMat, metric: HMat) -> Result<Self> {
        if matrix.n() != metric.n() {
            return Err(Error::Input("matrix and metric sizes differ".into()));
        }
        for (name, m) in [("matrix", &matrix), ("metric", &metric)] {
            let d = m.hermitian_defect();
            if d > HERMITIAN_TOL {
                return Err(Error::Input(format!("{name} is not Hermitian (defect {d:.2e})")));
            }
        }
        let metric_chol = metric.cholesky().map_err(|_| Error::Input("metric is not positive definite".into()))?;
        Ok(HermitianPoint { matrix, metric, metric_chol })
    }

    pub fn matrix(&self) -> &HMat {
        &self.matrix
    }

    pub fn metric(&self) -> &HMat {
        &self.metric
    }
}

/// Parameters of `S_n(X) = (coefficient / C(n,m)) S_m(X) + source` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquationParams {
    pub n: usize,
    pub m: usize,
    pub coefficient: f64,
    pub source: f64,
}

impl EquationParams {
    pub fn new(n: usize, m: usize, coefficient: f64, source: f64) -> Result<Self> {
        if m >= n {
            return Err(Error::Input(format!("need 0 <= m < n, got m={m}, n={n}")));
        }
        if !(coefficient >= 0.0) || !(source >= 0.0) {
            return Err(Error::Input("coefficient and source must be >= 0".into()));
        }
        Ok(EquationParams { n, m, coefficient, source })
    }

    /// `coefficient / C(n, m)`.
    #[inline]
    pub fn scaled_coefficient(&self) -> f64 {
        self.coefficient / binomial(self.n, self.m as isize)
    }
}

/// Eigenvalues of `X` relative to `ω`, descending.
pub fn eigenvalues_rel(p: &HermitianPoint) -> Spectrum {
    let linv = p.metric_chol.lower_inverse();
    let vals = p.matrix.congruence(&linv).eigvalsh();
    Spectrum::new(vals).expect("finite Hermitian data has finite eigenvalues")
}

/// Relative eigen-decomposition given `L^{-1}` for `ω = L L^H`.
///
/// Returns eigenvalues (descending) and vectors `w_k = L^{-H} v_k`, which satisfy
/// `w_k^H X w_l = λ_k δ_{kl}` and `w_k^H ω w_l = δ_{kl}`.
pub fn eigen_rel_with(x: &HMat, metric_linv: &HMat) -> (Vec<f64>, HMat) {
    let (vals, v) = x.congruence(metric_linv).eigh();
    (vals, metric_linv.adjoint().mul(&v))
}

/// `S_n(λ) − (coefficient / C(n,m)) S_m(λ) − source`.
pub fn residual_volume_form(lambda: &[f64], params: &EquationParams) -> f64 {
    let n = params.n as isize;
    elementary_sym(n, lambda) - params.scaled_coefficient() * elementary_sym(params.m as isize, lambda) - params.source
}

/// `(coefficient / C(n,m)) S_{n−m}(λ⁻¹) + source · S_n(λ⁻¹) − 1`.
pub fn residual_inverse_form(lambda: &[f64], params: &EquationParams) -> Result<f64> {
    let mu = reciprocals(lambda)?;
    Ok(inverse_residual_unchecked(&mu, params))
}

#[inline]
pub(crate) fn inverse_residual_unchecked(mu: &[f64], params: &EquationParams) -> f64 {
    let n = params.n as isize;
    let m = params.m as isize;
    params.scaled_coefficient() * elementary_sym(n - m, mu) + params.source * elementary_sym(n, mu) - 1.0
}

fn reciprocals(lambda: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = lambda.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("eigenvalue {i} = {} is not positive", lambda[i])));
    }
    Ok(lambda.iter().map(|v| 1.0 / v).collect())
}

/// `a_i = −∂(residual_inverse_form)/∂λ_i`, all nonnegative.
pub fn linearization_coefficients(lambda: &[f64], params: &EquationParams) -> Result<Vec<f64>> {
    let mu = reciprocals(lambda)?;
    Ok(linearization_unchecked(&mu, params))
}

#[inline]
pub(crate) fn linearization_unchecked(mu: &[f64], params: &EquationParams) -> Vec<f64> {
    let n = params.n as isize;
    let m = params.m as isize;
    let k = params.scaled_coefficient();
    (0..mu.len())
        .map(|i| {
            let mi2 = mu[i] * mu[i];
            (k * sym_without(n - m - 1, mu, i) + params.source * sym_without(n - 1, mu, i)) * mi2
        })
        .collect()
}

/// Cone margin over any exact or floating scalar.
pub fn cone_margin_generic<T>(mu: &[T], coeff: T, m: usize) -> T
where
    T: Copy + Num + PartialOrd + FromPrimitive,
{
    let n = mu.len();
    let scaled = coeff / T::from_f64(binomial(n, m as isize)).expect("binomial fits the scalar");
    let mut best: Option<T> = None;
    for i in 0..n {
        let v = sym_without_generic(n as isize - 1, mu, i) - scaled * sym_without_generic(m as isize - 1, mu, i);
        best = Some(match best {
            Some(b) if b <= v => b,
            _ => v,
        });
    }
    best.expect("nonempty spectrum")
}

/// `min_i [S_{n−1;i}(μ) − (coeff / C(n,m)) S_{m−1;i}(μ)]`.
///
/// Positive in the strict cone condition, zero in the boundary case, negative
/// when violated.
pub fn cone_margin(mu: &[f64], coeff: f64, m: usize) -> f64 {
    cone_margin_generic(mu, coeff, m)
}

/// `min λ_i > tol`.
pub fn admissible(lambda: &[f64], tol: f64) -> bool {
    lambda.iter().all(|&v| v > tol)
}

/// Newton data of the inverse-form residual at one point.
#[derive(Debug, Clone)]
pub struct PointLinearization {
    pub lambda: Vec<f64>,
    pub residual: f64,
    /// `H` with `δR = −Σ_{ij} H_{ij} δX_{ij}`; Hermitian positive semidefinite.
    pub coefficient_matrix: HMat,
    /// `∂R / ∂(scaled coefficient)` and `∂R / ∂source` at fixed `X`.
    pub d_scaled_coefficient: f64,
    pub d_source: f64,
}

/// Residual, eigenvalues and coefficient matrix of the linearized operator at `X`.
///
/// Returns `None` when `X` is not positive definite relative to `ω`.
pub fn linearize_point(x: &HMat, metric_linv: &HMat, params: &EquationParams) -> Option<PointLinearization> {
    let (lambda, w) = eigen_rel_with(x, metric_linv);
    if !admissible(&lambda, 0.0) {
        return None;
    }
    let n = params.n;
    let mu: Vec<f64> = lambda.iter().map(|v| 1.0 / v).collect();
    let residual = inverse_residual_unchecked(&mu, params);
    let a = linearization_unchecked(&mu, params);
    let mut h = HMat::zeros(n);
    for (k, &ak) in a.iter().enumerate() {
        for i in 0..n {
            let wik = w.get(i, k).conj();
            for j in 0..n {
                let val = h.get(i, j) + wik * w.get(j, k) * ak;
                h.set(i, j, val);
            }
        }
    }
    let d_scaled_coefficient = elementary_sym((n - params.m) as isize, &mu);
    let d_source = elementary_sym(n as isize, &mu);
    Some(PointLinearization { lambda, residual, coefficient_matrix: h, d_scaled_coefficient, d_source })
}

/// Row of the Hermitian matrix `H` contracted against a Hermitian increment: `Σ_{ij} H_{ij} D_{ij}`.
pub fn contract(h: &HMat, d: &HMat) -> f64 {
    let n = h.n();
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += h.get(i, j) * d.get(i, j);
        }
    }
    s.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(n: usize, m: usize, c: f64, src: f64) -> EquationParams {
        EquationParams::new(n, m, c, src).unwrap()
    }

    #[test]
    fn eigen_identity_and_diagonal() {
        let w = HMat::from_diag(&[2.0, 0.5, 1.0]);
        let p = HermitianPoint::new(w, w).unwrap();
        for v in eigenvalues_rel(&p).values() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-14);
        }
        let p = HermitianPoint::new(HMat::from_diag(&[2.0, 3.0]), HMat::identity(2)).unwrap();
        assert_eq!(eigenvalues_rel(&p).values(), &[3.0, 2.0]);
    }

    #[test]
    fn rejects_bad_points() {
        let mut x = HMat::identity(2);
        x.set(0, 1, Complex64::new(1.0, 0.0));
        assert!(HermitianPoint::new(x, HMat::identity(2)).is_err());
        assert!(HermitianPoint::new(HMat::identity(2), HMat::from_diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn volume_form_examples() {
        let s: f64 = 1.7;
        assert_relative_eq!(residual_volume_form(&[s, s], &params(2, 1, 1.0, s * s - s)), 0.0, epsilon = 1e-15);
        assert_relative_eq!(residual_volume_form(&[2.0, 0.5, 3.0], &params(3, 0, 3.0, 0.0)), 0.0, epsilon = 1e-15);
        assert_eq!(residual_volume_form(&[1.0, 1.0], &params(2, 1, 2.0, 0.0)), -1.0);
    }

    #[test]
    fn inverse_form_examples() {
        let s: f64 = 1.7;
        assert_relative_eq!(
            residual_inverse_form(&[s, s], &params(2, 1, 1.0, s * s - s)).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_eq!(residual_inverse_form(&[0.3, 9.0], &params(2, 1, 0.0, 0.0)).unwrap(), -1.0);
        assert!(residual_inverse_form(&[0.0, 1.0], &params(2, 1, 1.0, 0.0)).is_err());
        let lam = [2.0, 0.7, 1.3];
        let p = params(3, 1, 1.4, 0.3);
        let vol = residual_volume_form(&lam, &p);
        let inv = residual_inverse_form(&lam, &p).unwrap();
        // the two residuals have opposite orientation
        assert_relative_eq!(inv * elementary_sym(3, &lam), -vol, epsilon = 1e-14);
    }

    #[test]
    fn linearization_example() {
        let a = linearization_coefficients(&[1.0, 1.0], &params(2, 1, 1.0, 0.0)).unwrap();
        assert_eq!(a, vec![0.5, 0.5]);
        assert!(linearization_coefficients(&[-1.0, 1.0], &params(2, 1, 1.0, 0.0)).is_err());
    }

    #[test]
    fn cone_margin_examples() {
        let c = 1.3;
        assert_relative_eq!(cone_margin(&[c / 2.0, c / 2.0], c, 1), 0.0, epsilon = 1e-15);
        assert_eq!(cone_margin(&[1.0, 1.0], 1.0, 1), 0.5);
        // m = 0: the cone condition is just S_{n-1;i} > 0
        assert_eq!(cone_margin(&[1.0, 2.0, 3.0], 5.0, 0), 2.0);
    }

    #[test]
    fn admissible_examples() {
        assert!(admissible(&[1.0, 2.0], 0.0));
        assert!(!admissible(&[0.0, 1.0], 0.0));
        assert!(!admissible(&[1e-9, 1.0], 1e-8));
    }

    #[test]
    fn linearize_point_matches_formula() {
        let x = HMat::from_diag(&[2.0, 0.5]);
        let linv = HMat::identity(2);
        let p = params(2, 1, 1.0, 0.2);
        let lin = linearize_point(&x, &linv, &p).unwrap();
        let a = linearization_coefficients(&lin.lambda, &p).unwrap();
        assert_relative_eq!(lin.coefficient_matrix.get(0, 0).re, a[0], epsilon = 1e-15);
        assert_relative_eq!(lin.coefficient_matrix.get(1, 1).re, a[1], epsilon = 1e-15);
        assert!(linearize_point(&HMat::from_diag(&[1.0, -0.1]), &linv, &p).is_none());
    }
}
