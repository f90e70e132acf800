use std::sync::Arc;

use rayon::prelude::*;

use super::grid::{ScalarField, TorusGrid};
use super::spectral::Spectral;
use crate::error::{Error, Result};
use crate::hermitian::HMat;

/// Pointwise Hermitian matrices over the grid, `n²` reals per point in the
/// packed layout of [`HMat::from_packed`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: TorusGrid,
    data: Vec<f64>,
}

impl MatrixField {
    pub fn from_packed(grid: TorusGrid, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len() * grid.n() * grid.n(), "packed length mismatch");
        MatrixField { grid, data }
    }

    pub fn constant(grid: TorusGrid, m: &HMat) -> Self {
        let nc = grid.n() * grid.n();
        let mut one = vec![0.0; nc];
        m.to_packed(&mut one);
        let mut data = vec![0.0; grid.len() * nc];
        data.par_chunks_mut(nc).for_each(|c| c.copy_from_slice(&one));
        MatrixField { grid, data }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Packed components per point.
    pub fn components(&self) -> usize {
        self.grid.n() * self.grid.n()
    }

    pub fn packed(&self, p: usize) -> &[f64] {
        let nc = self.components();
        &self.data[p * nc..(p + 1) * nc]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn point(&self, p: usize) -> HMat {
        HMat::from_packed(self.grid.n(), self.packed(p))
    }

    /// `self + s·other`, in place.
    pub fn add_scaled(&mut self, s: f64, other: &MatrixField) {
        assert_eq!(self.grid, other.grid);
        self.data.par_iter_mut().zip(other.data.par_iter()).for_each(|(a, b)| *a += s * b);
    }

    pub fn scaled(&self, s: f64) -> MatrixField {
        MatrixField { grid: self.grid, data: self.data.par_iter().map(|v| s * v).collect() }
    }

    /// The common value when every point carries the same matrix.
    pub fn uniform_value(&self) -> Option<HMat> {
        let first = self.packed(0);
        let same = self.data.par_chunks(self.components()).all(|c| c == first);
        same.then(|| HMat::from_packed(self.grid.n(), first))
    }
}

/// Closed real (1,1)-form `A + i∂∂̄u` with a constant Hermitian `A` and a
/// periodic potential `u`.
///
/// The sampled `i∂∂̄u` may be attached once and is then carried through scaling
/// and linear combinations, so families of forms avoid repeated transforms.
#[derive(Debug, Clone)]
pub struct HermitianFormField {
    grid: TorusGrid,
    constant: HMat,
    potential: Option<ScalarField>,
    hessian: Option<Arc<MatrixField>>,
}

impl PartialEq for HermitianFormField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.constant == other.constant && self.potential == other.potential
    }
}

impl HermitianFormField {
    pub fn constant(grid: TorusGrid, constant: HMat) -> Result<Self> {
        Self::new(grid, constant, None)
    }

    pub fn new(grid: TorusGrid, constant: HMat, potential: Option<ScalarField>) -> Result<Self> {
        if constant.n() != grid.n() {
            return Err(Error::Input(format!(
                "form is {}×{}, grid has complex dimension {}",
                constant.n(),
                constant.n(),
                grid.n()
            )));
        }
        if constant.hermitian_defect() > 1e-12 {
            return Err(Error::Input("constant part is not Hermitian".into()));
        }
        if let Some(u) = &potential {
            if *u.grid() != grid {
                return Err(Error::Input("potential lives on a different grid".into()));
            }
        }
        Ok(HermitianFormField { grid, constant, potential, hessian: None })
    }

    /// Attaches the sampled `i∂∂̄u`.
    pub fn with_sampled_potential(mut self, sp: &Spectral) -> Self {
        if self.hessian.is_none() {
            self.hessian = self.potential.as_ref().map(|u| Arc::new(sp.hessian(u)));
        }
        self
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn constant_part(&self) -> &HMat {
        &self.constant
    }

    pub fn potential(&self) -> Option<&ScalarField> {
        self.potential.as_ref()
    }

    pub fn is_constant(&self) -> bool {
        self.potential.is_none()
    }

    /// `Σ sᵢ αᵢ`, combining constant parts and potentials.
    pub fn linear_combination(terms: &[(f64, &HermitianFormField)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::Input("empty combination".into()))?.1;
        let grid = first.grid;
        let mut constant = HMat::zeros(grid.n());
        let mut potential: Option<ScalarField> = None;
        let mut hessian: Option<MatrixField> = None;
        let mut all_cached = true;
        for (s, f) in terms {
            if f.grid != grid {
                return Err(Error::Input("forms live on different grids".into()));
            }
            constant = constant.add(&f.constant.scale(*s));
            if let Some(u) = &f.potential {
                potential = Some(match potential {
                    None => u.scale(*s),
                    Some(acc) => acc.add_scaled(*s, u)?,
                });
                match (&f.hessian, all_cached) {
                    (Some(h), true) => match &mut hessian {
                        None => hessian = Some(h.scaled(*s)),
                        Some(acc) => acc.add_scaled(*s, h),
                    },
                    _ => all_cached = false,
                }
            }
        }
        let mut out = Self::new(grid, constant, potential)?;
        if all_cached {
            out.hessian = hessian.map(Arc::new);
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        HermitianFormField {
            grid: self.grid,
            constant: self.constant.scale(s),
            potential: self.potential.as_ref().map(|u| u.scale(s)),
            hessian: self.hessian.as_ref().map(|h| Arc::new(h.scaled(s))),
        }
    }

    /// The form `i∂∂̄u` with zero constant part.
    pub fn exact(u: ScalarField) -> Self {
        let grid = *u.grid();
        HermitianFormField { grid, constant: HMat::zeros(grid.n()), potential: Some(u), hessian: None }
    }

    /// Pointwise coefficient matrices.
    pub fn sample(&self, sp: &Spectral) -> MatrixField {
        let mut out = MatrixField::constant(self.grid, &self.constant);
        match (&self.hessian, &self.potential) {
            (Some(h), _) => out.add_scaled(1.0, h),
            (None, Some(u)) => out.add_scaled(1.0, &sp.hessian(u)),
            (None, None) => {}
        }
        out
    }
}

/// The `i∂∂̄φ` field of a sampled potential.
pub fn complex_hessian(sp: &Spectral, phi: &ScalarField) -> MatrixField {
    sp.hessian(phi)
}

/// Eigenvalues of `X` relative to `ω` at every point, `n` per point, descending.
pub fn relative_eigenvalues(x: &MatrixField, omega: &MatrixField) -> Result<Vec<f64>> {
    let n = x.grid().n();
    let mut out = vec![0.0; x.grid().len() * n];
    if let Some(w) = omega.uniform_value() {
        let linv =
            w.cholesky().map_err(|_| Error::Domain("ω is not positive definite on the grid".into()))?.lower_inverse();
        out.par_chunks_mut(n).enumerate().for_each(|(p, o)| linv.relative_eigvals_packed(x.packed(p), o));
        return Ok(out);
    }
    let ok = out.par_chunks_mut(n).enumerate().all(|(p, o)| match omega.point(p).cholesky() {
        Ok(l) => {
            o.copy_from_slice(&x.point(p).congruence(&l.lower_inverse()).eigvalsh());
            true
        }
        Err(_) => false,
    });
    if !ok {
        return Err(Error::Domain("ω is not positive definite on the grid".into()));
    }
    Ok(out)
}

/// [`relative_eigenvalues`] of two sampled forms.
pub fn relative_eigenvalues_of(sp: &Spectral, x: &HermitianFormField, omega: &HermitianFormField) -> Result<Vec<f64>> {
    relative_eigenvalues(&x.sample(sp), &omega.sample(sp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn mixed_hessian_matches_finite_differences() {
        let g = TorusGrid::new(2, 64).unwrap();
        let sp = Spectral::new(&g);
        let phi_fn = |x: &[f64]| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[3]).sin();
        let phi = ScalarField::from_fn(g, phi_fn);
        let h = complex_hessian(&sp, &phi);
        // ∂₁∂̄₂ = ¼(∂x₁ − i∂y₁)(∂x₂ + i∂y₂) by centered differences of the closed form
        let mut x = vec![0.0; 4];
        for p in (0..g.len()).step_by(997) {
            g.coords(p, &mut x);
            let cross = |a: usize, b: usize, h: f64| {
                let mut s = 0.0;
                for (sa, sb, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut y = x.clone();
                    y[a] += sa * h;
                    y[b] += sb * h;
                    s += w * phi_fn(&y);
                }
                s / (4.0 * h * h)
            };
            // Richardson-extrapolated, fourth order
            let step = 1e-3;
            let d = |a: usize, b: usize| (4.0 * cross(a, b, step) - cross(a, b, 2.0 * step)) / 3.0;
            let fd = Complex64::new(0.25 * (d(0, 2) + d(1, 3)), 0.25 * (d(0, 3) - d(1, 2)));
            assert!((h.point(p).get(0, 1) - fd).norm() < 1e-6, "point {p}");
        }
    }

    #[test]
    fn constant_form_has_no_potential() {
        let g = TorusGrid::new(2, 4).unwrap();
        let sp = Spectral::new(&g);
        let f = HermitianFormField::constant(g, HMat::scaled_identity(2, 2.0)).unwrap();
        let s = f.sample(&sp);
        assert_eq!(s.point(17), HMat::scaled_identity(2, 2.0));
        let sum = HermitianFormField::linear_combination(&[(1.5, &f), (-1.0, &f)]).unwrap();
        assert_eq!(sum.constant_part(), &HMat::scaled_identity(2, 1.0));
    }
}
