//! Constructors for test forms: degenerate big `χ̃`, boundary-tuned `χ`, and the
//! compatibility calibration between them.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::forms::{relative_eigenvalues, HermitianFormField, MatrixField};
use super::grid::{ScalarField, TorusGrid};
use super::quadrature::{compute_c, integrate_mixed, integrate_scalar, volume_density};
use super::spectral::Spectral;
use crate::error::{Error, Result};
use crate::hermitian::HMat;
use crate::pointwise::{cone_margin, eigen_rel_with};
use crate::symmetric::{binomial, sym_without};

/// Points whose smallest eigenvalue is below this count as degenerate.
pub const DEGENERATE_EIG_TOL: f64 = 1e-6;

/// A semipositive form whose smallest eigenvalue touches zero on the grid.
#[derive(Debug, Clone)]
pub struct DegenerateForm {
    pub form: HermitianFormField,
    pub amplitude: f64,
    /// `true` where the smallest eigenvalue is below [`DEGENERATE_EIG_TOL`].
    pub degenerate: Vec<bool>,
}

impl DegenerateForm {
    /// Complement of the degenerate set (proxy for the ample locus).
    pub fn ample_mask(&self) -> Vec<bool> {
        self.degenerate.iter().map(|d| !d).collect()
    }
}

fn min_eigen(base: &[f64], hess: &MatrixField, a: f64, n: usize) -> f64 {
    let id = HMat::identity(n);
    (0..hess.grid().len())
        .into_par_iter()
        .map(|p| {
            let mut packed = [0.0; 16];
            let mut eig = [0.0; 4];
            for ((o, b), h) in packed.iter_mut().zip(base).zip(hess.packed(p)) {
                *o = b + a * h;
            }
            id.relative_eigvals_packed(&packed[..n * n], &mut eig[..n]);
            eig[n - 1]
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Illinois regula falsi on a sign change of `f` between the two points.
///
/// Returns the endpoint on the `f ≥ 0` side and its value once that value is at
/// most `stop` or the bracket has collapsed to rounding.
fn bracketed_root<F>(mut f: F, a: (f64, f64), b: (f64, f64), stop: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let ((mut pos, mut w_pos), (mut neg, mut w_neg)) = if a.1 >= 0.0 { (a, b) } else { (b, a) };
    let mut value = w_pos;
    let mut last_side = 0i8;
    for _ in 0..200 {
        if value <= stop || (pos - neg).abs() <= 4.0 * f64::EPSILON * pos.abs().max(neg.abs()) {
            break;
        }
        let mut x = (pos * w_neg - neg * w_pos) / (w_neg - w_pos);
        if !(x > pos.min(neg) && x < pos.max(neg)) {
            x = 0.5 * (pos + neg);
        }
        let fx = f(x)?;
        if fx >= 0.0 {
            pos = x;
            w_pos = fx;
            value = fx;
            if last_side == 1 {
                w_neg *= 0.5;
            }
            last_side = 1;
        } else {
            neg = x;
            w_neg = fx;
            if last_side == -1 {
                w_pos *= 0.5;
            }
            last_side = -1;
        }
    }
    Ok((pos, value))
}

/// `χ̃ = base + a·i∂∂̄ψ` with `a > 0` chosen so that `min_x λ_min(χ̃) = 0`.
///
/// `λ_min` is concave in `a`, so the zero crossing is unique.
pub fn make_degenerate_big(sp: &Spectral, base: &HMat, shape: &ScalarField) -> Result<DegenerateForm> {
    let grid = *sp.grid();
    let n = grid.n();
    if base.cholesky().is_err() {
        return Err(Error::Construction("base form must be positive definite".into()));
    }
    let hess = sp.hessian(shape);
    let scale = hess.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale < 1e-12 * base.max_abs() {
        return Err(Error::Construction("shape has no Hessian (harmonic); no degeneracy can be reached".into()));
    }
    let mut packed = vec![0.0; n * n];
    base.to_packed(&mut packed);
    let g = |a: f64| min_eigen(&packed, &hess, a, n);
    let mut lo = 0.0;
    let mut hi = 1.0 / scale;
    let mut g_hi = g(hi);
    let mut expansions = 0;
    while g_hi > 0.0 {
        lo = hi;
        hi *= 2.0;
        g_hi = g(hi);
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Construction("no bracket for the degeneracy amplitude".into()));
        }
    }
    let g_lo = g(lo);
    let (lo, _) = bracketed_root(|a| Ok(g(a)), (lo, g_lo), (hi, g_hi), 1e-15 * g_lo.abs())?;
    let residual = g(lo);
    if residual.abs() > 1e-10 {
        return Err(Error::Construction(format!("root search ended with minimum eigenvalue {residual:.3e}")));
    }
    let form = HermitianFormField::new(grid, *base, Some(shape.scale(lo)))?.with_sampled_potential(sp);
    let sampled = form.sample(sp);
    let degenerate = (0..grid.len())
        .into_par_iter()
        .map(|p| *sampled.point(p).eigvalsh().last().expect("n >= 1") < DEGENERATE_EIG_TOL)
        .collect();
    Ok(DegenerateForm { form, amplitude: lo, degenerate })
}

/// Outcome of the boundary-case search.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryTuning {
    /// `min margin = 0` within tolerance at this amplitude.
    Boundary { amplitude: f64, c: f64, min_margin: f64 },
    /// The margin stays positive over the bracket.
    Strict { min_margin: f64 },
    /// The margin stays negative over the bracket.
    Violated { min_margin: f64 },
}

/// Minimum over the grid of the cone margin of `χ` with its own `c`.
pub fn min_cone_margin(
    sp: &Spectral,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    m: usize,
) -> Result<(f64, f64)> {
    let c = compute_c(sp, chi, omega, m)?;
    let margins = margin_field(sp, chi, omega, c, m)?;
    Ok((margins.iter().copied().fold(f64::INFINITY, f64::min), c))
}

/// Pointwise `cone_margin(μ_χ(x), c, m)`.
pub fn margin_field(
    sp: &Spectral,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    c: f64,
    m: usize,
) -> Result<Vec<f64>> {
    let n = chi.grid().n();
    let mu = relative_eigenvalues(&chi.sample(sp), &omega.sample(sp))?;
    Ok(mu.par_chunks(n).map(|l| cone_margin(l, c, m)).collect())
}

/// Finds the zero of `amplitude ↦ min margin` on `bracket` (the boundary case).
pub fn tune_to_boundary<F>(
    sp: &Spectral,
    family: F,
    omega: &HermitianFormField,
    m: usize,
    bracket: (f64, f64),
) -> Result<BoundaryTuning>
where
    F: Fn(f64) -> Result<HermitianFormField>,
{
    let eval = |a: f64| -> Result<(f64, f64)> { min_cone_margin(sp, &family(a)?, omega, m) };
    let (lo, hi) = bracket;
    let (m_lo, _) = eval(lo)?;
    let (m_hi, _) = eval(hi)?;
    if m_lo > 0.0 && m_hi > 0.0 {
        return Ok(BoundaryTuning::Strict { min_margin: m_lo.min(m_hi) });
    }
    if m_lo < 0.0 && m_hi < 0.0 {
        return Ok(BoundaryTuning::Violated { min_margin: m_lo.max(m_hi) });
    }
    let (pos, _) = bracketed_root(|a| Ok(eval(a)?.0), (lo, m_lo), (hi, m_hi), 1e-15 * m_lo.abs().max(m_hi.abs()))?;
    let (min_margin, c) = eval(pos)?;
    if min_margin.abs() > 1e-8 {
        return Err(Error::Construction(format!(
            "margin is not continuous across the bracket (ended at {min_margin:.3e})"
        )));
    }
    Ok(BoundaryTuning::Boundary { amplitude: pos, c, min_margin })
}

/// `a ↦ base + a·i∂∂̄u`, with `i∂∂̄u` sampled once.
pub fn potential_family(
    sp: &Spectral,
    base: HMat,
    shape: ScalarField,
) -> Result<impl Fn(f64) -> Result<HermitianFormField>> {
    let unit = HermitianFormField::new(*sp.grid(), HMat::zeros(sp.grid().n()), Some(shape))?.with_sampled_potential(sp);
    let base = HermitianFormField::constant(*sp.grid(), base)?;
    Ok(move |a| HermitianFormField::linear_combination(&[(1.0, &base), (a, &unit)]))
}

/// `cos(2πx₁) + cos(2πy₁)`: with `χ = I + a·i∂∂̄u`, `n = 2`, `m = 1` the boundary
/// case is reached at `a = 1/(4π²)`.
pub fn canonical_boundary_shape(grid: TorusGrid) -> ScalarField {
    ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos())
}

/// How the compatibility condition `F(s) = 0` was resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationMode {
    /// A second root `s > 0` of `F` was found; `b₀ = 0`.
    Exact { s: f64 },
    /// No second root in the bracket; the limit keeps `b₀ f ωⁿ` with `b₀ > 0`.
    Relaxed { b0: f64, residual_measure: f64 },
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub chi: HermitianFormField,
    pub chi_tilde: HermitianFormField,
    pub c: f64,
    pub amplitude: f64,
    /// `F′(0) = ∫χ̃₀∧(nχ^{n−1} − mcχ^{m−1}∧ω^{n−m})`.
    pub f_prime_zero: f64,
    pub mode: CalibrationMode,
}

/// `F(s) = ∫(χ+sχ̃₀)ⁿ − c∫(χ+sχ̃₀)ᵐ∧ω^{n−m}`.
pub fn compatibility_defect(
    sp: &Spectral,
    chi: &HermitianFormField,
    chi_tilde0: &HermitianFormField,
    omega: &HermitianFormField,
    c: f64,
    m: usize,
    s: f64,
) -> Result<f64> {
    let n = chi.grid().n();
    let x = HermitianFormField::linear_combination(&[(1.0, chi), (s, chi_tilde0)])?;
    Ok(integrate_mixed(sp, &x, n, omega)? - c * integrate_mixed(sp, &x, m, omega)?)
}

/// `F′(0)` by quadrature of `Σᵢ α̂ᵢᵢ·marginᵢ` in the eigenframe of `χ`.
pub fn compatibility_slope(
    sp: &Spectral,
    chi: &HermitianFormField,
    chi_tilde0: &HermitianFormField,
    omega: &HermitianFormField,
    c: f64,
    m: usize,
) -> Result<f64> {
    let n = chi.grid().n();
    let xs = chi.sample(sp);
    let ts = chi_tilde0.sample(sp);
    let ws = omega.sample(sp);
    let rho = volume_density(&ws)?;
    let scaled = c / binomial(n, m as isize);
    let dens: Vec<f64> = (0..xs.grid().len())
        .into_par_iter()
        .map(|p| {
            let l = ws.point(p).cholesky().expect("checked by volume_density");
            let (lam, w) = eigen_rel_with(&xs.point(p), &l.lower_inverse());
            let alpha = w.adjoint().mul(&ts.point(p)).mul(&w);
            (0..n)
                .map(|i| {
                    let margin = sym_without(n as isize - 1, &lam, i) - scaled * sym_without(m as isize - 1, &lam, i);
                    alpha.get(i, i).re * margin
                })
                .sum::<f64>()
        })
        .collect();
    let f = ScalarField::new(*xs.grid(), dens)?;
    Ok(integrate_scalar(&f, &rho))
}

/// Tunes `χ` to the boundary case, then searches `s > 0` with `F(s) = 0`,
/// falling back to the relaxed instance `χ̃ = χ̃₀`.
pub fn calibrate_instance<F>(
    sp: &Spectral,
    family: F,
    bracket: (f64, f64),
    chi_tilde0: &HermitianFormField,
    omega: &HermitianFormField,
    m: usize,
) -> Result<Calibration>
where
    F: Fn(f64) -> Result<HermitianFormField>,
{
    let (amplitude, c) = match tune_to_boundary(sp, &family, omega, m, bracket)? {
        BoundaryTuning::Boundary { amplitude, c, .. } => (amplitude, c),
        other => return Err(Error::Construction(format!("family has no boundary case: {other:?}"))),
    };
    let chi = family(amplitude)?;
    let f_prime_zero = compatibility_slope(sp, &chi, chi_tilde0, omega, c, m)?;
    let vol = integrate_mixed(sp, omega, 0, omega)?;
    let defect = |s: f64| compatibility_defect(sp, &chi, chi_tilde0, omega, c, m, s);
    // F(0) = 0 and F′(0) ≥ 0: a second root is a sign change to F < 0 on (0, 16]
    let mut prev_s = 0.0;
    let mut s = 2f64.powi(-20);
    let mut root = None;
    while s <= 16.0 {
        if defect(s)? < 0.0 {
            let (mut lo, mut hi) = (prev_s, s);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if defect(mid)? < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            root = Some(lo);
            break;
        }
        prev_s = s;
        s *= 2.0;
    }
    let (chi_tilde, mode) = match root {
        Some(s) => (chi_tilde0.scaled(s), CalibrationMode::Exact { s }),
        None => {
            let b0 = defect(1.0)? / vol;
            (chi_tilde0.clone(), CalibrationMode::Relaxed { b0, residual_measure: b0 * vol })
        }
    };
    Ok(Calibration { chi, chi_tilde, c, amplitude, f_prime_zero, mode })
}

/// Periodic Euclidean distance from every grid point to the nearest marked point.
///
/// Exact squared distance via one brute-force minimization per axis.
pub fn distance_to_set(grid: &TorusGrid, mask: &[bool]) -> Vec<f64> {
    let size = grid.size();
    let h = grid.spacing();
    let sq: Vec<f64> = (0..size)
        .map(|d| {
            let k = d.min(size - d) as f64 * h;
            k * k
        })
        .collect();
    let mut f: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    for axis in 0..grid.axes() {
        let stride = grid.stride(axis);
        let block = size * stride;
        let mut next = vec![0.0; f.len()];
        next.par_chunks_mut(block).zip(f.par_chunks(block)).for_each(|(out, inp)| {
            for r in 0..stride {
                for i in 0..size {
                    let mut best = f64::INFINITY;
                    for j in 0..size {
                        let d = (i + size - j) % size;
                        best = best.min(inp[j * stride + r] + sq[d]);
                    }
                    out[i * stride + r] = best;
                }
            }
        });
        f = next;
    }
    f.into_iter().map(f64::sqrt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(size: usize) -> (TorusGrid, Spectral, HermitianFormField) {
        let g = TorusGrid::new(2, size).unwrap();
        let sp = Spectral::new(&g);
        let omega = HermitianFormField::constant(g, HMat::identity(2)).unwrap();
        (g, sp, omega)
    }

    #[test]
    fn degenerate_amplitude_closed_form() {
        let (g, sp, omega) = setup(8);
        let shape = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let d = make_degenerate_big(&sp, &HMat::identity(2), &shape).unwrap();
        assert!((d.amplitude - 1.0 / (PI * PI)).abs() < 1e-10);
        let mut x = vec![0.0; 4];
        for (p, &deg) in d.degenerate.iter().enumerate() {
            g.coords(p, &mut x);
            assert_eq!(deg, x[0] == 0.0);
        }
        assert!(integrate_mixed(&sp, &d.form, 2, &omega).unwrap() > 0.0);
        assert!(make_degenerate_big(&sp, &HMat::identity(2), &ScalarField::zeros(g)).is_err());
    }

    #[test]
    fn canonical_boundary_root() {
        let (g, sp, omega) = setup(8);
        let fam = potential_family(&sp, HMat::identity(2), canonical_boundary_shape(g)).unwrap();
        let r = tune_to_boundary(&sp, &fam, &omega, 1, (0.0, 1.0 / (3.0 * PI * PI))).unwrap();
        match r {
            BoundaryTuning::Boundary { amplitude, c, .. } => {
                assert!((amplitude - 0.25 / (PI * PI)).abs() < 1e-9);
                assert!((c - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let (m0, _) = min_cone_margin(&sp, &fam(0.0).unwrap(), &omega, 1).unwrap();
        assert!((m0 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn constant_chi_is_strict() {
        let (g, sp, omega) = setup(4);
        let chi = HermitianFormField::constant(g, HMat::from_diag(&[1.0, 3.0])).unwrap();
        let fam = |_a: f64| Ok(chi.clone());
        match tune_to_boundary(&sp, fam, &omega, 1, (0.0, 1.0)).unwrap() {
            BoundaryTuning::Strict { min_margin } => assert!((min_margin - 0.25).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let g = TorusGrid::new(2, 4).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|p| p % 37 == 0).collect();
        let d = distance_to_set(&g, &mask);
        let (mut x, mut y) = (vec![0.0; 4], vec![0.0; 4]);
        for p in 0..g.len() {
            g.coords(p, &mut x);
            let mut best = f64::INFINITY;
            for q in (0..g.len()).filter(|&q| mask[q]) {
                g.coords(q, &mut y);
                let s: f64 = x.iter().zip(&y).map(|(a, b)| super::super::circle_distance(*a, *b).powi(2)).sum();
                best = best.min(s.sqrt());
            }
            assert!((d[p] - best).abs() < 1e-14);
        }
    }
}
