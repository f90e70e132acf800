//! Small dense complex Hermitian matrices: Cholesky, congruence and cyclic Jacobi.
//!
//! Sizes are the complex dimension of the torus (2 or 3 in practice), so
//! everything is plain row-major storage with no blocking.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest supported size; storage is inline.
pub const MAX_DIM: usize = 4;

/// Row-major `n × n` complex matrix (`n ≤ MAX_DIM`), unused entries zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HMat {
    n: usize,
    a: [Complex64; MAX_DIM * MAX_DIM],
}

impl HMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM, "matrix size {n} exceeds {MAX_DIM}");
        HMat { n, a: [ZERO; MAX_DIM * MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = Complex64::new(s, 0.0);
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &v) in d.iter().enumerate() {
            m.a[i * n + i] = Complex64::new(v, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Input("matrix rows must all have length n".into()));
        }
        if n > MAX_DIM {
            return Err(Error::Input(format!("matrix size {n} exceeds {MAX_DIM}")));
        }
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            m.a[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    /// Unpacks the real layout `[d_0..d_{n-1}, re_01, im_01, re_02, im_02, …]`.
    pub fn from_packed(n: usize, p: &[f64]) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = Complex64::new(p[i], 0.0);
        }
        let mut k = n;
        for i in 0..n {
            for j in (i + 1)..n {
                let z = Complex64::new(p[k], p[k + 1]);
                m.a[i * n + j] = z;
                m.a[j * n + i] = z.conj();
                k += 2;
            }
        }
        m
    }

    /// Packs the upper triangle into `n²` reals (see [`HMat::from_packed`]).
    pub fn to_packed(&self, out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] = self.a[i * n + i].re;
        }
        let mut k = n;
        for i in 0..n {
            for j in (i + 1)..n {
                let z = self.a[i * n + j];
                out[k] = z.re;
                out[k + 1] = z.im;
                k += 2;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.a[i * self.n + j] = z;
    }

    pub fn add(&self, other: &HMat) -> HMat {
        HMat { n: self.n, a: std::array::from_fn(|k| self.a[k] + other.a[k]) }
    }

    pub fn scale(&self, s: f64) -> HMat {
        HMat { n: self.n, a: self.a.map(|x| x * s) }
    }

    pub fn mul(&self, other: &HMat) -> HMat {
        let n = self.n;
        let mut out = HMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> HMat {
        let n = self.n;
        let mut out = HMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.a[j * n + i] = self.a[i * n + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.a[i * self.n + i].re).sum()
    }

    /// Largest modulus entry.
    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `|A − A^H|` relative to `max|A|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                d = d.max((self.a[i * n + j] - self.a[j * n + i].conj()).norm());
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            d
        } else {
            d / scale
        }
    }

    /// Lower-triangular `L` with `A = L L^H`; fails unless `A` is positive definite.
    pub fn cholesky(&self) -> Result<HMat> {
        let n = self.n;
        let mut l = HMat::zeros(n);
        for j in 0..n {
            let mut d = self.a[j * n + j].re;
            for k in 0..j {
                d -= l.a[j * n + k].norm_sqr();
            }
            if !(d > 0.0) {
                return Err(Error::Domain("matrix is not positive definite".into()));
            }
            let djj = d.sqrt();
            l.a[j * n + j] = Complex64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut s = self.a[i * n + j];
                for k in 0..j {
                    s -= l.a[i * n + k] * l.a[j * n + k].conj();
                }
                l.a[i * n + j] = s / djj;
            }
        }
        Ok(l)
    }

    /// Inverse of a lower-triangular matrix.
    pub fn lower_inverse(&self) -> HMat {
        let n = self.n;
        let mut inv = HMat::zeros(n);
        for j in 0..n {
            inv.a[j * n + j] = ONE / self.a[j * n + j];
            for i in (j + 1)..n {
                let mut s = ZERO;
                for k in j..i {
                    s += self.a[i * n + k] * inv.a[k * n + j];
                }
                inv.a[i * n + j] = -s / self.a[i * n + i];
            }
        }
        inv
    }

    /// `M A M^H`.
    pub fn congruence(&self, m: &HMat) -> HMat {
        m.mul(self).mul(&m.adjoint())
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Eigenvalues are sorted in descending order; column `k` of the returned
    /// matrix is the unit eigenvector for eigenvalue `k`.
    pub fn eigh(&self) -> (Vec<f64>, HMat) {
        if self.n == 2 {
            return self.eigh2();
        }
        self.eigh_jacobi()
    }

    fn eigh_jacobi(&self) -> (Vec<f64>, HMat) {
        let n = self.n;
        let mut a = *self;
        for i in 0..n {
            a.a[i * n + i] = Complex64::new(a.a[i * n + i].re, 0.0);
        }
        let mut v = HMat::identity(n);
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for _sweep in 0..64 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a.a[p * n + q].norm_sqr();
                }
            }
            if off.sqrt() <= 1e-17 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<f64> = (0..n).map(|i| a.a[i * n + i].re).collect();
        order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
        let values = order.iter().map(|&i| diag[i]).collect();
        let mut vecs = HMat::zeros(n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for r in 0..n {
                vecs.a[r * n + new_col] = v.a[r * n + old_col];
            }
        }
        (values, vecs)
    }

    /// Closed-form 2×2 case.
    fn eigh2(&self) -> (Vec<f64>, HMat) {
        let (a, d, z) = (self.a[0].re, self.a[3].re, self.a[1]);
        let (hi, lo) = eig2(a, d, z);
        // two candidate null vectors of A − hi·I; take the better conditioned one
        let (v1, v2) = if (hi - d).abs() >= (hi - a).abs() {
            (Complex64::new(hi - d, 0.0), z.conj())
        } else {
            (z, Complex64::new(hi - a, 0.0))
        };
        let norm = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
        let (v1, v2) = if norm > 0.0 { (v1 / norm, v2 / norm) } else { (ONE, ZERO) };
        let mut v = HMat::zeros(2);
        v.a[0] = v1;
        v.a[2] = v2;
        v.a[1] = -v2.conj();
        v.a[3] = v1.conj();
        (vec![hi, lo], v)
    }

    /// Eigenvalues only, descending.
    pub fn eigvalsh(&self) -> Vec<f64> {
        match self.n {
            1 => vec![self.a[0].re],
            2 => {
                let (hi, lo) = eig2(self.a[0].re, self.a[3].re, self.a[1]);
                vec![hi, lo]
            }
            _ => self.eigh().0,
        }
    }

    /// Eigenvalues of the packed matrix `X` relative to `ω = L Lᴴ`, given `self = L⁻¹`;
    /// allocation-free for `n ≤ 2`.
    pub fn relative_eigvals_packed(&self, packed: &[f64], out: &mut [f64]) {
        match self.n {
            1 => out[0] = packed[0] * self.a[0].norm_sqr(),
            2 => {
                let (a, d) = (packed[0], packed[1]);
                let z = Complex64::new(packed[2], packed[3]);
                let (l00, l10, l11) = (self.a[0], self.a[2], self.a[3]);
                let r10 = l10 * a + l11 * z.conj();
                let r11 = l10 * z + l11 * d;
                let m00 = l00.norm_sqr() * a;
                let m01 = l00 * a * l10.conj() + l00 * z * l11.conj();
                let m11 = (r10 * l10.conj() + r11 * l11.conj()).re;
                let (hi, lo) = eig2(m00, m11, m01);
                out[0] = hi;
                out[1] = lo;
            }
            n => out.copy_from_slice(&HMat::from_packed(n, packed).congruence(self).eigvalsh()),
        }
    }
}

#[cfg(test)]
fn jacobi_eigvals(m: &HMat) -> Vec<f64> {
    m.eigh_jacobi().0
}

/// Descending eigenvalues of `[[a, z], [z̄, d]]`.
#[inline]
fn eig2(a: f64, d: f64, z: Complex64) -> (f64, f64) {
    let mid = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot(z.norm());
    // the root of smaller modulus via the product keeps its relative accuracy
    let big = if mid >= 0.0 { mid + rad } else { mid - rad };
    let small = if big == 0.0 { 0.0 } else { (a * d - z.norm_sqr()) / big };
    if big >= small {
        (big, small)
    } else {
        (small, big)
    }
}

/// Annihilates `a[p][q]` with a unitary plane rotation, accumulating into `v`.
fn rotate(a: &mut HMat, v: &mut HMat, p: usize, q: usize) {
    let n = a.n;
    let apq = a.a[p * n + q];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a.a[p * n + p].re;
    let aqq = a.a[q * n + q].re;
    let phase = apq / r;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 { 1.0 / (tau + (1.0 + tau * tau).sqrt()) } else { -1.0 / (-tau + (1.0 + tau * tau).sqrt()) };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // G = diag(1, conj(phase)) · [[c, s], [-s, c]]
    let gpp = Complex64::new(c, 0.0);
    let gpq = Complex64::new(s, 0.0);
    let gqp = -phase.conj() * s;
    let gqq = phase.conj() * c;
    for k in 0..n {
        let akp = a.a[k * n + p];
        let akq = a.a[k * n + q];
        a.a[k * n + p] = akp * gpp + akq * gqp;
        a.a[k * n + q] = akp * gpq + akq * gqq;
    }
    for k in 0..n {
        let apk = a.a[p * n + k];
        let aqk = a.a[q * n + k];
        a.a[p * n + k] = gpp.conj() * apk + gqp.conj() * aqk;
        a.a[q * n + k] = gpq.conj() * apk + gqq.conj() * aqk;
    }
    a.a[p * n + q] = ZERO;
    a.a[q * n + p] = ZERO;
    a.a[p * n + p] = Complex64::new(a.a[p * n + p].re, 0.0);
    a.a[q * n + q] = Complex64::new(a.a[q * n + q].re, 0.0);
    for k in 0..n {
        let vkp = v.a[k * n + p];
        let vkq = v.a[k * n + q];
        v.a[k * n + p] = vkp * gpp + vkq * gqp;
        v.a[k * n + q] = vkp * gpq + vkq * gqq;
    }
}
