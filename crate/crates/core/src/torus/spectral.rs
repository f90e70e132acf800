//! Discrete-Fourier differentiation on the torus grid.
//!
//! Complex Hessian entries `∂ᵢ∂̄ⱼ = ¼[(∂_{xᵢ}∂_{xⱼ} + ∂_{yᵢ}∂_{yⱼ}) + i(∂_{xᵢ}∂_{yⱼ} − ∂_{yᵢ}∂_{xⱼ})]`
//! are assembled from real second derivatives. Same-axis second derivatives keep
//! the Nyquist mode; first derivatives (and so mixed-axis products) drop it, which
//! keeps every operator real and even in the wave number.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::forms::MatrixField;
use super::grid::{ScalarField, TorusGrid};

/// FFT plans and Hessian symbols for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: TorusGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Per packed Hessian component, the real symbol at every wave vector.
    hess_symbols: Arc<Vec<Vec<f64>>>,
    /// `2πk` per axis index, Nyquist set to zero.
    wave: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

/// Signed wave number of FFT index `i` on `size` points.
fn wavenumber(i: usize, size: usize) -> i64 {
    if i <= size / 2 {
        i as i64
    } else {
        i as i64 - size as i64
    }
}

impl Spectral {
    pub fn new(grid: &TorusGrid) -> Self {
        let size = grid.size();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let two_pi = 2.0 * std::f64::consts::PI;
        let wave: Vec<f64> =
            (0..size).map(|i| if i == size / 2 { 0.0 } else { two_pi * wavenumber(i, size) as f64 }).collect();
        let wave2: Vec<f64> = (0..size).map(|i| (two_pi * wavenumber(i, size) as f64).powi(2)).collect();

        let n = grid.n();
        let len = grid.len();
        let mut symbols = vec![vec![0.0; len]; n * n];
        let mut mi = vec![0usize; grid.axes()];
        for p in 0..len {
            grid.multi_index(p, &mut mi);
            // axis 2j is x_j, axis 2j+1 is y_j
            for i in 0..n {
                symbols[i][p] = -0.25 * (wave2[mi[2 * i]] + wave2[mi[2 * i + 1]]);
            }
            let mut c = n;
            for i in 0..n {
                for j in (i + 1)..n {
                    let (xi, yi) = (wave[mi[2 * i]], wave[mi[2 * i + 1]]);
                    let (xj, yj) = (wave[mi[2 * j]], wave[mi[2 * j + 1]]);
                    // (i kx)(i ky) = -kx ky
                    symbols[c][p] = -0.25 * (xi * xj + yi * yj);
                    symbols[c + 1][p] = -0.25 * (xi * yj - yi * xj);
                    c += 2;
                }
            }
        }
        Spectral { grid: *grid, fwd, inv, hess_symbols: Arc::new(symbols), wave }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// In-place multidimensional FFT; the inverse is normalized.
    pub fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let size = self.grid.size();
        let fft = if inverse { &self.inv } else { &self.fwd };
        for axis in 0..self.grid.axes() {
            let stride = self.grid.stride(axis);
            if stride == 1 {
                data.par_chunks_mut(size * 256.min(data.len() / size)).for_each(|chunk| {
                    fft.process(chunk);
                });
                continue;
            }
            let block = size * stride;
            data.par_chunks_mut(block).for_each(|blk| {
                let mut buf = vec![Complex64::new(0.0, 0.0); block];
                for k in 0..size {
                    for r in 0..stride {
                        buf[r * size + k] = blk[k * stride + r];
                    }
                }
                fft.process(&mut buf);
                for k in 0..size {
                    for r in 0..stride {
                        blk[k * stride + r] = buf[r * size + k];
                    }
                }
            });
        }
        if inverse {
            let s = 1.0 / data.len() as f64;
            data.par_iter_mut().for_each(|z| *z *= s);
        }
    }

    /// Forward transform of a real field.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    /// Applies two real even symbols to one spectrum and returns both real outputs.
    fn apply_pair<F>(&self, spec: &[Complex64], sym: F, out: &mut [Complex64])
    where
        F: Fn(usize) -> Complex64 + Sync,
    {
        out.par_iter_mut().enumerate().for_each(|(p, o)| *o = spec[p] * sym(p));
        self.transform(out, true);
    }

    /// Packed complex Hessian components from a precomputed spectrum.
    pub fn hessian_from_spectrum(&self, spec: &[Complex64], out: &mut [f64]) {
        let n = self.grid.n();
        let nc = n * n;
        let len = self.grid.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let syms = &self.hess_symbols;
        let mut c = 0;
        while c < nc {
            if c + 1 < nc {
                let (s0, s1) = (&syms[c], &syms[c + 1]);
                self.apply_pair(spec, |p| Complex64::new(s0[p], s1[p]), &mut buf);
                out.par_chunks_mut(nc).zip(buf.par_iter()).for_each(|(o, z)| {
                    o[c] = z.re;
                    o[c + 1] = z.im;
                });
                c += 2;
            } else {
                let s0 = &syms[c];
                self.apply_pair(spec, |p| Complex64::new(s0[p], 0.0), &mut buf);
                out.par_chunks_mut(nc).zip(buf.par_iter()).for_each(|(o, z)| o[c] = z.re);
                c += 1;
            }
        }
    }

    /// Pointwise complex Hessian `∂ᵢ∂̄ⱼφ` of a sampled field.
    pub fn hessian(&self, phi: &ScalarField) -> MatrixField {
        let spec = self.forward_real(phi.values());
        let n = self.grid.n();
        let mut data = vec![0.0; self.grid.len() * n * n];
        self.hessian_from_spectrum(&spec, &mut data);
        MatrixField::from_packed(self.grid, data)
    }

    /// Real partial derivatives along every axis, ordered `x₁, y₁, …`.
    pub fn gradient(&self, phi: &ScalarField) -> Vec<ScalarField> {
        let spec = self.forward_real(phi.values());
        let axes = self.grid.axes();
        let len = self.grid.len();
        let grid = self.grid;
        let mut out: Vec<Vec<f64>> = vec![vec![0.0; len]; axes];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let mut mi_cache = vec![0usize; len * axes];
        mi_cache.par_chunks_mut(axes).enumerate().for_each(|(p, mi)| grid.multi_index(p, mi));
        let mut a = 0;
        while a < axes {
            let b = a + 1;
            let wave = &self.wave;
            let mi = &mi_cache;
            // symbol i·k_a + i·(i·k_b) packs ∂_a into the real part and ∂_b into the imaginary part
            self.apply_pair(
                &spec,
                |p| {
                    let ka = wave[mi[p * axes + a]];
                    let kb = if b < axes { wave[mi[p * axes + b]] } else { 0.0 };
                    Complex64::new(-kb, ka)
                },
                &mut buf,
            );
            for (p, z) in buf.iter().enumerate() {
                out[a][p] = z.re;
                if b < axes {
                    out[b][p] = z.im;
                }
            }
            a += 2;
        }
        out.into_iter().map(|v| ScalarField::new(grid, v).expect("finite derivatives")).collect()
    }

    /// Symbol of the constant-coefficient operator `v ↦ −Σ_c w_c D_c[v]`.
    pub fn operator_symbol(&self, weights: &[f64]) -> Vec<f64> {
        let syms = &self.hess_symbols;
        (0..self.grid.len())
            .into_par_iter()
            .map(|p| -weights.iter().enumerate().map(|(c, w)| w * syms[c][p]).sum::<f64>())
            .collect()
    }

    /// Solves `symbol · v̂ = r̂` on nonzero modes and sets the mean of `v` to `mean`.
    pub fn solve_symbol(&self, rhs: &[f64], symbol: &[f64], mean: f64, out: &mut [f64]) {
        let mut spec = self.forward_real(rhs);
        spec.par_iter_mut().enumerate().for_each(|(p, z)| {
            if p == 0 {
                *z = Complex64::new(mean * rhs.len() as f64, 0.0);
            } else if symbol[p].abs() > 0.0 {
                *z /= symbol[p];
            } else {
                *z = Complex64::new(0.0, 0.0);
            }
        });
        self.transform(&mut spec, true);
        out.par_iter_mut().zip(spec.par_iter()).for_each(|(o, z)| *o = z.re);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn roundtrip() {
        let g = TorusGrid::new(2, 8).unwrap();
        let sp = Spectral::new(&g);
        let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin() + x[3] * x[1]);
        let mut d = sp.forward_real(f.values());
        sp.transform(&mut d, true);
        for (a, b) in d.iter().zip(f.values()) {
            assert!((a.re - b).abs() < 1e-13 && a.im.abs() < 1e-13);
        }
    }

    #[test]
    fn hessian_of_cosine() {
        let g = TorusGrid::new(2, 8).unwrap();
        let sp = Spectral::new(&g);
        let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let h = sp.hessian(&f);
        for p in 0..g.len() {
            let m = h.point(p);
            let expect = -PI * PI * f.values()[p];
            assert!((m.get(0, 0).re - expect).abs() < 1e-12);
            assert!(m.get(1, 1).norm() < 1e-12);
            assert!(m.get(0, 1).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_sine() {
        let g = TorusGrid::new(2, 8).unwrap();
        let sp = Spectral::new(&g);
        let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[2]).sin() + (2.0 * PI * x[1]).cos());
        let grad = sp.gradient(&f);
        let mut x = vec![0.0; 4];
        for p in 0..g.len() {
            g.coords(p, &mut x);
            assert!(grad[0].values()[p].abs() < 1e-12);
            assert!((grad[1].values()[p] + 2.0 * PI * (2.0 * PI * x[1]).sin()).abs() < 1e-11);
            assert!((grad[2].values()[p] - 2.0 * PI * (2.0 * PI * x[2]).cos()).abs() < 1e-11);
            assert!(grad[3].values()[p].abs() < 1e-12);
        }
    }
}
