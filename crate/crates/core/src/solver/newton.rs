//! Damped Newton–Krylov iteration on the inverse-eigenvalue form.
//!
//! Unknowns are a mean-zero potential `φ` and the scalar `b`. Each step solves the
//! bordered system
//!
//! ```text
//! −Σ H_{ij̄}(x) ∂ᵢ∂̄ⱼδφ + R_b(x) δb = −R(x),     mean(δφ) = 0
//! ```
//!
//! by GMRES, right-preconditioned with the exact inverse of the same system with
//! grid-averaged coefficients (diagonal in Fourier space).

use std::sync::Arc;

use rayon::prelude::*;

use super::diagnostics::{diagnostics, Diagnostics};
use super::gmres::gmres;
use super::spec::{EquationSpec, SolverConfig, UnknownMode};
use crate::error::{Error, Result};
use crate::hermitian::HMat;
use crate::pointwise::{linearize_point, residual_volume_form, EquationParams};
use crate::symmetric::{binomial, elementary_sym};
use crate::torus::{ordered_dot, ordered_sum, MatrixField, ScalarField, Spectral};

/// Starting point of a solve.
#[derive(Debug, Clone)]
pub struct Guess {
    pub phi: ScalarField,
    pub b: f64,
}

/// A converged solve.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Mean-zero potential.
    pub phi: ScalarField,
    pub b: f64,
    pub t: f64,
    /// Sup-norm of the inverse-form residual.
    pub residual_sup: f64,
    /// Sup over points of `|volume-form residual| / S_n(λ)`.
    pub volume_residual_rel: f64,
    pub newton_iters: usize,
    pub gmres_iters: usize,
    /// `|b − expected_b|` when the spec carries a quadrature value.
    pub b_quadrature_gap: Option<f64>,
    /// Eigenvalues of `X` relative to `ω`, `n` per point.
    pub lambda: Arc<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl SolverState {
    /// `φ` normalized by `sup φ = 0`.
    pub fn phi_reported(&self) -> ScalarField {
        self.phi.sup_zero()
    }

    pub fn guess(&self) -> Guess {
        Guess { phi: self.phi.clone(), b: self.b }
    }
}

#[allow(clippy::large_enum_variant)]
enum MetricInverse {
    Constant(HMat),
    Field(Vec<HMat>),
}

impl MetricInverse {
    fn at(&self, p: usize) -> &HMat {
        match self {
            MetricInverse::Constant(m) => m,
            MetricInverse::Field(v) => &v[p],
        }
    }
}

/// Residual and Newton data at one iterate.
struct Evaluation {
    residual: Vec<f64>,
    /// Packed operator weights, `n²` per point.
    weights: Vec<f64>,
    /// `∂R/∂b`.
    rb: Vec<f64>,
    lambda: Vec<f64>,
    /// Points where `X` left the admissible set.
    bad: Vec<usize>,
}

impl Evaluation {
    fn sup(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    fn l2(&self) -> f64 {
        ordered_dot(&self.residual, &self.residual).sqrt()
    }
}

/// Fixed data of one equation on one grid.
pub(crate) struct Workspace<'a> {
    pub(crate) spec: &'a EquationSpec,
    pub(crate) sp: &'a Spectral,
    background: MatrixField,
    metric_linv: MetricInverse,
    binom: f64,
}

impl<'a> Workspace<'a> {
    pub(crate) fn new(spec: &'a EquationSpec, sp: &'a Spectral) -> Result<Self> {
        spec.validate(sp)?;
        let background = spec.background.sample(sp);
        let linv = |m: &HMat| -> Result<HMat> {
            Ok(m.cholesky().map_err(|_| Error::Domain("metric is not positive definite".into()))?.lower_inverse())
        };
        let metric_linv = if spec.omega.is_constant() {
            MetricInverse::Constant(linv(spec.omega.constant_part())?)
        } else {
            let w = spec.omega.sample(sp);
            MetricInverse::Field((0..w.grid().len()).map(|p| linv(&w.point(p))).collect::<Result<Vec<_>>>()?)
        };
        Ok(Workspace { spec, sp, background, metric_linv, binom: binomial(spec.n, spec.m as isize) })
    }

    pub(crate) fn metric_linv_at(&self, p: usize) -> &HMat {
        self.metric_linv.at(p)
    }

    /// Per-point parameters for the current `b`.
    #[inline]
    pub(crate) fn params(&self, p: usize, b: f64) -> EquationParams {
        let h = self.spec.coefficient.values()[p];
        let r = self.spec.source.values()[p];
        let (coefficient, source) = match self.spec.mode {
            UnknownMode::Additive => (h, b * r),
            UnknownMode::Multiplicative => (b.exp() * h, r),
        };
        EquationParams { n: self.spec.n, m: self.spec.m, coefficient, source }
    }

    /// Effective coefficient field entering the cone condition.
    pub(crate) fn effective_coefficient(&self, b: f64) -> Vec<f64> {
        let scale = match self.spec.mode {
            UnknownMode::Additive => 1.0,
            UnknownMode::Multiplicative => b.exp(),
        };
        self.spec.coefficient.values().iter().map(|h| scale * h).collect()
    }

    /// `X = background + i∂∂̄φ`.
    pub(crate) fn form(&self, phi: &ScalarField) -> MatrixField {
        let mut x = self.sp.hessian(phi);
        x.add_scaled(1.0, &self.background);
        x
    }

    fn evaluate(&self, phi: &ScalarField, b: f64, admissibility_tol: f64) -> Evaluation {
        let n = self.spec.n;
        let nc = n * n;
        let len = phi.grid().len();
        let x = self.form(phi);
        let mut residual = vec![0.0; len];
        let mut weights = vec![0.0; len * nc];
        let mut rb = vec![0.0; len];
        let mut lambda = vec![0.0; len * n];
        let ok: Vec<bool> = residual
            .par_iter_mut()
            .zip(weights.par_chunks_mut(nc))
            .zip(rb.par_iter_mut())
            .zip(lambda.par_chunks_mut(n))
            .enumerate()
            .map(|(p, (((r, w), d), l))| {
                let params = self.params(p, b);
                let Some(lin) = linearize_point(&x.point(p), self.metric_linv.at(p), &params) else {
                    return false;
                };
                l.copy_from_slice(&lin.lambda);
                *r = lin.residual;
                *d = match self.spec.mode {
                    UnknownMode::Additive => self.spec.source.values()[p] * lin.d_source,
                    UnknownMode::Multiplicative => params.coefficient / self.binom * lin.d_scaled_coefficient,
                };
                let h = &lin.coefficient_matrix;
                for i in 0..n {
                    w[i] = h.get(i, i).re;
                }
                let mut c = n;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let z = h.get(i, j);
                        w[c] = 2.0 * z.re;
                        w[c + 1] = -2.0 * z.im;
                        c += 2;
                    }
                }
                lin.lambda.iter().all(|&v| v > admissibility_tol)
            })
            .collect();
        let bad = ok.iter().enumerate().filter(|(_, &o)| !o).map(|(p, _)| p).collect();
        Evaluation { residual, weights, rb, lambda, bad }
    }

    /// Linear operator `[δφ; δb] ↦ [−Σ w_c D_c δφ + R_b δb; mean δφ]`.
    fn apply_jacobian(&self, eval: &Evaluation, v: &[f64], out: &mut [f64]) {
        let len = v.len() - 1;
        let nc = self.spec.n * self.spec.n;
        let db = v[len];
        let spec_v = self.sp.forward_real(&v[..len]);
        let mut d = vec![0.0; len * nc];
        self.sp.hessian_from_spectrum(&spec_v, &mut d);
        out[..len]
            .par_iter_mut()
            .zip(d.par_chunks(nc))
            .zip(eval.weights.par_chunks(nc))
            .zip(eval.rb.par_iter())
            .for_each(|(((o, dc), wc), rb)| {
                let s: f64 = dc.iter().zip(wc).map(|(a, b)| a * b).sum();
                *o = -s + rb * db;
            });
        out[len] = spec_v[0].re / len as f64;
    }
}

/// Exact inverse of the constant-coefficient bordered system.
struct Preconditioner {
    symbol: Vec<f64>,
    mean_rb: f64,
}

impl Preconditioner {
    fn new(ws: &Workspace<'_>, eval: &Evaluation) -> Result<Self> {
        let nc = ws.spec.n * ws.spec.n;
        let len = eval.residual.len();
        let mut mean_w = vec![0.0; nc];
        for (c, m) in mean_w.iter_mut().enumerate() {
            *m = crate::torus::ordered_sum_by(len, |p| eval.weights[p * nc + c]) / len as f64;
        }
        let mean_rb = ordered_sum(&eval.rb) / len as f64;
        if !(mean_rb.abs() > 0.0) {
            return Err(Error::Input("the scalar unknown does not enter the equation (∂R/∂b ≡ 0)".into()));
        }
        Ok(Preconditioner { symbol: ws.sp.operator_symbol(&mean_w), mean_rb })
    }

    fn apply(&self, sp: &Spectral, v: &[f64], out: &mut [f64]) {
        let len = v.len() - 1;
        let mean_r = ordered_sum(&v[..len]) / len as f64;
        let db = mean_r / self.mean_rb;
        let shifted: Vec<f64> = v[..len].iter().map(|r| r - self.mean_rb * db).collect();
        sp.solve_symbol(&shifted, &self.symbol, v[len], &mut out[..len]);
        out[len] = db;
    }
}

fn apply_step(phi: &ScalarField, b: f64, step: &[f64], alpha: f64) -> (ScalarField, f64) {
    let len = step.len() - 1;
    let mut values: Vec<f64> = phi.values().iter().zip(&step[..len]).map(|(p, s)| p + alpha * s).collect();
    let mean = ordered_sum(&values) / len as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    (ScalarField::new(*phi.grid(), values).expect("finite step"), b + alpha * step[len])
}

/// Whether `background + i∂∂̄φ` is admissible at every grid point.
pub fn is_admissible(spec: &EquationSpec, phi: &ScalarField, sp: &Spectral, tol: f64) -> Result<bool> {
    let ws = Workspace::new(spec, sp)?;
    Ok(ws.evaluate(phi, 0.0, tol).bad.is_empty())
}

/// Solves one member of the family from `init`.
pub fn newton_solve(spec: &EquationSpec, init: &Guess, config: &SolverConfig, sp: &Spectral) -> Result<SolverState> {
    let ws = Workspace::new(spec, sp)?;
    let mut phi = init.phi.mean_zero();
    let mut b = init.b;
    let mut eval = ws.evaluate(&phi, b, config.admissibility_tol);
    if !eval.bad.is_empty() {
        return Err(Error::ConeExit { points: eval.bad });
    }
    let len = phi.grid().len();
    let mut gmres_total = 0;
    for iter in 0..=config.max_newton {
        let rsup = eval.sup();
        if rsup <= config.tol {
            return finish(&ws, phi, b, eval, iter, gmres_total);
        }
        if iter == config.max_newton {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: rsup,
                reason: "Newton iteration limit reached".into(),
            });
        }
        let pre = Preconditioner::new(&ws, &eval)?;
        let mut rhs: Vec<f64> = eval.residual.iter().map(|r| -r).collect();
        rhs.push(0.0);
        let mut step = vec![0.0; len + 1];
        let eta = (0.1 * rsup).clamp(1e-9, 1e-3);
        let out = gmres(
            |v, o| ws.apply_jacobian(&eval, v, o),
            |v, o| pre.apply(sp, v, o),
            &rhs,
            &mut step,
            eta,
            config.gmres_restart,
            config.gmres_max_iters,
        );
        gmres_total += out.iterations;
        let l2 = eval.l2();
        let mut alpha = 1.0;
        let mut last_bad: Vec<usize> = Vec::new();
        loop {
            if alpha < config.damping_floor {
                if !last_bad.is_empty() {
                    return Err(Error::ConeExit { points: last_bad });
                }
                return Err(Error::NonConvergence {
                    iterations: iter,
                    residual: rsup,
                    reason: format!("damping floor reached (GMRES relative residual {:.2e})", out.relative_residual),
                });
            }
            let (phi_t, b_t) = apply_step(&phi, b, &step, alpha);
            let trial = ws.evaluate(&phi_t, b_t, config.admissibility_tol);
            if trial.bad.is_empty() && trial.l2() < l2 {
                phi = phi_t;
                b = b_t;
                eval = trial;
                break;
            }
            last_bad = trial.bad;
            alpha *= 0.5;
        }
    }
    unreachable!("the loop returns on its last iteration")
}

fn finish(
    ws: &Workspace<'_>,
    phi: ScalarField,
    b: f64,
    eval: Evaluation,
    newton_iters: usize,
    gmres_iters: usize,
) -> Result<SolverState> {
    let spec = ws.spec;
    let n = spec.n;
    let residual_sup = eval.sup();
    let volume_residual_rel = eval
        .lambda
        .par_chunks(n)
        .enumerate()
        .map(|(p, l)| {
            let params = ws.params(p, b);
            residual_volume_form(l, &params).abs() / elementary_sym(n as isize, l)
        })
        .reduce(|| 0.0, f64::max);
    let coefficient = ws.effective_coefficient(b);
    let diagnostics = diagnostics(ws, &phi, &eval.lambda, &coefficient)?;
    Ok(SolverState {
        b_quadrature_gap: spec.expected_b.map(|e| (b - e).abs()),
        phi,
        b,
        t: spec.t,
        residual_sup,
        volume_residual_rel,
        newton_iters,
        gmres_iters,
        lambda: Arc::new(eval.lambda),
        diagnostics,
    })
}
