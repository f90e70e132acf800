//! The fake boundary case `χⁿ_φ = e^b g χᵐ_φ∧ω^{n−m}` with `g ≥ c`, `g ≢ c`:
//! the analytic bound `b ≤ b′` and the two-stage continuity method through `g₂`.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::HMat;
use crate::pointwise::cone_margin;
use crate::solver::{newton_solve, EquationSpec, Guess, SolverConfig, SolverState, UnknownMode};
use crate::symmetric::{binomial, elementary_sym};
use crate::torus::quadrature::{compute_c, integrate_mixed, volume_density};
use crate::torus::{ordered_sum_by, relative_eigenvalues_of, HermitianFormField, ScalarField, Spectral};

/// `θ₀ = [(Λ−c)/2 · c^{m/(n−m)} ∫_{g ≥ (Λ+c)/2} ωⁿ] / [c ∫χᵐ∧ω^{n−m}]`.
pub fn compute_theta0(
    sp: &Spectral,
    g: &ScalarField,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    c: f64,
    lambda_max: f64,
    m: usize,
) -> Result<f64> {
    let n = chi.grid().n();
    if !(lambda_max > c) {
        return Err(Error::Domain(format!("need Λ > c, got Λ = {lambda_max}, c = {c}")));
    }
    let level = 0.5 * (lambda_max + c);
    let rho = volume_density(&omega.sample(sp))?;
    let gv = g.values();
    let sup_mass = ordered_sum_by(gv.len(), |p| if gv[p] >= level { rho[p] } else { 0.0 }) * g.grid().cell_volume();
    if sup_mass == 0.0 {
        return Err(Error::Domain(format!("superlevel set {{g ≥ {level}}} is empty on the grid")));
    }
    let mixed = integrate_mixed(sp, chi, m, omega)?;
    let expo = m as f64 / (n - m) as f64;
    Ok(0.5 * (lambda_max - c) * c.powf(expo) * sup_mass / (c * mixed))
}

/// The root `b′ < 0` of `1 = eˣ + θ₀ e^{nx/(n−m)}`.
pub fn solve_b_prime(theta0: f64, n: usize, m: usize) -> Result<f64> {
    if !(theta0 > 0.0) {
        return Err(Error::Domain(format!("θ₀ must be positive, got {theta0}")));
    }
    if m >= n {
        return Err(Error::Domain(format!("need m < n, got n = {n}, m = {m}")));
    }
    let p = n as f64 / (n - m) as f64;
    let f = |x: f64| x.exp() + theta0 * (p * x).exp() - 1.0;
    // f is increasing with f(0) = θ₀ > 0; the root lies in [−ln(1+θ₀)·…, 0)
    let mut lo = -1.0;
    while f(lo) > 0.0 {
        lo *= 2.0;
    }
    let mut hi = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(if f(hi).abs() < f(lo).abs() { hi } else { lo })
}

/// `g₁ = C(n,m) S_n(μ)/S_m(μ)`, i.e. `χⁿ = g₁ χᵐ∧ω^{n−m}`.
pub fn g1_field(sp: &Spectral, chi: &HermitianFormField, omega: &HermitianFormField, m: usize) -> Result<ScalarField> {
    let grid = *chi.grid();
    let n = grid.n();
    let mu = relative_eigenvalues_of(sp, chi, omega)?;
    if let Some(p) = mu.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("χ is not positive definite at grid point {}", p / n)));
    }
    let norm = binomial(n, m as isize);
    let values =
        mu.par_chunks(n).map(|l| norm * elementary_sym(n as isize, l) / elementary_sym(m as isize, l)).collect();
    ScalarField::new(grid, values)
}

/// `max(a, b) < smax_κ(a, b) ≤ max(a, b) + ln2/κ`.
fn smooth_max(a: f64, b: f64, kappa: f64) -> f64 {
    a.max(b) + (-kappa * (a - b).abs()).exp().ln_1p() / kappa
}

/// `g₂ = smax_κ(e^{b′}g, g₁) + δ₁/2`, doubling `κ` from `1/δ₁` until
/// `max{e^{b′}g, g₁} < g₂ < max{e^{b′}g, g₁} + δ₁` at every point.
pub fn g2_field(g: &ScalarField, g1: &ScalarField, b_prime: f64, delta1: f64) -> Result<(ScalarField, f64)> {
    g.check_grid(g1)?;
    if !(delta1 > 0.0) {
        return Err(Error::Domain(format!("δ₁ must be positive, got {delta1}")));
    }
    let scale = b_prime.exp();
    let mut kappa = 1.0 / delta1;
    for _ in 0..64 {
        let g2 = g.zip_map(g1, |a, b| smooth_max(scale * a, b, kappa) + 0.5 * delta1)?;
        if min_band_slack(g, g1, &g2, b_prime, delta1)? > 0.0 {
            return Ok((g2, kappa));
        }
        kappa *= 2.0;
    }
    Err(Error::Construction("g₂ leaves its band at every tried sharpness".into()))
}

/// `min_x min(g₂ − M, M + δ₁ − g₂)` with `M = max{e^{b′}g, g₁}`.
fn min_band_slack(g: &ScalarField, g1: &ScalarField, g2: &ScalarField, b_prime: f64, delta1: f64) -> Result<f64> {
    let scale = b_prime.exp();
    let slack = g.zip_map(g1, |a, b| (scale * a).max(b))?.zip_map(g2, |mx, v| (v - mx).min(mx + delta1 - v))?;
    Ok(slack.min())
}

/// `min_x cone_margin(μ_χ, h(x), m)` for a pointwise coefficient `h`.
pub fn min_cone_margin_with(
    sp: &Spectral,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    h: &ScalarField,
    m: usize,
) -> Result<f64> {
    let n = chi.grid().n();
    let mu = relative_eigenvalues_of(sp, chi, omega)?;
    let hv = h.values();
    Ok(mu.par_chunks(n).enumerate().map(|(p, l)| cone_margin(l, hv[p], m)).reduce(|| f64::INFINITY, f64::min))
}

/// Data of one fake boundary problem, after the rescale to `min g = c`.
#[derive(Debug, Clone)]
pub struct FakeBoundaryInstance {
    pub chi: HermitianFormField,
    pub omega: HermitianFormField,
    pub m: usize,
    pub c: f64,
    /// `g` with `min g = c`.
    pub g: ScalarField,
    /// Factor applied to the input `g` (`c/λ` when `min g = λ > c`, else 1).
    pub rescale: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Zero when `g ≡ c`.
    pub theta0: f64,
    pub b_prime: f64,
    pub delta1: f64,
    pub g1: ScalarField,
    pub g2: ScalarField,
    pub kappa: f64,
    /// `min cone_margin(μ_χ, g₂ + δ₁, m)`, positive by construction.
    pub cone_margin: f64,
}

/// Relative tolerance under which `g` counts as constant.
const CONSTANT_G_TOL: f64 = 1e-12;

impl FakeBoundaryInstance {
    /// Builds `θ₀, b′, g₁, g₂` from `g ≥ c` (or `min g > c`, rescaled first).
    pub fn new(
        sp: &Spectral,
        chi: HermitianFormField,
        omega: HermitianFormField,
        m: usize,
        g_raw: &ScalarField,
        delta1: f64,
    ) -> Result<Self> {
        let n = chi.grid().n();
        if m >= n {
            return Err(Error::Input(format!("need m < n, got n = {n}, m = {m}")));
        }
        let c = compute_c(sp, &chi, &omega, m)?;
        let g_min = g_raw.min();
        if g_min < c * (1.0 - CONSTANT_G_TOL) {
            return Err(Error::Domain(format!("need g ≥ c = {c}, got min g = {g_min}")));
        }
        let rescale = if g_min > c * (1.0 + CONSTANT_G_TOL) { c / g_min } else { 1.0 };
        let g = g_raw.scale(rescale);
        let lambda_max = g.max();
        let lambda_min = g.min();
        let (theta0, b_prime) = if lambda_max > c * (1.0 + CONSTANT_G_TOL) {
            let theta0 = compute_theta0(sp, &g, &chi, &omega, c, lambda_max, m)?;
            (theta0, solve_b_prime(theta0, n, m)?)
        } else {
            (0.0, 0.0)
        };
        let g1 = g1_field(sp, &chi, &omega, m)?;
        let (g2, kappa) = g2_field(&g, &g1, b_prime, delta1)?;
        let cone_margin = min_cone_margin_with(sp, &chi, &omega, &g2.map(|v| v + delta1), m)?;
        if !(cone_margin > 0.0) {
            return Err(Error::Domain(format!(
                "δ₁ = {delta1} too large: strict cone condition for g₂ + δ₁ fails (margin {cone_margin:.3e})"
            )));
        }
        Ok(FakeBoundaryInstance {
            chi,
            omega,
            m,
            c,
            g,
            rescale,
            lambda_max,
            lambda_min,
            theta0,
            b_prime,
            delta1,
            g1,
            g2,
            kappa,
            cone_margin,
        })
    }

    /// `χ = I + 0.01·i∂∂̄cos(2πy₂)`, `ω = I`, `g = c(1 + a(1 − cos 2πx₁))`.
    pub fn sample(sp: &Spectral, m: usize, a: f64, delta1: f64) -> Result<Self> {
        let grid = *sp.grid();
        let n = grid.n();
        let axis = 2 * n - 1;
        let u = ScalarField::from_fn(grid, |x| 0.01 * (2.0 * PI * x[axis]).cos());
        let chi = HermitianFormField::new(grid, HMat::identity(n), Some(u))?;
        let omega = HermitianFormField::constant(grid, HMat::identity(n))?;
        let c = compute_c(sp, &chi, &omega, m)?;
        let g = ScalarField::from_fn(grid, |x| c * (1.0 + a * (1.0 - (2.0 * PI * x[0]).cos())));
        Self::new(sp, chi, omega, m, &g, delta1)
    }

    fn spec(&self, coefficient: ScalarField, t: f64) -> EquationSpec {
        let grid = *self.chi.grid();
        EquationSpec {
            n: grid.n(),
            m: self.m,
            background: self.chi.clone(),
            omega: self.omega.clone(),
            coefficient,
            source: ScalarField::zeros(grid),
            mode: UnknownMode::Multiplicative,
            t,
            expected_b: None,
            watch_mask: None,
        }
    }

    /// `e^{t b′} g^t g₂^{1−t}`.
    pub fn path_coefficient(&self, t: f64) -> Result<ScalarField> {
        let shift = (t * self.b_prime).exp();
        self.g.zip_map(&self.g2, |g, g2| shift * g.powf(t) * g2.powf(1.0 - t))
    }
}

/// One accepted stage-2 step.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub t: f64,
    pub b_t: f64,
    pub residual: f64,
    /// `min_x [g₂ − e^{b_t+tb′} g^t g₂^{1−t}]`.
    pub min_band_slack: f64,
    pub min_cone_margin: f64,
}

#[derive(Debug, Clone)]
pub struct TwoStageResult {
    pub stage1: SolverState,
    pub records: Vec<StageRecord>,
    /// Solution at `t = 1`; its `b` is `b₁`.
    pub last: SolverState,
    /// `b = b₁ + b′`, the constant of `χⁿ_φ = e^b g χᵐ_φ∧ω^{n−m}`.
    pub b: f64,
    /// `min_x [S_n(λ) − (e^b min g)^{n/(n−m)}]`.
    pub volume_bound_gap: f64,
}

/// Uniform stage-2 steps before adaptive halving.
pub const STAGE2_STEPS: usize = 16;
/// Halvings allowed per stage-2 step after a failed solve.
const MAX_HALVINGS: usize = 6;

/// Stage 1 solves with coefficient `g₂`; stage 2 moves `t: 0 → 1` along
/// `e^{b_t+tb′} g^t g₂^{1−t}` with unknown `b_t`.
pub fn two_stage_solve(inst: &FakeBoundaryInstance, sp: &Spectral, config: &SolverConfig) -> Result<TwoStageResult> {
    let grid = *inst.chi.grid();
    let n = grid.n();
    let stage_err = |stage: &str, t: f64, e: Error| Error::Stage { stage: stage.into(), t, source: Box::new(e) };
    let stage1 =
        newton_solve(&inst.spec(inst.g2.clone(), 0.0), &Guess { phi: ScalarField::zeros(grid), b: 0.0 }, config, sp)
            .map_err(|e| stage_err("stage 1", 0.0, e))?;
    if !(stage1.b < 0.0) {
        return Err(stage_err("stage 1", 0.0, Error::Construction(format!("expected b̃ < 0, got {}", stage1.b))));
    }
    let mut records = Vec::new();
    let mut current = stage1.clone();
    let mut t = 0.0;
    let h = 1.0 / STAGE2_STEPS as f64;
    while t < 1.0 {
        let mut step = h.min(1.0 - t);
        let mut halvings = 0;
        let (next_t, state) = loop {
            let next_t = if t + step >= 1.0 - 1e-12 { 1.0 } else { t + step };
            let coefficient = inst.path_coefficient(next_t)?;
            match newton_solve(&inst.spec(coefficient, next_t), &current.guess(), config, sp) {
                Ok(s) => break (next_t, s),
                Err(e) if halvings >= MAX_HALVINGS => return Err(stage_err("stage 2", next_t, e)),
                Err(_) => {
                    step *= 0.5;
                    halvings += 1;
                }
            }
        };
        let coefficient = inst.path_coefficient(next_t)?;
        let scale = state.b.exp();
        let slack = inst.g2.zip_map(&coefficient, |g2, h| g2 - scale * h)?.min();
        // with g ≡ c the path ends at b₁ = 0 instead of strictly below
        let b_ok = state.b < 0.0 || (inst.theta0 == 0.0 && state.b <= config.tol.sqrt());
        if !b_ok || !(slack > 0.0) {
            return Err(stage_err(
                "stage 2",
                next_t,
                Error::Construction(format!(
                    "path left the band: b_t = {:.3e}, min(g₂ − e^(b_t+tb′)g^t g₂^(1−t)) = {slack:.3e}",
                    state.b
                )),
            ));
        }
        records.push(StageRecord {
            t: next_t,
            b_t: state.b,
            residual: state.residual_sup,
            min_band_slack: slack,
            min_cone_margin: state.diagnostics.min_margin,
        });
        t = next_t;
        current = state;
    }
    let b = current.b + inst.b_prime;
    let bound = (b.exp() * inst.lambda_min).powf(n as f64 / (n - inst.m) as f64);
    let volume_bound_gap =
        current.lambda.par_chunks(n).map(|l| elementary_sym(n as isize, l) - bound).reduce(|| f64::INFINITY, f64::min);
    Ok(TwoStageResult { stage1, records, last: current, b, volume_bound_gap })
}

/// Stage-2 CSV: `t, b_t, residual, min_band_slack, min_cone_margin`.
pub fn write_stage_csv(path: &Path, records: &[StageRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
