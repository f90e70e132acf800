use std::path::Path;

use serde::Serialize;

use super::newton::{is_admissible, newton_solve, Guess, SolverState};
use super::spec::{EquationSpec, SolverConfig};
use crate::error::{Error, Result};
use crate::torus::{ScalarField, Spectral};

/// `1, ½, ¼, …, 2^{−(steps−1)}`.
pub fn geometric_schedule(steps: usize) -> Vec<f64> {
    (0..steps).map(|k| 0.5f64.powi(k as i32)).collect()
}

/// A continuation run; `failure` is set when the path stopped early.
#[derive(Debug)]
pub struct PathResult {
    pub states: Vec<SolverState>,
    pub failure: Option<(f64, Error)>,
}

impl PathResult {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last(&self) -> Option<&SolverState> {
        self.states.last()
    }
}

/// Solves along a strictly decreasing schedule, warm-starting each member.
///
/// The previous potential is shrunk toward zero when it is not admissible for the
/// new background (the background decreases with `t`).
pub fn continuation_path<F>(family: F, schedule: &[f64], config: &SolverConfig, sp: &Spectral) -> Result<PathResult>
where
    F: Fn(f64) -> Result<EquationSpec>,
{
    if schedule.is_empty() {
        return Err(Error::Input("empty t schedule".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) || schedule.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::Input("t schedule must be strictly decreasing within (0, 1]".into()));
    }
    let mut states: Vec<SolverState> = Vec::new();
    for &t in schedule {
        let spec = match family(t) {
            Ok(s) => s,
            Err(e) => return Ok(PathResult { states, failure: Some((t, e)) }),
        };
        let guess = match states.last() {
            None => Guess { phi: ScalarField::zeros(*spec.background.grid()), b: spec.expected_b.unwrap_or(0.0) },
            Some(prev) => warm_start(&spec, prev, sp, config)?,
        };
        match newton_solve(&spec, &guess, config, sp) {
            Ok(s) => states.push(s),
            Err(e) => {
                return Ok(PathResult {
                    states,
                    failure: Some((t, Error::Stage { stage: "continuation".into(), t, source: Box::new(e) })),
                })
            }
        }
    }
    Ok(PathResult { states, failure: None })
}

fn warm_start(spec: &EquationSpec, prev: &SolverState, sp: &Spectral, config: &SolverConfig) -> Result<Guess> {
    let mut theta = 1.0;
    for _ in 0..12 {
        let phi = prev.phi.scale(theta);
        if is_admissible(spec, &phi, sp, config.admissibility_tol)? {
            return Ok(Guess { phi, b: prev.b });
        }
        theta *= 0.5;
    }
    Ok(Guess { phi: ScalarField::zeros(*prev.phi.grid()), b: prev.b })
}

#[derive(Debug, Serialize)]
struct PathRow {
    t: f64,
    b: f64,
    residual_sup: f64,
    sup_phi: f64,
    sup_grad: f64,
    sup_w: f64,
    min_eig: f64,
    min_margin: f64,
    newton_iters: usize,
}

/// Per-path CSV, one row per state.
pub fn write_path_csv(path: &Path, states: &[SolverState]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in states {
        let d = &s.diagnostics;
        w.serialize(PathRow {
            t: s.t,
            b: s.b,
            residual_sup: s.residual_sup,
            sup_phi: d.sup_phi,
            sup_grad: d.sup_grad,
            sup_w: d.sup_w,
            min_eig: d.min_eig,
            min_margin: d.min_margin,
            newton_iters: s.newton_iters,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct WRow {
    t: f64,
    sup_w: f64,
    sup_w_watch: Option<f64>,
    w_slope: Option<f64>,
    grad_slope: Option<f64>,
}

/// `w`-versus-`t` table with the fitted exponential-shape slopes.
pub fn write_w_table(path: &Path, states: &[SolverState]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in states {
        let d = &s.diagnostics;
        w.serialize(WRow {
            t: s.t,
            sup_w: d.sup_w,
            sup_w_watch: d.sup_w_watch,
            w_slope: d.w_slope,
            grad_slope: d.grad_slope,
        })?;
    }
    w.flush()?;
    Ok(())
}
