//! Flat `key = value` experiment configuration (TOML syntax, no tables).
//!
//! Every key has a default, so an empty file is a valid configuration; unknown
//! keys are rejected to catch typos.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{geometric_schedule, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    /// `χ = chi_scale·ω + chi_amplitude·i∂∂̄(chi_potential)`, `χ̃ = eps·ω + chi_tilde_amplitude·i∂∂̄(chi_tilde_potential)`.
    Uniform,
    /// Exact solution `phi_star` at parameter `t`.
    Manufactured,
    /// Boundary-tuned `χ` with a degenerate calibrated `χ̃`.
    BoundaryDegenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub complex_dim: usize,
    #[serde(rename = "grid_N")]
    pub grid_n: usize,
    pub m: usize,
    pub instance: InstanceKind,
    pub eps: f64,
    pub chi_scale: f64,
    pub chi_potential: String,
    pub chi_amplitude: f64,
    pub chi_tilde_potential: String,
    pub chi_tilde_amplitude: f64,
    /// Overrides the cohomological `c` in `check-cone`.
    pub c: Option<f64>,
    /// Density (normalized before use).
    pub f: String,
    /// Perturbed density for `stability`; may use the variables `amp` and `f1`.
    pub f2: String,
    pub amplitudes: Vec<f64>,
    pub q: f64,
    /// Largest accepted max/min ratio of implied stability constants.
    pub stability_band: f64,
    pub uniqueness: bool,
    pub uniqueness_tol: f64,
    pub phi_star: String,
    pub t: f64,
    /// Explicit schedule; otherwise `1, ½, …` with `t_steps` entries.
    pub t_schedule: Option<Vec<f64>>,
    pub t_steps: usize,
    pub tol: f64,
    pub max_newton: usize,
    pub gmres_restart: usize,
    pub gmres_max_iters: usize,
    /// `|min margin| ≤ cone_tol` classifies as boundary.
    pub cone_tol: f64,
    /// Boundedness factor for `sup|φ_t|` along a path.
    pub growth_factor: f64,
    pub volume_tol: f64,
    pub b_tol: f64,
    /// Fake boundary sample `g = c(1 + fb_amplitude(1 − cos 2πx1))`.
    pub fb_amplitude: f64,
    pub delta1: f64,
    pub fb_residual_tol: f64,
    pub dump_fields: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            complex_dim: 2,
            grid_n: 16,
            m: 1,
            instance: InstanceKind::Uniform,
            eps: 0.1,
            chi_scale: 1.0,
            chi_potential: "0".into(),
            chi_amplitude: 1.0,
            chi_tilde_potential: "0".into(),
            chi_tilde_amplitude: 1.0,
            c: None,
            f: "1".into(),
            f2: "f1*(1 + amp*sin(2*PI*x1))".into(),
            amplitudes: vec![0.1, 0.01, 0.001],
            q: 2.0,
            stability_band: 10.0,
            uniqueness: false,
            uniqueness_tol: 1e-4,
            phi_star: "0.1*sin(2*PI*x1)*cos(2*PI*y2)".into(),
            t: 0.5,
            t_schedule: None,
            t_steps: 8,
            tol: 1e-10,
            max_newton: 60,
            gmres_restart: 40,
            gmres_max_iters: 600,
            cone_tol: 1e-8,
            growth_factor: 1.5,
            volume_tol: 1e-6,
            b_tol: 1e-9,
            fb_amplitude: 0.5,
            delta1: 0.05,
            fb_residual_tol: 1e-8,
            dump_fields: true,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Input(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Input(msg));
        if !(2..=crate::hermitian::MAX_DIM).contains(&self.complex_dim) {
            return bad(format!("complex_dim must be in 2..={}", crate::hermitian::MAX_DIM));
        }
        if !self.grid_n.is_power_of_two() || self.grid_n < 4 {
            return bad(format!("grid_N must be a power of two >= 4, got {}", self.grid_n));
        }
        if self.m >= self.complex_dim {
            return bad(format!("need 0 <= m < complex_dim, got m = {}", self.m));
        }
        if let Some(s) = &self.t_schedule {
            if s.is_empty() || s.windows(2).any(|w| !(w[1] < w[0])) || s.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
                return bad("t_schedule must be nonempty, strictly decreasing, within (0, 1]".into());
            }
        } else if self.t_steps == 0 {
            return bad("t_steps must be positive".into());
        }
        if !(self.t >= 0.0) {
            return bad(format!("t must be >= 0, got {}", self.t));
        }
        if !(self.q > 1.0) {
            return bad(format!("q must exceed 1, got {}", self.q));
        }
        if self.amplitudes.is_empty() {
            return bad("amplitudes must be nonempty".into());
        }
        for (name, v) in [
            ("tol", self.tol),
            ("cone_tol", self.cone_tol),
            ("volume_tol", self.volume_tol),
            ("b_tol", self.b_tol),
            ("delta1", self.delta1),
            ("fb_residual_tol", self.fb_residual_tol),
            ("uniqueness_tol", self.uniqueness_tol),
            ("stability_band", self.stability_band),
            ("growth_factor", self.growth_factor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.eps >= 0.0) || !(self.chi_scale > 0.0) || !(self.fb_amplitude >= 0.0) {
            return bad("eps and fb_amplitude must be >= 0, chi_scale > 0".into());
        }
        if self.max_newton == 0 || self.gmres_restart == 0 || self.gmres_max_iters == 0 {
            return bad("iteration limits must be positive".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> Vec<f64> {
        self.t_schedule.clone().unwrap_or_else(|| geometric_schedule(self.t_steps))
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_newton: self.max_newton,
            gmres_restart: self.gmres_restart,
            gmres_max_iters: self.gmres_max_iters,
            ..SolverConfig::default()
        }
    }
}
