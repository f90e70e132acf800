//! The subcommands. Each fills a [`Summary`] and writes its artifacts under `out`.

use std::f64::consts::PI;
use std::path::Path;

use super::config::{ExperimentConfig, InstanceKind};
use super::expr::FieldExpr;
use super::summary::{Relation, Status, Summary};
use crate::error::{Error, Result};
use crate::fake_boundary::{two_stage_solve, write_stage_csv, FakeBoundaryInstance};
use crate::hermitian::HMat;
use crate::selftest;
use crate::solver::family::{boundary_degenerate_instance, manufactured_instance};
use crate::solver::path::{write_path_csv, write_w_table};
use crate::solver::{
    continuation_path, newton_solve, richardson_limit, stability_compare, uniqueness_gap, volume_lower_bound_check,
    Guess, Instance, SolverState,
};
use crate::torus::dump::FieldDump;
use crate::torus::instances::{
    canonical_boundary_shape, margin_field, potential_family, tune_to_boundary, BoundaryTuning,
};
use crate::torus::quadrature::{compute_c, normalize_density, volume_density};
use crate::torus::{HermitianFormField, ScalarField, Spectral, TorusGrid};

/// Failure of one named stage of a command.
pub struct StageFailure {
    pub stage: String,
    pub error: Error,
}

type Step<T> = std::result::Result<T, StageFailure>;

trait StageExt<T> {
    fn stage(self, name: &str) -> Step<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, name: &str) -> Step<T> {
        self.map_err(|error| {
            let stage = match &error {
                Error::Stage { stage, t, .. } => format!("{name}: {stage} at t = {t}"),
                _ => name.to_string(),
            };
            StageFailure { stage, error }
        })
    }
}

/// Runs `body`, recording a stage failure in the summary instead of propagating it.
pub fn guarded(summary: &mut Summary, body: impl FnOnce(&mut Summary) -> Step<()>) {
    if let Err(f) = body(summary) {
        summary.fail(&f.stage, f.error);
    }
}

fn grid_of(cfg: &ExperimentConfig) -> Result<TorusGrid> {
    TorusGrid::new(cfg.complex_dim, cfg.grid_n)
}

fn field(cfg: &ExperimentConfig, grid: TorusGrid, text: &str) -> Result<ScalarField> {
    FieldExpr::parse(text, cfg.complex_dim, &[])?.sample(grid, &[])
}

/// `scale·I + amplitude·i∂∂̄(potential)`; the potential is dropped when it is `0`.
fn form(
    cfg: &ExperimentConfig,
    grid: TorusGrid,
    scale: f64,
    potential: &str,
    amplitude: f64,
) -> Result<HermitianFormField> {
    let u = field(cfg, grid, potential)?;
    let u = (u.sup_abs() > 0.0 && amplitude != 0.0).then(|| u.scale(amplitude));
    HermitianFormField::new(grid, HMat::scaled_identity(cfg.complex_dim, scale), u)
}

/// Builds the configured family with density `f` (normalized).
pub fn build_instance(cfg: &ExperimentConfig, sp: &Spectral) -> Result<Instance> {
    let grid = *sp.grid();
    let f_raw = field(cfg, grid, &cfg.f)?;
    match cfg.instance {
        InstanceKind::Uniform => {
            let omega = HermitianFormField::constant(grid, HMat::identity(cfg.complex_dim))?;
            let chi = form(cfg, grid, cfg.chi_scale, &cfg.chi_potential, cfg.chi_amplitude)?;
            let chi_tilde = form(cfg, grid, cfg.eps, &cfg.chi_tilde_potential, cfg.chi_tilde_amplitude)?;
            let c = compute_c(sp, &chi, &omega, cfg.m)?;
            let f = normalize_density(sp, &f_raw, &omega)?;
            Ok(Instance {
                name: "uniform".into(),
                m: cfg.m,
                chi,
                chi_tilde,
                omega,
                c,
                f,
                degenerate: None,
                watch_mask: None,
                calibration: None,
            })
        }
        InstanceKind::Manufactured => {
            let phi_star = field(cfg, grid, &cfg.phi_star)?;
            manufactured_instance(sp, cfg.m, &phi_star, cfg.t)
        }
        InstanceKind::BoundaryDegenerate => boundary_degenerate_instance(sp, cfg.m, cfg.eps)?.with_density(sp, &f_raw),
    }
}

fn dump_phi(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary, fields: &[(&str, &ScalarField)]) -> Result<()> {
    if !cfg.dump_fields || fields.is_empty() {
        return Ok(());
    }
    let mut dump = FieldDump::new(out.join("fields"), *fields[0].1.grid())?;
    for (name, f) in fields {
        dump.add_scalar(name, f)?;
    }
    dump.finish()?;
    summary.artifacts.push("fields/header.json".into());
    Ok(())
}

fn record_state(summary: &mut Summary, prefix: &str, s: &SolverState) {
    summary.set(&format!("{prefix}b"), s.b);
    summary.set(&format!("{prefix}t"), s.t);
    summary.set(&format!("{prefix}residual_sup"), s.residual_sup);
    summary.set(&format!("{prefix}volume_residual_rel"), s.volume_residual_rel);
    summary.set(&format!("{prefix}newton_iters"), s.newton_iters);
    summary.set(&format!("{prefix}gmres_iters"), s.gmres_iters);
    summary.set(&format!("{prefix}b_quadrature_gap"), s.b_quadrature_gap);
    summary.set(&format!("{prefix}diagnostics"), &s.diagnostics);
}

fn classify(min_margin: f64, tol: f64) -> Status {
    if min_margin.abs() <= tol {
        Status::Boundary
    } else if min_margin > 0.0 {
        Status::Ok
    } else {
        Status::Violated
    }
}

pub fn check_cone(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Step<()> {
    let grid = grid_of(cfg).stage("grid")?;
    let sp = Spectral::new(&grid);
    let n = cfg.complex_dim;
    let omega = HermitianFormField::constant(grid, HMat::identity(n)).stage("instance")?;
    let (chi, c) = match cfg.instance {
        InstanceKind::BoundaryDegenerate => {
            let family = potential_family(&sp, HMat::identity(n), canonical_boundary_shape(grid)).stage("instance")?;
            let tuned = tune_to_boundary(&sp, &family, &omega, cfg.m, (0.0, 1.0 / (3.0 * PI * PI))).stage("tune")?;
            match tuned {
                BoundaryTuning::Boundary { amplitude, c, .. } => {
                    summary.set("tuned_amplitude", amplitude);
                    (family(amplitude).stage("instance")?, cfg.c.unwrap_or(c))
                }
                other => {
                    return Err(StageFailure {
                        stage: "tune".into(),
                        error: Error::Construction(format!("no boundary case in the bracket: {other:?}")),
                    })
                }
            }
        }
        _ => {
            let chi = form(cfg, grid, cfg.chi_scale, &cfg.chi_potential, cfg.chi_amplitude).stage("instance")?;
            let c = match cfg.c {
                Some(c) => c,
                None => compute_c(&sp, &chi, &omega, cfg.m).stage("quadrature")?,
            };
            (chi, c)
        }
    };
    let margins = margin_field(&sp, &chi, &omega, c, cfg.m).stage("margins")?;
    let (argmin, min) =
        margins
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = crate::torus::ordered_sum(&margins) / margins.len() as f64;
    let mut at = vec![0.0; grid.axes()];
    grid.coords(argmin, &mut at);
    let status = classify(min, cfg.cone_tol);
    summary.set("c", c);
    summary.set("min_margin", min);
    summary.set("max_margin", max);
    summary.set("mean_margin", mean);
    summary.set("argmin_coords", &at);
    summary.set("negative_points", margins.iter().filter(|&&v| v < -cfg.cone_tol).count());
    summary.set("boundary_points", margins.iter().filter(|&&v| v.abs() <= cfg.cone_tol).count());
    summary.set(
        "classification",
        match status {
            Status::Ok => "strict",
            Status::Boundary => "boundary",
            _ => "violated",
        },
    );
    let margin = ScalarField::new(grid, margins).stage("margins")?;
    dump_phi(cfg, out, summary, &[("margin", &margin)]).stage("output")?;
    summary.status = status;
    Ok(())
}

pub fn solve(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Step<()> {
    let grid = grid_of(cfg).stage("grid")?;
    let sp = Spectral::new(&grid);
    let inst = build_instance(cfg, &sp).stage("instance")?;
    let spec = inst.spec_at(&sp, cfg.t).stage("instance")?;
    let guess = Guess { phi: ScalarField::zeros(grid), b: spec.expected_b.unwrap_or(0.0) };
    let state = newton_solve(&spec, &guess, &cfg.solver(), &sp).stage("solve")?;
    record_state(summary, "", &state);
    summary.set("expected_b", spec.expected_b);
    summary.set("c", inst.c);
    summary.check("residual_sup", state.residual_sup, Relation::Le, cfg.tol);
    summary.check("min_eigenvalue", state.diagnostics.min_eig, Relation::Gt, 0.0);
    if let Some(gap) = state.b_quadrature_gap {
        summary.check("b_quadrature_gap", gap, Relation::Le, cfg.b_tol);
    }
    let mut fields = vec![("phi", state.phi_reported())];
    if cfg.instance == InstanceKind::Manufactured {
        let star = field(cfg, grid, &cfg.phi_star).stage("instance")?;
        let err = state.phi.zip_map(&star.mean_zero(), |a, b| a - b).stage("compare")?;
        summary.check("manufactured_error", err.sup_abs(), Relation::Le, 1e-6);
        fields.push(("phi_error", err));
    }
    write_path_csv(&out.join("state.csv"), std::slice::from_ref(&state)).stage("output")?;
    summary.artifacts.push("state.csv".into());
    let refs: Vec<(&str, &ScalarField)> = fields.iter().map(|(n, f)| (*n, f)).collect();
    dump_phi(cfg, out, summary, &refs).stage("output")?;
    Ok(())
}

/// `max_k v_k ≤ factor · max_{k < ⌈K/2⌉} v_k`.
fn growth_ratio(values: &[f64]) -> f64 {
    let half = values.len().div_ceil(2);
    let first = values[..half].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let all = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if first > 0.0 {
        all / first
    } else if all <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

pub fn continue_path(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Step<()> {
    let grid = grid_of(cfg).stage("grid")?;
    let sp = Spectral::new(&grid);
    let inst = build_instance(cfg, &sp).stage("instance")?;
    let schedule = cfg.schedule();
    let path = continuation_path(|t| inst.spec_at(&sp, t), &schedule, &cfg.solver(), &sp).stage("continuation")?;
    write_path_csv(&out.join("path.csv"), &path.states).stage("output")?;
    write_w_table(&out.join("w_table.csv"), &path.states).stage("output")?;
    summary.artifacts.extend(["path.csv".to_string(), "w_table.csv".to_string()]);
    summary.set("c", inst.c);
    summary.set("schedule", &schedule);
    summary.set("rows", path.states.len());
    summary.set("calibration", inst.calibration.as_ref().map(|m| format!("{m:?}")));
    if let Some((t, e)) = path.failure {
        summary.set("completed", false);
        summary.fail(&format!("continuation at t = {t}"), e);
        return Ok(());
    }
    summary.set("completed", true);
    let last = path.last().expect("completed path is nonempty");
    record_state(summary, "final_", last);
    let sup_phi: Vec<f64> = path.states.iter().map(|s| s.diagnostics.sup_phi).collect();
    summary.check("sup_phi_growth", growth_ratio(&sup_phi), Relation::Le, cfg.growth_factor);
    let watch: Option<Vec<f64>> = path.states.iter().map(|s| s.diagnostics.sup_w_watch).collect();
    if let Some(w) = watch {
        let global: Vec<f64> = path.states.iter().map(|s| s.diagnostics.sup_w).collect();
        summary.set("sup_w_growth", growth_ratio(&global));
        summary.check("sup_w_watch_growth", growth_ratio(&w), Relation::Le, cfg.growth_factor);
    }
    let n = cfg.complex_dim;
    let bound = inst.c.powf(n as f64 / (n - cfg.m) as f64);
    let gap = volume_lower_bound_check(last, inst.c, n, cfg.m);
    summary.set("volume_bound", bound);
    summary.check("volume_lower_bound_gap", gap, Relation::Ge, -cfg.volume_tol * bound);
    dump_phi(cfg, out, summary, &[("phi_final", &last.phi_reported())]).stage("output")?;
    Ok(())
}

/// Implied constants of the stability estimate over the `amp` family, and
/// optionally the uniqueness gap between two extrapolated limits.
pub fn stability(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Step<()> {
    let grid = grid_of(cfg).stage("grid")?;
    let sp = Spectral::new(&grid);
    let inst = build_instance(cfg, &sp).stage("instance")?;
    let perturbed = FieldExpr::parse_with_fields(&cfg.f2, cfg.complex_dim, &["amp"], &["f1"]).stage("config")?;
    let f1 = field(cfg, grid, &cfg.f).stage("config")?;
    let solver = cfg.solver();
    let spec1 = inst.spec_at(&sp, cfg.t).stage("instance")?;
    let base = newton_solve(
        &spec1,
        &Guess { phi: ScalarField::zeros(grid), b: spec1.expected_b.unwrap_or(0.0) },
        &solver,
        &sp,
    )
    .stage("solve f1")?;
    let rho = volume_density(&inst.omega.sample(&sp)).stage("quadrature")?;
    // only φ₁ is normalized (sup φ₁ = 0); φ₂ is shifted by the same constant
    let shift = -base.phi.max();
    let phi1 = base.phi.map(|v| v + shift);
    let mut rows = Vec::new();
    for &amp in &cfg.amplitudes {
        let f2 = perturbed.sample_with_fields(grid, &[amp], &[&f1]).stage("config")?;
        let inst2 = inst.with_density(&sp, &f2).stage("instance")?;
        let spec2 = inst2.spec_at(&sp, cfg.t).stage("instance")?;
        let s2 = newton_solve(&spec2, &base.guess(), &solver, &sp).stage(&format!("solve f2 (amp = {amp})"))?;
        let r = stability_compare(&phi1, &s2.phi.map(|v| v + shift), &rho, cfg.q).stage("compare")?;
        rows.push((amp, r, s2.residual_sup));
    }
    let mut w = csv::Writer::from_path(out.join("stability.csv")).map_err(Error::from).stage("output")?;
    w.write_record(["amplitude", "sup_diff", "norm_positive", "norm_full", "c_implied", "q_star", "residual"])
        .map_err(Error::from)
        .stage("output")?;
    for (amp, r, res) in &rows {
        w.serialize((amp, r.sup_diff, r.norm_positive, r.norm_full, r.c_implied, r.q_star, res))
            .map_err(Error::from)
            .stage("output")?;
    }
    w.flush().map_err(Error::from).stage("output")?;
    summary.artifacts.push("stability.csv".into());
    let cs: Vec<f64> = rows.iter().map(|(_, r, _)| r.c_implied).collect();
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
    summary.set("amplitudes", &cfg.amplitudes);
    summary.set("c_implied", &cs);
    summary.set("consecutive_ratios", cs.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>());
    summary.set("q_star", rows.first().map(|r| r.1.q_star));
    summary.set("base_residual_sup", base.residual_sup);
    summary.check("c_implied_ratio", if lo > 0.0 { hi / lo } else { f64::INFINITY }, Relation::Lt, cfg.stability_band);
    if cfg.uniqueness {
        uniqueness(cfg, &sp, &inst, summary)?;
    }
    Ok(())
}

/// Two continuation paths over interleaved schedules, each extrapolated to `t = 0`.
/// Two continuation paths over interleaved schedules, each extrapolated to `t = 0`.
fn uniqueness(cfg: &ExperimentConfig, sp: &Spectral, inst: &Instance, summary: &mut Summary) -> Step<()> {
    let schedule_a = cfg.schedule();
    let schedule_b: Vec<f64> = schedule_a.iter().map(|t| 0.75 * t).collect();
    let mut limits = Vec::new();
    for (name, schedule) in [("a", &schedule_a), ("b", &schedule_b)] {
        let path = continuation_path(|t| inst.spec_at(sp, t), schedule, &cfg.solver(), sp).stage("uniqueness path")?;
        if let Some((t, e)) = path.failure {
            return Err(StageFailure { stage: format!("uniqueness path {name} at t = {t}"), error: e });
        }
        let k = path.states.len();
        let limit = match k {
            k if k >= 2 && (path.states[k - 2].t - 2.0 * path.states[k - 1].t).abs() <= 1e-12 => {
                richardson_limit(&path.states[k - 1].phi, &path.states[k - 2].phi).stage("extrapolate")?
            }
            _ => path.states[k - 1].phi.clone(),
        };
        summary.set(&format!("uniqueness_final_t_{name}"), path.states[k - 1].t);
        limits.push(limit);
    }
    let mask: Vec<bool> = match &inst.degenerate {
        Some(d) => d.iter().map(|&x| !x).collect(),
        None => vec![true; inst.grid().len()],
    };
    let gap = uniqueness_gap(&limits[0], &limits[1], &mask).stage("uniqueness")?;
    summary.check("uniqueness_gap", gap, Relation::Le, cfg.uniqueness_tol);
    Ok(())
}

pub fn fake_boundary(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Step<()> {
    let grid = grid_of(cfg).stage("grid")?;
    let sp = Spectral::new(&grid);
    let inst = FakeBoundaryInstance::sample(&sp, cfg.m, cfg.fb_amplitude, cfg.delta1).stage("instance")?;
    summary.set("c", inst.c);
    summary.set("theta0", inst.theta0);
    summary.set("b_prime", inst.b_prime);
    summary.set("kappa", inst.kappa);
    summary.set("cone_margin", inst.cone_margin);
    summary.set("rescale", inst.rescale);
    let result = two_stage_solve(&inst, &sp, &cfg.solver()).stage("two-stage solve")?;
    write_stage_csv(&out.join("stage2.csv"), &result.records).stage("output")?;
    summary.artifacts.push("stage2.csv".into());
    summary.set("b", result.b);
    summary.set("b_tilde", result.stage1.b);
    summary.set("stage2_steps", result.records.len());
    summary.set("final_residual_sup", result.last.residual_sup);
    if inst.theta0 > 0.0 {
        summary.check("b_negative", result.b, Relation::Lt, 0.0);
    }
    summary.check("b_below_b_prime", result.b, Relation::Le, inst.b_prime);
    summary.check("final_residual", result.last.residual_sup, Relation::Le, cfg.fb_residual_tol);
    let slack = result.records.iter().map(|r| r.min_band_slack).fold(f64::INFINITY, f64::min);
    summary.check("min_band_slack", slack, Relation::Gt, 0.0);
    let n = cfg.complex_dim;
    let bound = (result.b.exp() * inst.lambda_min).powf(n as f64 / (n - cfg.m) as f64);
    summary.check("volume_bound_gap", result.volume_bound_gap, Relation::Ge, -cfg.volume_tol * bound);
    dump_phi(cfg, out, summary, &[("phi", &result.last.phi_reported()), ("g2", &inst.g2)]).stage("output")?;
    Ok(())
}

pub fn selftest(quick: bool, seed: u64, summary: &mut Summary) -> Step<()> {
    let trials = if quick { selftest::QUICK_TRIALS } else { selftest::FULL_TRIALS };
    let reports = selftest::run_all(seed, trials);
    summary.set("trials", trials);
    for r in &reports {
        summary.check(&format!("{}_failures", r.name), r.failures as f64, Relation::Le, 0.0);
    }
    summary.set("suites", &reports);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_ratio_cases() {
        assert_eq!(growth_ratio(&[1.0, 2.0, 1.5, 1.0]), 1.0);
        assert_eq!(growth_ratio(&[1.0, 1.0, 3.0]), 3.0);
        assert_eq!(growth_ratio(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(classify(0.5, 1e-8), Status::Ok);
        assert_eq!(classify(-1e-9, 1e-8), Status::Boundary);
        assert_eq!(classify(-0.1, 1e-8), Status::Violated);
    }
}
