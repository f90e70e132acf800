//! Seeded property suites over the symmetric-function, pointwise and De Giorgi
//! layers, plus the brute-force oracles they compare against.
//!
//! Every suite draws from its own ChaCha stream derived from the master seed, so
//! reports are reproducible and independent of suite order.

pub mod oracles;

use num_complex::Complex64;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::degiorgi::{decay_fit, degiorgi_threshold, DecayOutcome, DecaySamples};
use crate::pointwise::{
    cone_margin, cone_margin_generic, linearization_coefficients, residual_inverse_form, residual_volume_form,
    EquationParams,
};
use crate::symmetric::{
    binomial, elementary_sym, elementary_sym_generic, maclaurin_normalized, newton_maclaurin_gap, quotient_log,
    strong_concavity_sides, sym_without,
};
use oracles::{sym_by_subsets, wedge_cone_margin, Exact};

/// Relative tolerance shared by the inequality suites.
pub const REL_TOL: f64 = 1e-12;

/// Trial counts of the full and quick runs.
pub const FULL_TRIALS: usize = 10_000;
pub const QUICK_TRIALS: usize = 100;

/// Cap on exact-rational oracle trials.
pub const EXACT_TRIALS: usize = 1_000;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub trials: usize,
    pub checks: usize,
    pub failures: usize,
    /// Smallest normalized slack over all checks; negative beyond tolerance means failure.
    pub worst_slack: f64,
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    report: SuiteReport,
}

impl Tally {
    fn new(name: &str, trials: usize) -> Self {
        Tally {
            report: SuiteReport {
                name: name.into(),
                trials,
                checks: 0,
                failures: 0,
                worst_slack: f64::INFINITY,
                first_failure: None,
            },
        }
    }

    /// Records a slack that must be `≥ −tol`.
    fn slack(&mut self, slack: f64, tol: f64, what: impl FnOnce() -> String) {
        let r = &mut self.report;
        r.checks += 1;
        if slack < r.worst_slack || slack.is_nan() {
            r.worst_slack = slack;
        }
        if !(slack >= -tol) {
            r.failures += 1;
            if r.first_failure.is_none() {
                r.first_failure = Some(what());
            }
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.slack(if ok { 0.0 } else { -1.0 }, 0.0, what);
    }

    fn finish(mut self) -> SuiteReport {
        if self.report.checks == 0 {
            self.report.worst_slack = 0.0;
        }
        self.report
    }
}

/// Independent stream per suite.
fn stream(seed: u64, suite: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite);
    rng
}

/// Log-uniform entries in `[lo, hi]`.
fn spectrum(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| (rng.gen_range(lo.ln()..hi.ln())).exp()).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn exact(rng: &mut impl Rng, lo: i128, hi: i128, max_den: i128) -> Exact {
    Exact::new(rng.gen_range(lo..=hi), rng.gen_range(1..=max_den))
}

fn to_f64(q: Exact) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Positivity, permutation symmetry, the deletion recursion, Newton–Maclaurin and
/// Maclaurin monotonicity on random `λ ∈ Γ_n`, `n ∈ 2..=5`, plus subset-oracle
/// equality (exact over rationals and to rounding in floating point) for `n ≤ 8`.
pub fn symmetric_suite(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = stream(seed, 1);
    let mut t = Tally::new("symmetric_functions", trials);
    for trial in 0..trials {
        let n = 2 + trial % 4;
        let lambda = spectrum(&mut rng, n, 0.01, 100.0);
        let e: Vec<f64> = (0..=n as isize + 1).map(|k| elementary_sym(k, &lambda)).collect();
        for k in 0..=n {
            t.check(e[k] > 0.0, || format!("S_{k}({lambda:?}) = {} not positive", e[k]));
        }
        t.check(e[n + 1] == 0.0, || format!("S_{}({lambda:?}) nonzero", n + 1));

        let mut perm = lambda.clone();
        perm.shuffle(&mut rng);
        for k in 1..=n {
            let p = elementary_sym(k as isize, &perm);
            t.slack(-rel(p, e[k]), REL_TOL, || format!("S_{k} not symmetric at {lambda:?}"));
        }

        for i in 0..n {
            for k in 1..=n as isize {
                let rhs = sym_without(k, &lambda, i) + lambda[i] * sym_without(k - 1, &lambda, i);
                t.slack(-rel(e[k as usize], rhs), REL_TOL, || format!("recursion S_{k} at i = {i}, λ = {lambda:?}"));
            }
        }

        for k in 1..n as isize {
            let mk = maclaurin_normalized(k, &lambda);
            t.slack(newton_maclaurin_gap(k, &lambda) / (mk * mk), REL_TOL, || {
                format!("Newton–Maclaurin k = {k}, λ = {lambda:?}")
            });
        }
        for k in 1..n as isize {
            let a = maclaurin_normalized(k, &lambda).powf(1.0 / k as f64);
            let b = maclaurin_normalized(k + 1, &lambda).powf(1.0 / (k + 1) as f64);
            t.slack((a - b) / a, REL_TOL, || format!("Maclaurin monotonicity k = {k}, λ = {lambda:?}"));
        }
    }
    for trial in 0..trials.min(EXACT_TRIALS) {
        let n = 1 + trial % 8;
        let q: Vec<Exact> = (0..n).map(|_| exact(&mut rng, 1, 40, 12)).collect();
        let f: Vec<f64> = q.iter().map(|&v| to_f64(v)).collect();
        for k in 0..=n as isize {
            t.check(sym_by_subsets(k, &q) == elementary_sym_generic(k, &q), || {
                format!("subset oracle differs at k = {k}, λ = {q:?}")
            });
            t.slack(-rel(sym_by_subsets(k, &f), elementary_sym(k, &f)), REL_TOL, || {
                format!("float subset oracle differs at k = {k}, λ = {f:?}")
            });
        }
    }
    t.finish()
}

fn unit_polydisc(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::from_polar(rng.gen_range(0.0f64..1.0).sqrt(), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect()
}

/// Strong concavity gap over `λ ∈ [0.1, 10]^n`, `ξ` in the unit polydisc, every `m`.
pub fn strong_concavity_suite(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = stream(seed, 2);
    let mut t = Tally::new("strong_concavity", trials);
    for trial in 0..trials {
        let n = 2 + trial % 4;
        let lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
        let xi = unit_polydisc(&mut rng, n);
        for m in 1..=n as isize {
            match strong_concavity_sides(&lambda, &xi, m) {
                Ok((l, r)) => t.slack((l - r) / l.abs().max(r.abs()).max(f64::MIN_POSITIVE), REL_TOL, || {
                    format!("m = {m}, λ = {lambda:?}, ξ = {xi:?}: {l} < {r}")
                }),
                Err(e) => t.check(false, || e.to_string()),
            }
        }
    }
    t.finish()
}

/// Midpoint concavity of `ln(S_n/(S_m + a))` for `a ∈ {0, 0.5, 5}`.
pub fn midpoint_concavity_suite(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = stream(seed, 3);
    let mut t = Tally::new("quotient_log_midpoint", trials);
    for trial in 0..trials {
        let n = 2 + trial % 4;
        let l1 = spectrum(&mut rng, n, 0.05, 20.0);
        let l2 = spectrum(&mut rng, n, 0.05, 20.0);
        let mid: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| 0.5 * (a + b)).collect();
        let m = rng.gen_range(0..n) as isize;
        for a in [0.0, 0.5, 5.0] {
            let q = |l: &[f64]| quotient_log(l, m, a).unwrap_or(f64::NAN);
            let (qm, q1, q2) = (q(&mid), q(&l1), q(&l2));
            let scale = qm.abs().max(q1.abs()).max(q2.abs()).max(1.0);
            t.slack((qm - 0.5 * (q1 + q2)) / scale, REL_TOL, || format!("m = {m}, a = {a}, λ₁ = {l1:?}, λ₂ = {l2:?}"));
        }
    }
    t.finish()
}

/// Eigenvalue-form cone margin against the exterior-algebra expansion over exact
/// rationals, `n ≤ 4`, together with the surface boundary case `μ = (c/2, c/2)`.
pub fn cone_oracle_suite(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = stream(seed, 4);
    let trials = trials.min(EXACT_TRIALS);
    let mut t = Tally::new("cone_margin_oracle", trials);
    for trial in 0..trials {
        let n = 2 + trial % 3;
        let m = rng.gen_range(0..n);
        let mu: Vec<Exact> = (0..n).map(|_| exact(&mut rng, 0, 30, 9)).collect();
        let c = exact(&mut rng, 1, 30, 7);
        let fast = cone_margin_generic(&mu, c, m);
        let oracle = wedge_cone_margin(&mu, c, m);
        t.check(fast == oracle, || format!("μ = {mu:?}, c = {c}, m = {m}: {fast} ≠ {oracle}"));
        let mu_f: Vec<f64> = mu.iter().map(|&v| to_f64(v)).collect();
        let float = cone_margin(&mu_f, to_f64(c), m);
        let scale = mu_f.iter().fold(1.0f64, |a, &b| a.max(b)).powi(n as i32 - 1) * (1.0 + to_f64(c));
        t.slack(-(float - to_f64(oracle)).abs() / scale, REL_TOL, || {
            format!("floating margin {float} vs exact {oracle} at μ = {mu:?}")
        });
    }
    for c in [Exact::new(1, 1), Exact::new(3, 1), Exact::new(7, 5)] {
        let half = c / Exact::new(2, 1);
        let margin = wedge_cone_margin(&[half, half], c, 1);
        t.check(margin.is_zero() && cone_margin_generic(&[half, half], c, 1).is_zero(), || {
            format!("surface boundary case c = {c} gives margin {margin}")
        });
    }
    t.finish()
}

/// Inverse/volume identity, ellipticity, ε-sweep of central differences of the
/// inverse form, and coefficient-sum bounds at zero-residual points.
pub fn operator_suite(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = stream(seed, 5);
    let mut t = Tally::new("operator_identities", trials);
    for trial in 0..trials {
        let n = 2 + trial % 4;
        let m = rng.gen_range(0..n);
        let lambda = spectrum(&mut rng, n, 0.2, 5.0);
        let p = EquationParams { n, m, coefficient: rng.gen_range(0.0..3.0), source: rng.gen_range(0.0..2.0) };
        let inv = residual_inverse_form(&lambda, &p).unwrap_or(f64::NAN);
        let vol = residual_volume_form(&lambda, &p);
        let sn = elementary_sym(n as isize, &lambda);
        let scale = sn.max(p.scaled_coefficient() * elementary_sym(m as isize, &lambda)).max(p.source);
        t.slack(-(inv * sn + vol).abs() / scale, REL_TOL, || {
            format!("inverse·S_n ≠ −volume form at λ = {lambda:?}, {p:?}")
        });

        let a = linearization_coefficients(&lambda, &p).unwrap_or_default();
        for (i, &ai) in a.iter().enumerate() {
            t.check(ai >= 0.0, || format!("a_{i} = {ai} < 0 at λ = {lambda:?}"));
        }
        for i in 0..n {
            let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
                .iter()
                .map(|&eps| {
                    let mut up = lambda.clone();
                    let mut dn = lambda.clone();
                    up[i] += eps * lambda[i];
                    dn[i] -= eps * lambda[i];
                    let r = |l: &[f64]| residual_inverse_form(l, &p).unwrap_or(f64::NAN);
                    let fd = -(r(&up) - r(&dn)) / (2.0 * eps * lambda[i]);
                    (fd - a[i]).abs() / a[i].abs().max(1e-300)
                })
                .collect();
            // first order at least, unless already at rounding level
            for w in errs.windows(2) {
                let ok = w[1] <= 1e-10 || w[1] <= 0.55 * w[0];
                t.check(ok, || format!("ε-sweep stalls ({errs:?}) for a_{i} at λ = {lambda:?}"));
            }
            t.slack(0.01 - errs[0], 0.0, || format!("a_{i} off by {} at λ = {lambda:?}", errs[0]));
        }

        // zero-residual sample: choose the scaled coefficient, then the source
        let mu: Vec<f64> = lambda.iter().map(|v| 1.0 / v).collect();
        let u = rng.gen_range(0.0..1.0);
        let coefficient = u / elementary_sym((n - m) as isize, &mu) * binomial(n, m as isize);
        let source = (1.0 - u) / elementary_sym(n as isize, &mu);
        let z = EquationParams { n, m, coefficient, source };
        let res = residual_inverse_form(&lambda, &z).unwrap_or(f64::NAN);
        t.slack(-res.abs(), REL_TOL, || format!("zero-residual construction gives {res}"));
        let sum: f64 = linearization_coefficients(&lambda, &z).unwrap_or_default().iter().sum();
        let s1 = elementary_sym(1, &mu);
        let lower = (n - m) as f64 / n as f64 * s1;
        t.slack((sum - lower) / s1, REL_TOL, || format!("Σa = {sum} below {lower} at λ = {lambda:?}"));
        t.slack((s1 - sum) / s1, REL_TOL, || format!("Σa = {sum} above {s1} at λ = {lambda:?}"));
    }
    t.finish()
}

/// Threshold formula values and synthetic decay sequences `φ(s) = φ₀(1 − s/L)^α`.
pub fn degiorgi_suite(seed: u64, trials: usize) -> SuiteReport {
    let mut rng = stream(seed, 6);
    let mut t = Tally::new("degiorgi", trials);
    let d4 = degiorgi_threshold(1.0, 2.0, 1.0, 1.0, 0.0);
    t.check(matches!(d4, Ok(v) if v == 4.0), || format!("d = 4 case gives {d4:?}"));
    let d16 = degiorgi_threshold(2.0, 3.0, 8.0, 2.0, 0.0);
    t.check(matches!(d16, Ok(v) if (v - 16.0).abs() <= 16.0 * f64::EPSILON * 4.0), || {
        format!("d = 16 case gives {d16:?}")
    });
    for _ in 0..trials.div_ceil(100) {
        // φ(s) = φ₀(1 − s/L)^α satisfies the hypothesis with β = 2 and sharp constant
        // (L/4)^α/φ₀, for which the threshold is exactly L; use twice that
        let alpha = rng.gen_range(2.0..12.0f64);
        let phi0 = rng.gen_range(0.5..4.0f64);
        let len = rng.gen_range(0.5..2.0f64);
        let c = 2.0 * (len / 4.0).powf(alpha) / phi0;
        let levels: Vec<f64> = (0..=80).map(|k| k as f64 / 80.0 * 1.25 * len).collect();
        let samples =
            DecaySamples::from_fn(&levels, |s| phi0 * (1.0 - s / len).max(0.0).powf(alpha)).expect("valid levels");
        let (s, mass) = (samples.s(), samples.mass());
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                let bound = c * mass[i] * mass[i] / (s[j] - s[i]).powf(alpha);
                t.slack((bound - mass[j]) / phi0, 1e-12, || {
                    format!("synthetic sequence violates the hypothesis at ({}, {})", s[i], s[j])
                });
            }
        }
        let vanish = samples.vanishing_level().unwrap_or(f64::INFINITY);
        match degiorgi_threshold(alpha, 2.0, c, phi0, 0.0) {
            Ok(d) => t.slack((d - vanish) / d, 0.0, || format!("vanishes at {vanish} after threshold {d}")),
            Err(e) => t.check(false, || e.to_string()),
        }
        match decay_fit(&samples) {
            DecayOutcome::Fit(f) => t.slack((f.threshold - vanish) / f.threshold, 0.0, || {
                format!("fitted threshold {} before vanishing at {vanish}", f.threshold)
            }),
            DecayOutcome::Rejected { reason } => t.check(false, || format!("fit rejected: {reason}")),
        }
    }
    t.finish()
}

/// Runs every suite with the given master seed and trial count.
pub fn run_all(seed: u64, trials: usize) -> Vec<SuiteReport> {
    vec![
        symmetric_suite(seed, trials),
        strong_concavity_suite(seed, trials),
        midpoint_concavity_suite(seed, trials),
        cone_oracle_suite(seed, trials),
        operator_suite(seed, trials),
        degiorgi_suite(seed, trials),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_run_passes() {
        for r in run_all(DEFAULT_SEED, QUICK_TRIALS) {
            assert!(r.passed(), "{r:?}");
            assert!(r.checks > 0);
        }
    }

    #[test]
    fn seed_changes_draws_not_outcomes() {
        let a = operator_suite(1, 50);
        let b = operator_suite(2, 50);
        assert!(a.passed() && b.passed());
        assert_ne!(a.worst_slack, b.worst_slack);
        assert_eq!(operator_suite(1, 50), a);
    }

    #[test]
    fn tally_records_first_failure() {
        let mut t = Tally::new("x", 1);
        t.slack(1.0, 0.0, || "a".into());
        t.slack(-1.0, 0.5, || "b".into());
        t.slack(-2.0, 0.5, || "c".into());
        let r = t.finish();
        assert_eq!((r.failures, r.worst_slack), (2, -2.0));
        assert_eq!(r.first_failure.as_deref(), Some("b"));
    }
}
