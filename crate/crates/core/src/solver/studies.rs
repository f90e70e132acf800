//! Post-processing of converged runs: stability exponent, uniqueness gap and
//! the pointwise volume lower bound.

use serde::{Deserialize, Serialize};

use super::newton::SolverState;
use crate::error::{Error, Result};
use crate::symmetric::elementary_sym;
use crate::torus::{ordered_sum, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    /// `sup(φ₂ − φ₁)`.
    pub sup_diff: f64,
    /// `‖(φ₂ − φ₁)⁺‖_{L^{q*}}`.
    pub norm_positive: f64,
    /// `‖φ₂ − φ₁‖_{L^{q*}}`.
    pub norm_full: f64,
    /// `sup / norm^{1/(n+1)}`, zero when the norm vanishes.
    pub c_implied: f64,
    pub q_star: f64,
}

fn lq_norm(values: impl Iterator<Item = f64>, rho: &[f64], q: f64, cell: f64) -> f64 {
    let terms: Vec<f64> = values.zip(rho).map(|(v, r)| v.abs().powf(q) * r).collect();
    (ordered_sum(&terms) * cell).powf(1.0 / q)
}

/// Compares two potentials (both normalized by `sup = 0`) in the form of the
/// stability estimate `sup(φ₂−φ₁) ≤ C‖(φ₂−φ₁)⁺‖^{1/(n+1)}_{L^{q*}}`.
pub fn stability_compare(phi1: &ScalarField, phi2: &ScalarField, rho: &[f64], q: f64) -> Result<StabilityRecord> {
    phi1.check_grid(phi2)?;
    if rho.len() != phi1.grid().len() {
        return Err(Error::Input("density has the wrong length".into()));
    }
    if !(q > 1.0) {
        return Err(Error::Domain(format!("q must exceed 1, got {q}")));
    }
    let n = phi1.grid().n() as f64;
    let q_star = q / (q - 1.0);
    let cell = phi1.grid().cell_volume();
    let diff: Vec<f64> = phi2.values().iter().zip(phi1.values()).map(|(a, b)| a - b).collect();
    let sup_diff = diff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm_positive = lq_norm(diff.iter().map(|d| d.max(0.0)), rho, q_star, cell);
    let norm_full = lq_norm(diff.iter().copied(), rho, q_star, cell);
    let c_implied = if norm_positive > 0.0 { sup_diff / norm_positive.powf(1.0 / (n + 1.0)) } else { 0.0 };
    Ok(StabilityRecord { sup_diff, norm_positive, norm_full, c_implied, q_star })
}

/// `sup_mask |(φ₁−φ₂) − mean_mask(φ₁−φ₂)|`.
pub fn uniqueness_gap(phi1: &ScalarField, phi2: &ScalarField, mask: &[bool]) -> Result<f64> {
    phi1.check_grid(phi2)?;
    if mask.len() != phi1.grid().len() {
        return Err(Error::Input("mask has the wrong length".into()));
    }
    let diff: Vec<f64> =
        phi1.values().iter().zip(phi2.values()).zip(mask).filter(|(_, &keep)| keep).map(|((a, b), _)| a - b).collect();
    if diff.is_empty() {
        return Err(Error::Input("empty mask".into()));
    }
    let mean = ordered_sum(&diff) / diff.len() as f64;
    Ok(diff.iter().fold(0.0, |m, d| m.max((d - mean).abs())))
}

/// `min_x [S_n(λ(X)) − c^{n/(n−m)}]`.
pub fn volume_lower_bound_check(state: &SolverState, c: f64, n: usize, m: usize) -> f64 {
    let bound = c.powf(n as f64 / (n - m) as f64);
    state.lambda.chunks(n).map(|l| elementary_sym(n as isize, l) - bound).fold(f64::INFINITY, f64::min)
}

/// First-order extrapolation `2φ_t − φ_{2t}` of a path toward `t = 0`.
pub fn richardson_limit(phi_t: &ScalarField, phi_2t: &ScalarField) -> Result<ScalarField> {
    phi_t.zip_map(phi_2t, |a, b| 2.0 * a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusGrid;

    #[test]
    fn identical_runs_have_zero_constant() {
        let g = TorusGrid::new(2, 4).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] - 0.5);
        let rho = vec![1.0; g.len()];
        let r = stability_compare(&f, &f, &rho, 2.0).unwrap();
        assert_eq!(r.c_implied, 0.0);
        assert!(stability_compare(&f, &f, &rho, 1.0).is_err());
    }

    #[test]
    fn positive_part_is_smaller() {
        let g = TorusGrid::new(2, 4).unwrap();
        let a = ScalarField::from_fn(g, |x| (x[0] * 7.0).sin());
        let b = ScalarField::from_fn(g, |x| (x[1] * 3.0).cos());
        let rho = vec![1.0; g.len()];
        let r = stability_compare(&a, &b, &rho, 3.0).unwrap();
        assert!(r.norm_positive <= r.norm_full);
    }

    #[test]
    fn constant_shift_has_no_gap() {
        let g = TorusGrid::new(2, 4).unwrap();
        let a = ScalarField::from_fn(g, |x| x[2] * x[3]);
        let b = a.map(|v| v + 5.0);
        let mask = vec![true; g.len()];
        assert!(uniqueness_gap(&a, &b, &mask).unwrap() < 1e-14);
        assert!(uniqueness_gap(&a, &b, &vec![false; g.len()]).is_err());
    }
}
