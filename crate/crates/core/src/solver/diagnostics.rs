//! A priori estimate monitors for converged states.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::newton::Workspace;
use crate::error::Result;
use crate::pointwise::cone_margin;
use crate::torus::ScalarField;

/// Per-state record of the quantities the a priori estimates bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `sup φ − inf φ`, i.e. `sup|φ|` under `sup φ = 0`.
    pub sup_phi: f64,
    /// `sup |∂φ|_ω`.
    pub sup_grad: f64,
    /// `sup w` with `w = ln tr_ω X`.
    pub sup_w: f64,
    /// `sup w` over the watch mask, when the spec carries one.
    pub sup_w_watch: Option<f64>,
    pub min_eig: f64,
    pub min_margin: f64,
    /// Least-squares slope of `ln|∂φ|²_ω` against `φ − inf φ`.
    pub grad_slope: Option<f64>,
    /// Least-squares slope of `ln w` against `φ − inf φ` (points with `w > 0`).
    pub w_slope: Option<f64>,
}

/// Slope of the least-squares line through `(x, y)`.
pub fn ls_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let k = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-300 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// `|∂φ|²_ω = Σ ω^{ij̄} ∂ᵢφ ∂̄ⱼφ` at every point, from spectral gradients.
pub(crate) fn gradient_norm_sq(ws: &Workspace<'_>, phi: &ScalarField) -> Vec<f64> {
    let n = ws.spec.n;
    let grad = ws.sp.gradient(phi);
    (0..phi.grid().len())
        .into_par_iter()
        .map(|p| {
            let g: Vec<Complex64> =
                (0..n).map(|j| 0.5 * Complex64::new(grad[2 * j].values()[p], -grad[2 * j + 1].values()[p])).collect();
            let linv = ws.metric_linv_at(p);
            (0..n).map(|i| (0..=i).map(|k| linv.get(i, k) * g[k]).sum::<Complex64>().norm_sqr()).sum()
        })
        .collect()
}

pub(crate) fn diagnostics(
    ws: &Workspace<'_>,
    phi: &ScalarField,
    lambda: &[f64],
    coefficient: &[f64],
) -> Result<Diagnostics> {
    let n = ws.spec.n;
    let m = ws.spec.m;
    let inf = phi.min();
    let sup_phi = phi.max() - inf;
    let grad2 = gradient_norm_sq(ws, phi);
    let w: Vec<f64> = lambda.par_chunks(n).map(|l| l.iter().sum::<f64>().ln()).collect();
    let min_eig = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    let min_margin = lambda
        .par_chunks(n)
        .zip(coefficient.par_iter())
        .map(|(l, &c)| cone_margin(l, c, m))
        .reduce(|| f64::INFINITY, f64::min);
    let sup_w_watch = ws.spec.watch_mask.as_ref().map(|mask| {
        w.iter().zip(mask.iter()).filter(|(_, &keep)| keep).fold(f64::NEG_INFINITY, |acc, (v, _)| acc.max(*v))
    });
    let heights: Vec<f64> = phi.values().iter().map(|v| v - inf).collect();
    let grad_pairs: Vec<(f64, f64)> =
        heights.iter().zip(&grad2).filter(|(_, &g)| g > 1e-30).map(|(h, g)| (*h, g.ln())).collect();
    let w_pairs: Vec<(f64, f64)> =
        heights.iter().zip(&w).filter(|(_, &v)| v > 0.0).map(|(h, v)| (*h, v.ln())).collect();
    Ok(Diagnostics {
        sup_phi,
        sup_grad: grad2.iter().copied().fold(0.0, f64::max).sqrt(),
        sup_w: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        sup_w_watch,
        min_eig,
        min_margin,
        grad_slope: ls_slope(&grad_pairs),
        w_slope: ls_slope(&w_pairs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!((ls_slope(&pts).unwrap() + 2.0).abs() < 1e-14);
        assert_eq!(ls_slope(&[(1.0, 1.0), (1.0, 2.0)]), None);
    }
}
