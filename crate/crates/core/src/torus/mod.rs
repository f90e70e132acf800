//! The flat complex torus `ℂⁿ/ℤ²ⁿ` sampled on a uniform grid.

pub mod dump;
pub mod forms;
pub mod grid;
pub mod instances;
pub mod quadrature;
pub mod spectral;

use rayon::prelude::*;

pub use forms::{relative_eigenvalues, relative_eigenvalues_of, HermitianFormField, MatrixField};
pub use grid::{circle_distance, ScalarField, TorusGrid};
pub use spectral::Spectral;

/// Fixed chunk length for reductions; independent of the thread count.
const CHUNK: usize = 4096;

/// Sum with a reduction order that does not depend on the rayon pool size.
pub fn ordered_sum(values: &[f64]) -> f64 {
    let partial: Vec<f64> = values.par_chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    partial.iter().sum()
}

/// Deterministic dot product, same chunking as [`ordered_sum`].
pub fn ordered_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Deterministic sum of `f(i)` over `0..len`.
pub fn ordered_sum_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let partial: Vec<f64> =
        (0..chunks).into_par_iter().map(|c| (c * CHUNK..((c + 1) * CHUNK).min(len)).map(&f).sum::<f64>()).collect();
    partial.iter().sum()
}
