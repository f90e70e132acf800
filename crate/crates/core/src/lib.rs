//! Numerical laboratory for complex Hessian quotient equations on flat tori.
//!
//! The equation solved throughout is
//! `S_n(X) = (c / C(n,m)) S_m(X) + b f`, with `X = χ_t + i∂∂̄φ` Hermitian
//! positive definite relative to a Kähler metric `ω`, together with its
//! degenerations as `t → 0` and a multiplicative variant `S_n = e^b g S_m / C(n,m)`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation; index loops
// mirror the component formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod degiorgi;
pub mod error;
pub mod fake_boundary;
pub mod hermitian;
pub mod pointwise;
pub mod selftest;
pub mod solver;
pub mod symmetric;
pub mod torus;

pub use error::{Error, Result};
