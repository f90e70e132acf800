//! Elementary symmetric polynomials and the cone/concavity inequalities built on them.
//!
//! Everything here works on plain eigenvalue vectors. `S_k` is evaluated with the
//! usual O(nk) product recurrence; negative orders and orders above the length
//! evaluate to zero, `S_0 = 1`.

use std::ops::Deref;

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Eigenvalue vector of a Hermitian form relative to a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Input(format!("spectrum needs complex dimension >= 2, got {}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("spectrum entry {i} is not finite")));
        }
        Ok(Spectrum(values))
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Entrywise reciprocal (eigenvalues relative to the inverse form).
    pub fn reciprocal(&self) -> Spectrum {
        Spectrum(self.0.iter().map(|v| 1.0 / v).collect())
    }
}

impl Deref for Spectrum {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Degrees below this use a stack buffer in the recurrences.
const STACK_DEGREE: usize = 9;

/// `S_k` over any commutative ring-like scalar (used with `f64` and exact rationals).
pub fn elementary_sym_generic<T>(k: isize, values: &[T]) -> T
where
    T: Copy + Zero + One + std::ops::Mul<Output = T>,
{
    if k < 0 || k as usize > values.len() {
        return T::zero();
    }
    let k = k as usize;
    let mut stack = [T::zero(); STACK_DEGREE];
    let mut heap = Vec::new();
    let e: &mut [T] = if k < STACK_DEGREE {
        &mut stack[..=k]
    } else {
        heap.resize(k + 1, T::zero());
        &mut heap
    };
    e[0] = T::one();
    for (count, &x) in values.iter().enumerate() {
        let top = k.min(count + 1);
        for j in (1..=top).rev() {
            e[j] = e[j] + x * e[j - 1];
        }
    }
    e[k]
}

/// `S_k(λ)`.
pub fn elementary_sym(k: isize, values: &[f64]) -> f64 {
    elementary_sym_generic(k, values)
}

/// All of `S_0, …, S_n` in one pass.
pub fn elementary_sym_all(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (count, &x) in values.iter().enumerate() {
        for j in (1..=count + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `S_{k;i}(λ)`: `S_k` with entry `i` set to zero.
pub fn sym_without(k: isize, values: &[f64], i: usize) -> f64 {
    sym_without_generic(k, values, i)
}

pub(crate) fn sym_without_generic<T>(k: isize, values: &[T], i: usize) -> T
where
    T: Copy + Zero + One + std::ops::Mul<Output = T>,
{
    if k < 0 || k as usize >= values.len() {
        return T::zero();
    }
    let k = k as usize;
    let mut stack = [T::zero(); STACK_DEGREE];
    let mut heap = Vec::new();
    let e: &mut [T] = if k < STACK_DEGREE {
        &mut stack[..=k]
    } else {
        heap.resize(k + 1, T::zero());
        &mut heap
    };
    e[0] = T::one();
    let mut count = 0;
    for (idx, &x) in values.iter().enumerate() {
        if idx == i {
            continue;
        }
        let top = k.min(count + 1);
        for j in (1..=top).rev() {
            e[j] = e[j] + x * e[j - 1];
        }
        count += 1;
    }
    e[k]
}

/// `S_{k;i_1⋯i_s}(λ)`: `S_k` with the listed entries zeroed.
pub fn elementary_sym_excluding(k: isize, values: &[f64], excluded: &[usize]) -> Result<f64> {
    let n = values.len();
    let mut seen = vec![false; n];
    for &i in excluded {
        if i >= n {
            return Err(Error::Input(format!("excluded index {i} out of range 0..{n}")));
        }
        if seen[i] {
            return Err(Error::Input(format!("excluded index {i} repeated")));
        }
        seen[i] = true;
    }
    let kept: Vec<f64> = values.iter().zip(&seen).filter(|(_, &s)| !s).map(|(&v, _)| v).collect();
    Ok(elementary_sym(k, &kept))
}

/// Largest `k` with `S_1, …, S_k` all strictly positive (0 if `S_1 <= 0`).
pub fn gamma_cone_level(values: &[f64]) -> usize {
    let e = elementary_sym_all(values);
    e.iter().skip(1).take_while(|&&v| v > 0.0).count()
}

/// Whether `λ ∈ Γ_n`, i.e. every entry is strictly positive.
pub fn in_gamma_n(values: &[f64]) -> bool {
    gamma_cone_level(values) == values.len()
}

/// Binomial coefficient `C(n, k)` as a float, zero outside `0..=n`.
pub fn binomial(n: usize, k: isize) -> f64 {
    if k < 0 || k as usize > n {
        return 0.0;
    }
    let k = (k as usize).min(n - k as usize);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `S_k(λ) / C(n, k)`; zero when `k` is out of range.
pub fn maclaurin_normalized(k: isize, values: &[f64]) -> f64 {
    let c = binomial(values.len(), k);
    if c == 0.0 {
        0.0
    } else {
        elementary_sym(k, values) / c
    }
}

/// Newton's inequality slack `m_k² − m_{k−1} m_{k+1}` for normalized `m_j`.
pub fn newton_maclaurin_gap(k: isize, values: &[f64]) -> f64 {
    let mk = maclaurin_normalized(k, values);
    mk * mk - maclaurin_normalized(k - 1, values) * maclaurin_normalized(k + 1, values)
}

/// `ln(S_n(λ) / (S_m(λ) + a))` on `Γ_n`.
pub fn quotient_log(values: &[f64], m: isize, a: f64) -> Result<f64> {
    if !in_gamma_n(values) {
        return Err(Error::Domain("quotient_log needs λ in Γ_n".into()));
    }
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("quotient_log needs a >= 0, got {a}")));
    }
    let n = values.len() as isize;
    let top = elementary_sym(n, values);
    let bottom = elementary_sym(m, values) + a;
    Ok((top / bottom).ln())
}

/// Both sides of the strong concavity inequality for `S_m` at `λ ∈ Γ_n`.
///
/// Left: `Σ S_{m−1;i}/λ_i |ξ_i|² + Σ_{i≠j} S_{m−2;ij} ξ_i ξ̄_j`.
/// Right: `|Σ S_{m−1;i} ξ_i|² / S_m`.
pub fn strong_concavity_sides(values: &[f64], xi: &[Complex64], m: isize) -> Result<(f64, f64)> {
    let n = values.len();
    if xi.len() != n {
        return Err(Error::Input(format!("ξ has length {}, expected {n}", xi.len())));
    }
    if values.contains(&0.0) {
        return Err(Error::Domain("strong concavity needs nonzero eigenvalues".into()));
    }
    if !in_gamma_n(values) {
        return Err(Error::Domain("strong concavity needs λ in Γ_n".into()));
    }
    let first: Vec<f64> = (0..n).map(|i| sym_without(m - 1, values, i)).collect();
    let mut lhs = 0.0;
    for i in 0..n {
        lhs += first[i] / values[i] * xi[i].norm_sqr();
    }
    if m >= 2 {
        for i in 0..n {
            for j in (i + 1)..n {
                let kept: Vec<f64> =
                    values.iter().enumerate().filter(|&(idx, _)| idx != i && idx != j).map(|(_, &v)| v).collect();
                let coeff = elementary_sym(m - 2, &kept);
                lhs += 2.0 * coeff * (xi[i] * xi[j].conj()).re;
            }
        }
    }
    let sm = elementary_sym(m, values);
    let lin: Complex64 = first.iter().zip(xi).map(|(&s, &z)| z * s).sum();
    Ok((lhs, lin.norm_sqr() / sm))
}

/// `LHS − RHS` of the strong concavity inequality; nonnegative on `Γ_n`.
pub fn strong_concavity_gap(values: &[f64], xi: &[Complex64], m: isize) -> Result<f64> {
    strong_concavity_sides(values, xi, m).map(|(l, r)| l - r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn s0_is_one() {
        assert_eq!(elementary_sym(0, &[7.0, -3.0]), 1.0);
    }

    #[test]
    fn small_values() {
        assert_eq!(elementary_sym(3, &[1.0, 1.0, 1.0]), 1.0);
        assert_eq!(elementary_sym(2, &[1.0, 2.0, 3.0]), 11.0);
        assert_eq!(elementary_sym(4, &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(elementary_sym(-1, &[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn excluding() {
        assert_eq!(elementary_sym_excluding(1, &[5.0, 2.0, 3.0], &[0]).unwrap(), 5.0);
        assert_eq!(elementary_sym_excluding(2, &[1.5, -2.0, 4.0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(elementary_sym_excluding(2, &[1.0, 2.0, 3.0], &[0]).unwrap(), 6.0);
        assert_eq!(elementary_sym_excluding(-1, &[1.0, 2.0, 3.0], &[0, 1]).unwrap(), 0.0);
        assert!(elementary_sym_excluding(1, &[1.0, 2.0], &[2]).is_err());
        assert!(elementary_sym_excluding(1, &[1.0, 2.0], &[1, 1]).is_err());
        assert_eq!(sym_without(2, &[1.0, 2.0, 3.0], 0), 6.0);
    }

    #[test]
    fn cone_levels() {
        assert_eq!(gamma_cone_level(&[1.0, 1.0, 1.0]), 3);
        assert_eq!(gamma_cone_level(&[3.0, 2.0, -1.0]), 2);
        assert_eq!(gamma_cone_level(&[-1.0, -1.0]), 0);
    }

    #[test]
    fn maclaurin() {
        assert_eq!(maclaurin_normalized(1, &[2.0, 4.0]), 3.0);
        assert_eq!(maclaurin_normalized(2, &[1.0, 1.0, 1.0]), 1.0);
        assert_relative_eq!(maclaurin_normalized(2, &[1.0, 2.0, 3.0]), 11.0 / 3.0);
        assert_eq!(newton_maclaurin_gap(1, &[1.0, 1.0, 1.0]), 0.0);
        assert_relative_eq!(newton_maclaurin_gap(1, &[1.0, 2.0, 3.0]), 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(newton_maclaurin_gap(1, &[2.0, 2.0]), 0.0);
    }

    #[test]
    fn quotient_log_values() {
        assert_eq!(quotient_log(&[1.0; 4], 0, 0.0).unwrap(), 0.0);
        assert_eq!(quotient_log(&[2.0, 2.0], 1, 0.0).unwrap(), 0.0);
        assert_eq!(quotient_log(&[1.0, 4.0], 0, 3.0).unwrap(), 0.0);
        assert!(quotient_log(&[1.0, -4.0], 0, 3.0).is_err());
    }

    #[test]
    fn strong_concavity_examples() {
        let zero = vec![Complex64::new(0.0, 0.0); 3];
        assert_eq!(strong_concavity_gap(&[1.0, 2.0, 3.0], &zero, 2).unwrap(), 0.0);
        let e1 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        assert_relative_eq!(strong_concavity_gap(&[1.0, 1.0, 1.0], &e1, 1).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert!(strong_concavity_gap(&[1.0, 0.0, 1.0], &e1, 1).is_err());
        assert!(strong_concavity_gap(&[1.0, -1.0, 1.0], &e1, 1).is_err());
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(vec![1.0]).is_err());
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
        let s = Spectrum::new(vec![2.0, 4.0]).unwrap();
        assert_eq!(s.reciprocal().values(), &[0.5, 0.25]);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(5, 6), 0.0);
        assert_eq!(binomial(5, -1), 0.0);
    }
}
