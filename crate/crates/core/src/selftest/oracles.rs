//! Brute-force reference implementations used to cross-check the fast paths.
//!
//! Both oracles are generic over the scalar so they can run over exact
//! rationals, where agreement is checked with `==`.

use num_rational::Ratio;
use num_traits::{One, Zero};

/// Exact rational scalar for oracle comparisons.
pub type Exact = Ratio<i128>;

/// `S_k` as the sum over all `k`-subsets of the product of their entries.
pub fn sym_by_subsets<T>(k: isize, values: &[T]) -> T
where
    T: Copy + Zero + One + std::ops::Mul<Output = T>,
{
    let n = values.len();
    if k < 0 || k as usize > n {
        return T::zero();
    }
    let mut total = T::zero();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as isize != k {
            continue;
        }
        let prod = (0..n).filter(|i| mask & (1 << i) != 0).fold(T::one(), |acc, i| acc * values[i]);
        total = total + prod;
    }
    total
}

/// Element of the exterior algebra on `dz_1, dz̄_1, …, dz_n, dz̄_n`, stored densely
/// by generator bitmask (bit `2j` is `dz_j`, bit `2j+1` is `dz̄_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grassmann<T> {
    generators: usize,
    coeffs: Vec<T>,
}

impl<T> Grassmann<T>
where
    T: Copy + Zero + One + PartialEq + std::ops::Mul<Output = T> + std::ops::Neg<Output = T>,
{
    pub fn zero(generators: usize) -> Self {
        Grassmann { generators, coeffs: vec![T::zero(); 1 << generators] }
    }

    pub fn one(generators: usize) -> Self {
        let mut g = Self::zero(generators);
        g.coeffs[0] = T::one();
        g
    }

    /// `Σ_j μ_j dz_j ∧ dz̄_j` (the factor `i` is common to every term and dropped).
    pub fn diagonal_form(mu: &[T]) -> Self {
        let mut g = Self::zero(2 * mu.len());
        for (j, &v) in mu.iter().enumerate() {
            g.coeffs[0b11 << (2 * j)] = v;
        }
        g
    }

    pub fn coeff(&self, mask: usize) -> T {
        self.coeffs[mask]
    }

    pub fn scale(&self, s: T) -> Self {
        Grassmann { generators: self.generators, coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.generators, other.generators);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a + b).collect();
        Grassmann { generators: self.generators, coeffs }
    }

    /// Wedge product with the sign from reordering anticommuting generators.
    pub fn wedge(&self, other: &Self) -> Self {
        assert_eq!(self.generators, other.generators);
        let mut out = Self::zero(self.generators);
        for (a, &ca) in self.coeffs.iter().enumerate() {
            if ca == T::zero() {
                continue;
            }
            for (b, &cb) in other.coeffs.iter().enumerate() {
                if cb == T::zero() || a & b != 0 {
                    continue;
                }
                // each generator of b passes every generator of a with a higher index
                let swaps: u32 =
                    (0..self.generators).filter(|&i| b & (1 << i) != 0).map(|i| (a >> (i + 1)).count_ones()).sum();
                let term = ca * cb;
                let term = if swaps.is_multiple_of(2) { term } else { -term };
                out.coeffs[a | b] = out.coeffs[a | b] + term;
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::one(self.generators), |acc, _| acc.wedge(self))
    }
}

/// Cone margin by expanding `nχ^{n−1} − m·coeff·χ^{m−1}∧ω^{n−m}` over exterior
/// monomials, for diagonal `χ = diag(μ)` and `ω = I`.
///
/// Each `(n−1, n−1)` monomial omitting the index `i` is normalized by its
/// coefficient in `n·ω^{n−1}`; the result is the minimum over `i`.
pub fn wedge_cone_margin<T>(mu: &[T], coeff: T, m: usize) -> T
where
    T: Copy
        + Zero
        + One
        + PartialEq
        + PartialOrd
        + std::ops::Mul<Output = T>
        + std::ops::Neg<Output = T>
        + std::ops::Div<Output = T>,
{
    let n = mu.len();
    assert!(n >= 1 && m < n);
    let int = |k: usize| (0..k).fold(T::zero(), |acc, _| acc + T::one());
    let chi = Grassmann::diagonal_form(mu);
    let omega = Grassmann::diagonal_form(&vec![T::one(); n]);
    let left = chi.pow(n - 1).scale(int(n));
    // the m·coeff factor kills the second term at m = 0
    let right = match m {
        0 => Grassmann::zero(2 * n),
        _ => chi.pow(m - 1).wedge(&omega.pow(n - m)),
    };
    let form = left.add(&right.scale(-(int(m) * coeff)));
    let reference = omega.pow(n - 1).scale(int(n));
    let full = (1usize << (2 * n)) - 1;
    (0..n)
        .map(|i| {
            let mask = full & !(0b11 << (2 * i));
            form.coeff(mask) / reference.coeff(mask)
        })
        .fold(None, |best: Option<T>, v| match best {
            Some(b) if b <= v => Some(b),
            _ => Some(v),
        })
        .expect("nonempty spectrum")
}
