use crate::error::{Error, Result};

/// Uniform grid on the unit flat torus `[0,1)^{2n}`, `N` points per real axis.
///
/// Axis order is `x₁, y₁, …, x_n, y_n` with `zⱼ = xⱼ + i yⱼ`; storage is row-major,
/// so the last axis (`y_n`) is contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    n: usize,
    size: usize,
}

impl TorusGrid {
    pub fn new(n: usize, size: usize) -> Result<Self> {
        if !(2..=4).contains(&n) {
            return Err(Error::Input(format!("complex dimension must be in 2..=4, got {n}")));
        }
        if size < 4 || !size.is_power_of_two() {
            return Err(Error::Input(format!("grid size must be a power of two >= 4, got {size}")));
        }
        let _ = size.checked_pow(2 * n as u32).ok_or_else(|| Error::Input("grid too large".into()))?;
        Ok(TorusGrid { n, size })
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Points per real axis.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of real axes.
    pub fn axes(&self) -> usize {
        2 * self.n
    }

    pub fn len(&self) -> usize {
        self.size.pow(2 * self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.size as f64
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Stride of real axis `axis` in the flat array.
    pub fn stride(&self, axis: usize) -> usize {
        self.size.pow((self.axes() - 1 - axis) as u32)
    }

    /// Integer coordinates of a flat index.
    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.axes()).rev() {
            out[a] = idx % self.size;
            idx /= self.size;
        }
    }

    /// Real coordinates in `[0,1)` of a flat index, ordered `x₁, y₁, …`.
    pub fn coords(&self, idx: usize, out: &mut [f64]) {
        let mut mi = vec![0usize; self.axes()];
        self.multi_index(idx, &mut mi);
        for (o, &i) in out.iter_mut().zip(&mi) {
            *o = i as f64 / self.size as f64;
        }
    }

    /// Flat index of the point shifted by `shift` cells along each axis.
    pub fn translate_index(&self, idx: usize, shift: &[usize]) -> usize {
        let mut mi = vec![0usize; self.axes()];
        self.multi_index(idx, &mut mi);
        mi.iter().zip(shift).fold(0, |acc, (&i, &s)| acc * self.size + (i + s) % self.size)
    }
}

/// Real scalar sampled on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!("field has {} values, grid has {} points", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("field value at point {i} is not finite")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: TorusGrid, v: f64) -> Self {
        ScalarField { grid, values: vec![v; grid.len()] }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x₁, y₁, …)` at every grid point.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.axes()];
        let values = (0..grid.len())
            .map(|i| {
                grid.coords(i, &mut x);
                f(&x)
            })
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check_grid(other)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Input("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| v * s)
    }

    pub fn add_scaled(&self, s: f64, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Grid average (the integral over the unit torus with `dV`).
    pub fn mean(&self) -> f64 {
        crate::torus::ordered_sum(&self.values) / self.values.len() as f64
    }

    /// Copy shifted so the mean vanishes.
    pub fn mean_zero(&self) -> ScalarField {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Copy shifted so the maximum is zero.
    pub fn sup_zero(&self) -> ScalarField {
        let m = self.max();
        self.map(|v| v - m)
    }

    /// Field translated by whole cells: `out(x) = self(x + shift·h)`.
    pub fn translated(&self, shift: &[usize]) -> ScalarField {
        let values = (0..self.grid.len()).map(|i| self.values[self.grid.translate_index(i, shift)]).collect();
        ScalarField { grid: self.grid, values }
    }
}

/// Periodic distance along one axis of the unit circle.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = TorusGrid::new(2, 4).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.stride(0), 64);
        assert_eq!(g.stride(3), 1);
        let mut mi = [0; 4];
        g.multi_index(64 + 2, &mut mi);
        assert_eq!(mi, [1, 0, 0, 2]);
        assert!(TorusGrid::new(2, 6).is_err());
        assert!(TorusGrid::new(1, 8).is_err());
    }

    #[test]
    fn translation_is_periodic() {
        let g = TorusGrid::new(2, 4).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] + 10.0 * x[3]);
        let t = f.translated(&[4, 0, 0, 4]);
        assert_eq!(t, f);
        let t = f.translated(&[1, 0, 0, 0]);
        assert_eq!(t.values()[0], 0.25);
    }

    #[test]
    fn normalizations() {
        let g = TorusGrid::new(2, 4).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0]);
        assert!(f.mean_zero().mean().abs() < 1e-15);
        assert_eq!(f.sup_zero().max(), 0.0);
        assert!((circle_distance(0.9, 0.1) - 0.2).abs() < 1e-15);
    }
}
