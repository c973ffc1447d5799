use super::{Grid3, GridError};

/// Real-valued grid function on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    grid: Grid3,
    values: Vec<f64>,
}

/// Compensated (Neumaier) summation in fixed traversal order.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl ScalarField3 {
    /// Wraps `values`, rejecting wrong lengths and non-finite entries.
    pub fn new(grid: Grid3, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let field = Self { grid, values };
        field.check_finite()?;
        Ok(field)
    }

    pub(crate) fn from_raw(grid: Grid3, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid3, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y, t)` at the grid nodes.
    pub fn from_fn(grid: Grid3, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let [x, y, t] = grid.coords(idx);
                f(x, y, t)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
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

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    /// First non-finite entry, reported with its grid index.
    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(idx) => {
                let (i, j, k) = self.grid.unravel(idx);
                Err(GridError::NonFinite {
                    i,
                    j,
                    k,
                    value: self.values[idx],
                })
            }
        }
    }

    pub fn same_grid(&self, other: &Self) -> Result<(), GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch {
                a: self.grid,
                b: other.grid,
            });
        }
        Ok(())
    }

    /// Average over the grid (periodic trapezoid rule, unit volume).
    pub fn mean(&self) -> f64 {
        neumaier_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest index attaining the minimum.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (idx, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = idx;
            }
        }
        best
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        (neumaier_sum(self.values.iter().map(|v| v * v)) / self.values.len() as f64).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "zip_map over different grids");
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    /// Shifts so that the maximum is exactly zero.
    pub fn normalized_sup_zero(&self) -> Self {
        let m = self.max();
        let mut out = self.shift(-m);
        // v - max(v) is exactly 0 at the maximizer, but guard against -0.0 noise
        for v in out.values.iter_mut() {
            if *v > 0.0 {
                *v = 0.0;
            }
        }
        out
    }

    pub fn mean_zero(&self) -> Self {
        self.shift(-self.mean())
    }

    /// Stable fingerprint of the exact bit pattern, used to tie derived data to its source.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the raw bits
        let mut h: u64 = 0xcbf29ce484222325;
        for d in self.grid.dims() {
            h = (h ^ d as u64).wrapping_mul(0x100000001b3);
        }
        for v in &self.values {
            for b in v.to_bits().to_le_bytes() {
                h = (h ^ b as u64).wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}
