use super::AbpError;

/// Uniform grid points of the closed ball `B_r(0) ⊂ ℝⁿ`, `n ∈ {2, 3}`.
///
/// Points are the nodes `(i − half) h` of the bounding box that satisfy
/// `|x| ≤ r`, kept in lexicographic box order. A point is interior when its
/// whole `3ⁿ` neighbourhood lies in the ball; the rest form the boundary layer.
#[derive(Debug, Clone)]
pub struct BallGrid {
    dim: usize,
    radius: f64,
    spacing: [f64; 3],
    half: [usize; 3],
    slot: Vec<u32>,
    points: Vec<[usize; 3]>,
    interior: Vec<bool>,
}

const EMPTY: u32 = u32::MAX;

impl BallGrid {
    /// `spacing[2]` is ignored for `dim = 2`.
    pub fn new(dim: usize, radius: f64, spacing: [f64; 3]) -> Result<Self, AbpError> {
        if dim != 2 && dim != 3 {
            return Err(AbpError::Dimension(dim));
        }
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(AbpError::Radius(radius));
        }
        let mut spacing = spacing;
        if dim == 2 {
            spacing[2] = 1.0;
        }
        if spacing[..dim].iter().any(|&h| !(h > 0.0 && h < radius)) {
            return Err(AbpError::Spacing(spacing));
        }
        let mut half = [0usize; 3];
        for a in 0..dim {
            half[a] = (radius / spacing[a] + 1e-9).floor() as usize;
        }
        let counts = half.map(|h| 2 * h + 1);
        let total = counts.iter().product::<usize>();
        if total >= EMPTY as usize {
            return Err(AbpError::Spacing(spacing));
        }
        let mut slot = vec![EMPTY; total];
        let mut points = Vec::new();
        let r2 = radius * radius * (1.0 + 1e-12);
        for i in 0..counts[0] {
            for j in 0..counts[1] {
                for l in 0..counts[2] {
                    let p = [i, j, l];
                    let x = Self::offset_of(&half, &spacing, p);
                    if x.iter().map(|c| c * c).sum::<f64>() <= r2 {
                        slot[(i * counts[1] + j) * counts[2] + l] = points.len() as u32;
                        points.push(p);
                    }
                }
            }
        }
        let mut grid = Self {
            dim,
            radius,
            spacing,
            half,
            slot,
            points,
            interior: Vec::new(),
        };
        grid.interior = (0..grid.points.len())
            .map(|k| grid.neighbourhood(k).iter().all(|n| n.is_some()))
            .collect();
        Ok(grid)
    }

    fn offset_of(half: &[usize; 3], spacing: &[f64; 3], p: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| (p[a] as f64 - half[a] as f64) * spacing[a])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn half(&self) -> [usize; 3] {
        self.half
    }

    /// Box sizes `2·half + 1` per axis (1 on the unused axis when `dim = 2`).
    pub fn counts(&self) -> [usize; 3] {
        self.half.map(|h| 2 * h + 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    /// Box index `(i, j, l)` of ball point `k`.
    pub fn box_index(&self, k: usize) -> [usize; 3] {
        self.points[k]
    }

    /// Position in the lexicographic bounding box, as used by [`crate::grid3::ChartBox`] samples.
    pub fn box_slot(&self, k: usize) -> usize {
        let [_, cy, ct] = self.counts();
        let [i, j, l] = self.points[k];
        (i * cy + j) * ct + l
    }

    pub fn coords(&self, k: usize) -> [f64; 3] {
        Self::offset_of(&self.half, &self.spacing, self.points[k])
    }

    /// Index of the ball point at the center.
    pub fn center(&self) -> usize {
        self.slot_of(self.half).expect("center is in the ball")
    }

    fn slot_of(&self, p: [usize; 3]) -> Option<usize> {
        let [_, cy, ct] = self.counts();
        match self.slot[(p[0] * cy + p[1]) * ct + p[2]] {
            EMPTY => None,
            s => Some(s as usize),
        }
    }

    /// Ball point at offset `delta` (in grid steps) from point `k`, if any.
    pub fn neighbour(&self, k: usize, delta: [i64; 3]) -> Option<usize> {
        let p = self.points[k];
        let counts = self.counts();
        let mut q = [0usize; 3];
        for a in 0..3 {
            let v = p[a] as i64 + delta[a];
            if v < 0 || v >= counts[a] as i64 {
                return None;
            }
            q[a] = v as usize;
        }
        self.slot_of(q)
    }

    fn neighbourhood(&self, k: usize) -> Vec<Option<usize>> {
        let span: Vec<i64> = vec![-1, 0, 1];
        let t_span: Vec<i64> = if self.dim == 3 { span.clone() } else { vec![0] };
        let mut out = Vec::with_capacity(27);
        for &a in &span {
            for &b in &span {
                for &c in &t_span {
                    out.push(self.neighbour(k, [a, b, c]));
                }
            }
        }
        out
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.interior[k]
    }

    pub fn boundary_layer(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| !self.interior[k])
    }
}

/// Values of `v` on a [`BallGrid`], optionally with exact first and second derivatives.
/// Without them, derivatives come from central differences at interior points.
#[derive(Debug, Clone)]
pub struct BallField {
    grid: BallGrid,
    values: Vec<f64>,
    derivatives: Option<(Vec<[f64; 3]>, Vec<[[f64; 3]; 3]>)>,
}

impl BallField {
    pub fn new(grid: BallGrid, values: Vec<f64>) -> Result<Self, AbpError> {
        if values.len() != grid.len() {
            return Err(AbpError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(AbpError::NonFinite(grid.coords(k)));
        }
        Ok(Self {
            grid,
            values,
            derivatives: None,
        })
    }

    pub fn from_fn(grid: BallGrid, f: impl Fn([f64; 3]) -> f64) -> Result<Self, AbpError> {
        let values = (0..grid.len()).map(|k| f(grid.coords(k))).collect();
        Self::new(grid, values)
    }

    /// Attaches exact gradients and Hessians (unused components zero when `dim = 2`).
    pub fn with_derivatives(
        mut self,
        gradients: Vec<[f64; 3]>,
        hessians: Vec<[[f64; 3]; 3]>,
    ) -> Result<Self, AbpError> {
        for len in [gradients.len(), hessians.len()] {
            if len != self.grid.len() {
                return Err(AbpError::Length {
                    expected: self.grid.len(),
                    got: len,
                });
            }
        }
        self.derivatives = Some((gradients, hessians));
        Ok(self)
    }

    pub fn grid(&self) -> &BallGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn has_exact_derivatives(&self) -> bool {
        self.derivatives.is_some()
    }

    /// Gradient at `k`; `None` for boundary-layer points without exact derivatives.
    pub fn gradient(&self, k: usize) -> Option<[f64; 3]> {
        if let Some((g, _)) = &self.derivatives {
            return Some(g[k]);
        }
        if !self.grid.is_interior(k) {
            return None;
        }
        let h = self.grid.spacing();
        let mut g = [0.0; 3];
        for (a, ga) in g.iter_mut().enumerate().take(self.grid.dim()) {
            let mut d = [0i64; 3];
            d[a] = 1;
            let p = self.grid.neighbour(k, d)?;
            d[a] = -1;
            let m = self.grid.neighbour(k, d)?;
            *ga = (self.values[p] - self.values[m]) / (2.0 * h[a]);
        }
        Some(g)
    }

    /// Hessian at `k`; `None` for boundary-layer points without exact derivatives.
    pub fn hessian(&self, k: usize) -> Option<[[f64; 3]; 3]> {
        if let Some((_, hs)) = &self.derivatives {
            return Some(hs[k]);
        }
        if !self.grid.is_interior(k) {
            return None;
        }
        let h = self.grid.spacing();
        let n = self.grid.dim();
        let v = |d: [i64; 3]| self.grid.neighbour(k, d).map(|i| self.values[i]);
        let mut out = [[0.0; 3]; 3];
        for a in 0..n {
            let mut d = [0i64; 3];
            d[a] = 1;
            let p = v(d)?;
            d[a] = -1;
            let m = v(d)?;
            out[a][a] = (p - 2.0 * self.values[k] + m) / (h[a] * h[a]);
            for b in (a + 1)..n {
                let corner = |sa: i64, sb: i64| {
                    let mut d = [0i64; 3];
                    d[a] = sa;
                    d[b] = sb;
                    v(d)
                };
                let m = (corner(1, 1)? - corner(1, -1)? - corner(-1, 1)? + corner(-1, -1)?) / (4.0 * h[a] * h[b]);
                out[a][b] = m;
                out[b][a] = m;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_counts_and_layers() {
        let g = BallGrid::new(2, 1.0, [0.1, 0.1, 0.0]).unwrap();
        assert_eq!(g.half(), [10, 10, 0]);
        assert_eq!(g.coords(g.center()), [0.0, 0.0, 0.0]);
        // lattice points of radius 10 in a disc: Gauss circle count
        assert_eq!(g.len(), 317);
        assert!(g.is_interior(g.center()));
        for k in g.boundary_layer() {
            let x = g.coords(k);
            assert!(x[0].hypot(x[1]) > 1.0 - 0.1 * 2f64.sqrt() - 1e-12);
        }
    }

    #[test]
    fn central_differences_are_exact_on_quadratics() {
        let g = BallGrid::new(3, 0.5, [0.05, 0.04, 0.1]).unwrap();
        let f = BallField::from_fn(g, |x| 1.0 + x[0] - 2.0 * x[2] + x[0] * x[0] + 3.0 * x[1] * x[2]).unwrap();
        let c = f.grid().center();
        let gr = f.gradient(c).unwrap();
        let he = f.hessian(c).unwrap();
        for (a, b) in gr.iter().zip([1.0, 0.0, -2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((he[0][0] - 2.0).abs() < 1e-10);
        assert!((he[1][2] - 3.0).abs() < 1e-10);
        assert!(he[0][1].abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(BallGrid::new(4, 0.5, [0.1; 3]), Err(AbpError::Dimension(4))));
        assert!(matches!(BallGrid::new(2, 1.5, [0.1; 3]), Err(AbpError::Radius(_))));
        let g = BallGrid::new(2, 0.5, [0.1; 3]).unwrap();
        assert!(BallField::new(g, vec![0.0; 3]).is_err());
    }
}
