use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Axis, Direction, Grid3, GridError, ScalarField3, ThetaDirections};

/// Discretization of derivatives. Both are constant-coefficient convolutions on the
/// periodic grid, so operators built from either one commute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Trigonometric interpolation (FFT). Odd derivatives drop the Nyquist mode.
    #[default]
    Spectral,
    /// Second-order central differences.
    #[serde(alias = "finite-difference")]
    Fd,
}

/// Constant-coefficient operator of order at most two:
/// `zeroth + Σ first[a] ∂_a + Σ_ab second[a][b] ∂_a ∂_b` with `second` symmetric.
///
/// Pure second derivatives use the backend's compact second-difference, mixed ones
/// the product of first differences.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiffOp {
    pub zeroth: f64,
    pub first: [f64; 3],
    pub second: [[f64; 3]; 3],
}

impl DiffOp {
    pub fn identity() -> Self {
        Self {
            zeroth: 1.0,
            ..Self::default()
        }
    }

    pub fn first_along(v: [f64; 3]) -> Self {
        Self {
            first: v,
            ..Self::default()
        }
    }

    /// `∂_v ∂_w`, stored as the symmetrized product so that `(v, w)` and `(w, v)`
    /// produce bit-identical coefficients.
    pub fn second_along(v: [f64; 3], w: [f64; 3]) -> Self {
        let mut second = [[0.0; 3]; 3];
        for (a, row) in second.iter_mut().enumerate() {
            for (b, s) in row.iter_mut().enumerate() {
                *s = 0.5 * (v[a] * w[b] + w[a] * v[b]);
            }
        }
        Self {
            second,
            ..Self::default()
        }
    }

    pub fn derivative(dirs: &ThetaDirections, dir: Direction, order: u8) -> Self {
        let v = dirs.vector(dir);
        match order {
            1 => Self::first_along(v),
            2 => Self::second_along(v, v),
            _ => panic!("derivative order must be 1 or 2"),
        }
    }

    pub fn mixed(dirs: &ThetaDirections, a: Direction, b: Direction) -> Self {
        Self::second_along(dirs.vector(a), dirs.vector(b))
    }

    pub fn laplacian() -> Self {
        let mut op = Self::default();
        for a in 0..3 {
            op.second[a][a] = 1.0;
        }
        op
    }

    pub fn plus(mut self, other: &Self) -> Self {
        self.zeroth += other.zeroth;
        for a in 0..3 {
            self.first[a] += other.first[a];
            for b in 0..3 {
                self.second[a][b] += other.second[a][b];
            }
        }
        self
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.zeroth *= c;
        for a in 0..3 {
            self.first[a] *= c;
            for b in 0..3 {
                self.second[a][b] *= c;
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Nyquist {
    Keep,
    Drop,
}

struct Plans {
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

/// Per-axis symbol tables for one backend.
#[derive(Debug, Clone)]
pub(crate) struct AxisSymbols {
    /// Symbol of the first derivative (purely imaginary, stored as its imaginary part).
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub nyquist: usize,
}

/// Signed wavenumber of FFT bin `m` on `n` points; the Nyquist bin maps to `+n/2`.
pub(crate) fn wavenumber(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

impl AxisSymbols {
    fn new(n: usize, backend: Backend) -> Self {
        let nf = n as f64;
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for m in 0..n {
            let k = wavenumber(m, n) as f64;
            match backend {
                Backend::Spectral => {
                    d1[m] = if m == n / 2 { 0.0 } else { 2.0 * PI * k };
                    d2[m] = -(2.0 * PI * k).powi(2);
                }
                Backend::Fd => {
                    d1[m] = if m == n / 2 || m == 0 {
                        0.0
                    } else {
                        nf * (2.0 * PI * k / nf).sin()
                    };
                    d2[m] = -4.0 * nf * nf * (PI * k / nf).sin().powi(2);
                }
            }
        }
        Self {
            d1,
            d2,
            nyquist: n / 2,
        }
    }
}

/// Derivatives, Poisson solves and related spectral utilities on one grid.
pub struct Calculus {
    grid: Grid3,
    backend: Backend,
    plans: Plans,
    symbols: [AxisSymbols; 3],
}

impl std::fmt::Debug for Calculus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Calculus")
            .field("grid", &self.grid)
            .field("backend", &self.backend)
            .finish()
    }
}

impl Calculus {
    pub fn new(grid: Grid3, backend: Backend) -> Self {
        let mut planner = FftPlanner::new();
        let dims = grid.dims();
        let plans = Plans {
            forward: dims.map(|n| planner.plan_fft_forward(n)),
            inverse: dims.map(|n| planner.plan_fft_inverse(n)),
        };
        Self {
            grid,
            backend,
            plans,
            symbols: dims.map(|n| AxisSymbols::new(n, backend)),
        }
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    fn check(&self, f: &ScalarField3) -> Result<(), GridError> {
        if f.grid() != self.grid {
            return Err(GridError::GridMismatch {
                a: self.grid,
                b: f.grid(),
            });
        }
        f.check_finite()
    }

    /// In-place 3-D FFT (unnormalized in both directions).
    pub(crate) fn fft3(&self, data: &mut [Complex64], inverse: bool) {
        let [nx, ny, nt] = self.grid.dims();
        let plans = if inverse {
            &self.plans.inverse
        } else {
            &self.plans.forward
        };
        // t: contiguous lines
        let plan_t = &plans[2];
        data.par_chunks_mut(nt).for_each(|line| plan_t.process(line));
        // y: strided within each x-slab
        let plan_y = &plans[1];
        data.par_chunks_mut(ny * nt).for_each(|slab| {
            let mut line = vec![Complex64::default(); ny];
            for k in 0..nt {
                for j in 0..ny {
                    line[j] = slab[j * nt + k];
                }
                plan_y.process(&mut line);
                for j in 0..ny {
                    slab[j * nt + k] = line[j];
                }
            }
        });
        // x: gather into contiguous lines, transform, scatter back
        let plan_x = &plans[0];
        let mut buf = vec![Complex64::default(); data.len()];
        buf.par_chunks_mut(nx).enumerate().for_each(|(jk, line)| {
            for (i, c) in line.iter_mut().enumerate() {
                *c = data[i * ny * nt + jk];
            }
            plan_x.process(line);
        });
        data.par_chunks_mut(ny * nt).enumerate().for_each(|(i, slab)| {
            for (jk, c) in slab.iter_mut().enumerate() {
                *c = buf[jk * nx + i];
            }
        });
    }

    /// Forward transform of a real field.
    pub fn spectrum(&self, f: &ScalarField3) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft3(&mut data, false);
        data
    }

    /// Real part of the normalized inverse transform.
    pub(crate) fn from_spectrum(&self, mut data: Vec<Complex64>) -> ScalarField3 {
        self.fft3(&mut data, true);
        let norm = 1.0 / self.grid.len() as f64;
        ScalarField3::from_raw(self.grid, data.iter().map(|c| c.re * norm).collect())
    }

    /// Symbol of `op` at FFT bins `(mx, my, mt)`.
    pub(crate) fn symbol(&self, op: &DiffOp, m: [usize; 3]) -> Complex64 {
        let d1 = [0, 1, 2].map(|a| self.symbols[a].d1[m[a]]);
        let d2 = [0, 1, 2].map(|a| self.symbols[a].d2[m[a]]);
        let mut re = op.zeroth;
        let mut im = 0.0;
        for a in 0..3 {
            im += op.first[a] * d1[a];
            re += op.second[a][a] * d2[a];
            for b in (a + 1)..3 {
                // (i d1_a)(i d1_b) = -d1_a d1_b
                re -= 2.0 * op.second[a][b] * d1[a] * d1[b];
            }
        }
        Complex64::new(re, im)
    }

    pub(crate) fn apply_to_spectrum(&self, spec: &[Complex64], op: &DiffOp) -> ScalarField3 {
        let [_, ny, nt] = self.grid.dims();
        let out: Vec<Complex64> = spec
            .par_iter()
            .enumerate()
            .map(|(idx, &c)| {
                let k = idx % nt;
                let rest = idx / nt;
                c * self.symbol(op, [rest / ny, rest % ny, k])
            })
            .collect();
        self.from_spectrum(out)
    }

    /// Applies `op` to `f` with this backend.
    pub fn apply(&self, f: &ScalarField3, op: &DiffOp) -> Result<ScalarField3, GridError> {
        self.check(f)?;
        Ok(self.apply_unchecked(f, op))
    }

    pub(crate) fn apply_unchecked(&self, f: &ScalarField3, op: &DiffOp) -> ScalarField3 {
        match self.backend {
            Backend::Spectral => self.apply_to_spectrum(&self.spectrum(f), op),
            Backend::Fd => fd_apply(f, op),
        }
    }

    /// Applies several operators, sharing one forward transform.
    pub fn apply_many(&self, f: &ScalarField3, ops: &[DiffOp]) -> Result<Vec<ScalarField3>, GridError> {
        self.check(f)?;
        Ok(self.apply_many_unchecked(f, ops))
    }

    pub(crate) fn apply_many_unchecked(&self, f: &ScalarField3, ops: &[DiffOp]) -> Vec<ScalarField3> {
        match self.backend {
            Backend::Spectral => {
                let spec = self.spectrum(f);
                ops.iter().map(|op| self.apply_to_spectrum(&spec, op)).collect()
            }
            Backend::Fd => ops.iter().map(|op| fd_apply(f, op)).collect(),
        }
    }

    pub fn derivative(
        &self,
        f: &ScalarField3,
        dirs: &ThetaDirections,
        dir: Direction,
        order: u8,
    ) -> Result<ScalarField3, GridError> {
        self.apply(f, &DiffOp::derivative(dirs, dir, order))
    }

    pub fn mixed(
        &self,
        f: &ScalarField3,
        dirs: &ThetaDirections,
        a: Direction,
        b: Direction,
    ) -> Result<ScalarField3, GridError> {
        self.apply(f, &DiffOp::mixed(dirs, a, b))
    }

    /// Mean-zero `g` with `op g = f` on all nonzero modes.
    pub(crate) fn solve_symbol(
        &self,
        f: &ScalarField3,
        op: &DiffOp,
        nyquist: Nyquist,
    ) -> Result<ScalarField3, GridError> {
        let [_, ny, nt] = self.grid.dims();
        let ns = [0, 1, 2].map(|a| self.symbols[a].nyquist);
        let mut spec = self.spectrum(f);
        for (idx, c) in spec.iter_mut().enumerate() {
            let k = idx % nt;
            let rest = idx / nt;
            let m = [rest / ny, rest % ny, k];
            if idx == 0 || (nyquist == Nyquist::Drop && (0..3).any(|a| m[a] == ns[a])) {
                *c = Complex64::default();
                continue;
            }
            let s = self.symbol(op, m);
            if s.norm() == 0.0 {
                let dims = self.grid.dims();
                let w = [0, 1, 2].map(|a| wavenumber(m[a], dims[a]));
                return Err(GridError::SingularSymbol(w[0], w[1], w[2]));
            }
            *c /= s;
        }
        Ok(self.from_spectrum(spec))
    }

    /// Mean-zero solution of the flat periodic Poisson equation `Δg = f`.
    pub fn poisson_solve(&self, f: &ScalarField3) -> Result<ScalarField3, GridError> {
        self.check(f)?;
        let mean = f.mean();
        let tol = 1e-10;
        if mean.abs() > tol {
            return Err(GridError::NonZeroMean { mean, tol });
        }
        self.solve_symbol(f, &DiffOp::laplacian(), Nyquist::Keep)
    }

    /// Random trigonometric polynomial with modes `|k_a| ≤ max_mode`, scaled to sup norm `amplitude`.
    pub fn random_band_limited(&self, max_mode: usize, amplitude: f64, rng: &mut impl Rng) -> ScalarField3 {
        let dims = self.grid.dims();
        assert!(
            dims.iter().all(|&n| max_mode < n / 2),
            "max_mode must stay below the Nyquist index"
        );
        let [_, ny, nt] = dims;
        let mut spec = vec![Complex64::default(); self.grid.len()];
        for (idx, c) in spec.iter_mut().enumerate() {
            let k = idx % nt;
            let rest = idx / nt;
            let m = [rest / ny, rest % ny, k];
            if idx != 0 && (0..3).all(|a| wavenumber(m[a], dims[a]).unsigned_abs() as usize <= max_mode) {
                *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let f = self.from_spectrum(spec);
        let s = f.sup_norm();
        f.scale(if s > 0.0 { amplitude / s } else { 0.0 })
    }
}

fn fd_d1(f: &[f64], grid: Grid3, axis: Axis) -> Vec<f64> {
    let n = grid.dims()[axis.index()] as f64;
    let (di, dj, dk) = offsets(axis);
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = grid.unravel(idx);
            let (i, j, k) = (i as isize, j as isize, k as isize);
            let p = f[grid.index_wrapped(i + di, j + dj, k + dk)];
            let m = f[grid.index_wrapped(i - di, j - dj, k - dk)];
            0.5 * n * (p - m)
        })
        .collect()
}

fn fd_d2(f: &[f64], grid: Grid3, axis: Axis) -> Vec<f64> {
    let n = grid.dims()[axis.index()] as f64;
    let (di, dj, dk) = offsets(axis);
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = grid.unravel(idx);
            let (i, j, k) = (i as isize, j as isize, k as isize);
            let p = f[grid.index_wrapped(i + di, j + dj, k + dk)];
            let m = f[grid.index_wrapped(i - di, j - dj, k - dk)];
            n * n * (p - 2.0 * f[idx] + m)
        })
        .collect()
}

fn offsets(axis: Axis) -> (isize, isize, isize) {
    match axis {
        Axis::X => (1, 0, 0),
        Axis::Y => (0, 1, 0),
        Axis::T => (0, 0, 1),
    }
}

fn fd_apply(f: &ScalarField3, op: &DiffOp) -> ScalarField3 {
    let grid = f.grid();
    let v = f.values();
    let mut out: Vec<f64> = v.iter().map(|x| op.zeroth * x).collect();
    let mut acc = |coef: f64, g: &[f64]| {
        if coef != 0.0 {
            for (o, x) in out.iter_mut().zip(g) {
                *o += coef * x;
            }
        }
    };
    let needs_d1: Vec<bool> = (0..3)
        .map(|a| op.first[a] != 0.0 || (0..3).any(|b| b != a && op.second[a][b] != 0.0))
        .collect();
    let d1: Vec<Option<Vec<f64>>> = Axis::ALL
        .iter()
        .map(|&ax| needs_d1[ax.index()].then(|| fd_d1(v, grid, ax)))
        .collect();
    for ax in Axis::ALL {
        let a = ax.index();
        if let Some(g) = &d1[a] {
            acc(op.first[a], g);
        }
        if op.second[a][a] != 0.0 {
            acc(op.second[a][a], &fd_d2(v, grid, ax));
        }
        for bx in Axis::ALL {
            let b = bx.index();
            if b > a && op.second[a][b] != 0.0 {
                let db = d1[b].as_ref().expect("first difference computed");
                acc(2.0 * op.second[a][b], &fd_d1(db, grid, ax));
            }
        }
    }
    ScalarField3::from_raw(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize) -> Grid3 {
        Grid3::cube(n).unwrap()
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        for backend in [Backend::Spectral, Backend::Fd] {
            let g = cube(8);
            let c = Calculus::new(g, backend);
            let f = ScalarField3::constant(g, 3.25);
            let dirs = ThetaDirections::new(0.7);
            for dir in [Direction::Axis(Axis::T), Direction::FrameX, Direction::FrameY] {
                for order in [1, 2] {
                    assert!(c.derivative(&f, &dirs, dir, order).unwrap().sup_norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spectral_derivative_of_cosine() {
        let g = Grid3::new(16, 8, 8).unwrap();
        let c = Calculus::new(g, Backend::Spectral);
        let f = ScalarField3::from_fn(g, |x, _, _| (2.0 * PI * x).cos());
        let exact = ScalarField3::from_fn(g, |x, _, _| -2.0 * PI * (2.0 * PI * x).sin());
        let d = c.derivative(&f, &ThetaDirections::new(0.0), Direction::Axis(Axis::X), 1).unwrap();
        let err = d.zip_map(&exact, |a, b| a - b).sup_norm();
        assert!(err <= 1e-12, "err {err:e}");
    }

    #[test]
    fn frame_x_at_right_angle_is_minus_y_derivative() {
        let g = cube(16);
        let c = Calculus::new(g, Backend::Spectral);
        let f = ScalarField3::from_fn(g, |x, _, _| (2.0 * PI * x).cos());
        let dirs = ThetaDirections::new(PI / 2.0);
        let d = c.derivative(&f, &dirs, Direction::FrameX, 1).unwrap();
        assert!(d.sup_norm() <= 1e-12);
    }

    #[test]
    fn rejects_non_finite_input() {
        let g = cube(8);
        let c = Calculus::new(g, Backend::Spectral);
        let mut f = ScalarField3::zeros(g);
        f.values_mut()[g.index(1, 2, 3)] = f64::INFINITY;
        let err = c.apply(&f, &DiffOp::laplacian()).unwrap_err();
        assert!(matches!(err, GridError::NonFinite { i: 1, j: 2, k: 3, .. }));
    }

    #[test]
    fn fd_stencils_match_their_symbols() {
        let g = Grid3::new(8, 10, 12).unwrap();
        let fd = Calculus::new(g, Backend::Fd);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = fd.random_band_limited(3, 1.0, &mut rng);
        let dirs = ThetaDirections::new(0.4);
        let op = DiffOp::mixed(&dirs, Direction::FrameX, Direction::Axis(Axis::T))
            .plus(&DiffOp::derivative(&dirs, Direction::FrameY, 2))
            .plus(&DiffOp::first_along([0.3, -0.2, 1.0]));
        let stencil = fd.apply(&f, &op).unwrap();
        let via_symbol = fd.apply_to_spectrum(&fd.spectrum(&f), &op);
        assert!(stencil.zip_map(&via_symbol, |a, b| a - b).sup_norm() < 1e-11);
    }

    #[test]
    fn poisson_single_mode_and_rejections() {
        let g = cube(16);
        let c = Calculus::new(g, Backend::Spectral);
        let f = ScalarField3::from_fn(g, |x, _, _| (2.0 * PI * x).cos());
        let sol = c.poisson_solve(&f).unwrap();
        let exact = f.scale(-1.0 / (4.0 * PI * PI));
        assert!(sol.zip_map(&exact, |a, b| a - b).sup_norm() < 1e-14);
        assert!(c.poisson_solve(&ScalarField3::zeros(g)).unwrap().sup_norm() == 0.0);
        let bad = f.shift(0.1);
        assert!(matches!(c.poisson_solve(&bad), Err(GridError::NonZeroMean { .. })));
    }

    #[test]
    fn fft_round_trip() {
        let g = Grid3::new(8, 10, 12).unwrap();
        let c = Calculus::new(g, Backend::Spectral);
        let f = ScalarField3::from_fn(g, |x, y, t| (x * 3.0 + y * y - t).sin() + x * t);
        let back = c.from_spectrum(c.spectrum(&f));
        assert!(back.zip_map(&f, |a, b| a - b).sup_norm() < 1e-13);
    }
}
