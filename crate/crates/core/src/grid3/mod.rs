//! Periodic scalar calculus on the unit 3-torus with coordinates `(x, y, t)`.
//!
//! Every axis has period 1. The circle factor, usually parametrised by
//! `t ∈ [0, 2π)`, is rescaled to unit length as well; with that convention the
//! reduced equation keeps its coefficients exactly as written, and any other
//! fixed period would only multiply the `u_t` and `u_tt` terms by constants.
//!
//! Values are stored x-major, y-middle, t-minor: index `(i * n_y + j) * n_t + k`.

mod calculus;
mod field;
mod interp;
mod io;

pub use calculus::{Backend, Calculus, DiffOp};
pub(crate) use calculus::Nyquist;
pub use field::ScalarField3;
pub use interp::{ChartBox, TrigInterpolant};
pub use io::{read_field, read_field_binary, read_field_csv, write_field_binary, write_field_csv};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid size {axis}={n} must be even and at least 8")]
    BadSize { axis: &'static str, n: usize },
    #[error("field has {got} values, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at index ({i}, {j}, {k})")]
    NonFinite { i: usize, j: usize, k: usize, value: f64 },
    #[error("grid mismatch: {a:?} vs {b:?}")]
    GridMismatch { a: Grid3, b: Grid3 },
    #[error("incompatible source: mean {mean:e} exceeds tolerance {tol:e}")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("operator symbol vanishes at mode ({0}, {1}, {2})")]
    SingularSymbol(i64, i64, i64),
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coordinate axis of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    T,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::T];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::T => 2,
        }
    }

    pub fn unit(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }
}

/// Uniform periodic grid on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Grid3 {
    pub n_x: usize,
    pub n_y: usize,
    pub n_t: usize,
}

impl Grid3 {
    pub fn new(n_x: usize, n_y: usize, n_t: usize) -> Result<Self, GridError> {
        for (axis, n) in [("n_x", n_x), ("n_y", n_y), ("n_t", n_t)] {
            if n < 8 || n % 2 != 0 {
                return Err(GridError::BadSize { axis, n });
            }
        }
        Ok(Self { n_x, n_y, n_t })
    }

    pub fn cube(n: usize) -> Result<Self, GridError> {
        Self::new(n, n, n)
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_x, self.n_y, self.n_t]
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y * self.n_t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        1.0 / self.dims()[axis.index()] as f64
    }

    pub fn spacings(&self) -> [f64; 3] {
        [self.spacing(Axis::X), self.spacing(Axis::Y), self.spacing(Axis::T)]
    }

    /// Cell volume of the normalized (unit-volume) counting measure.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_y + j) * self.n_t + k
    }

    /// Index with modular wrap-around in every axis.
    #[inline]
    pub fn index_wrapped(&self, i: isize, j: isize, k: isize) -> usize {
        let w = |a: isize, n: usize| a.rem_euclid(n as isize) as usize;
        self.index(w(i, self.n_x), w(j, self.n_y), w(k, self.n_t))
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.n_t;
        let rest = idx / self.n_t;
        (rest / self.n_y, rest % self.n_y, k)
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        [
            i as f64 / self.n_x as f64,
            j as f64 / self.n_y as f64,
            k as f64 / self.n_t as f64,
        ]
    }
}

/// The invariant fields `X = cos θ ∂x − sin θ ∂y` and `Y = sin θ ∂x + cos θ ∂y`
/// acting on z-independent functions, in `(∂x, ∂y, ∂t)` components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaDirections {
    pub theta: f64,
    pub x: [f64; 3],
    pub y: [f64; 3],
}

impl ThetaDirections {
    pub fn new(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            theta,
            x: [c, -s, 0.0],
            y: [s, c, 0.0],
        }
    }

    pub fn t(&self) -> [f64; 3] {
        Axis::T.unit()
    }

    pub fn vector(&self, dir: Direction) -> [f64; 3] {
        match dir {
            Direction::Axis(a) => a.unit(),
            Direction::FrameX => self.x,
            Direction::FrameY => self.y,
        }
    }

    /// Rows `X`, `Y`, `∂t`: maps `(x, y, t)` components to frame components.
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        [self.x, self.y, self.t()]
    }
}

/// A differentiation direction: a coordinate axis or one of the frame fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    Axis(Axis),
    FrameX,
    FrameY,
}
