use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::calculus::wavenumber;
use super::{Calculus, Grid3, ScalarField3};

/// Tensor-product box of sample points `center + (i - half) * spacing` in torus
/// coordinates (not wrapped; the interpolant is periodic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartBox {
    pub center: [f64; 3],
    pub spacing: [f64; 3],
    pub half: [usize; 3],
}

impl ChartBox {
    pub fn counts(&self) -> [usize; 3] {
        self.half.map(|h| 2 * h + 1)
    }

    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Offset from the center of the point with box index `(i, j, l)`.
    pub fn offset(&self, i: usize, j: usize, l: usize) -> [f64; 3] {
        let idx = [i, j, l];
        [0, 1, 2].map(|a| (idx[a] as f64 - self.half[a] as f64) * self.spacing[a])
    }
}

/// Trigonometric interpolant of a grid field, evaluable with exact derivatives
/// at arbitrary points. The Nyquist mode is represented by a cosine so the
/// interpolant is real.
pub struct TrigInterpolant {
    grid: Grid3,
    spec: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(calc: &Calculus, f: &ScalarField3) -> Self {
        assert_eq!(calc.grid(), f.grid());
        let norm = 1.0 / f.grid().len() as f64;
        let spec = calc.spectrum(f).into_iter().map(|c| c * norm).collect();
        Self { grid: f.grid(), spec }
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    /// Basis function (with `order`-th derivative applied) of bin `m` at coordinate `x`.
    fn basis(m: usize, n: usize, x: f64, order: u8) -> Complex64 {
        if m == n / 2 {
            let w = PI * n as f64;
            let phase = w * x + order as f64 * PI / 2.0;
            Complex64::new(w.powi(order as i32) * phase.cos(), 0.0)
        } else {
            let w = 2.0 * PI * wavenumber(m, n) as f64;
            let e = Complex64::from_polar(1.0, w * x);
            e * Complex64::new(0.0, w).powi(order as i32)
        }
    }

    fn matrix(n: usize, xs: &[f64], order: u8) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(xs.len() * n);
        for &x in xs {
            for m in 0..n {
                out.push(Self::basis(m, n, x, order));
            }
        }
        out
    }

    /// Value of `∂x^d0 ∂y^d1 ∂t^d2` of the interpolant at `p`.
    pub fn eval(&self, p: [f64; 3], order: [u8; 3]) -> f64 {
        let b = ChartBox {
            center: p,
            spacing: [0.0; 3],
            half: [0; 3],
        };
        self.sample_box(&b, order)[0]
    }

    /// Samples a derivative of the interpolant on every point of `chart`,
    /// ordered x-major, t-minor.
    pub fn sample_box(&self, chart: &ChartBox, order: [u8; 3]) -> Vec<f64> {
        let [nx, ny, nt] = self.grid.dims();
        let [px, py, pt] = chart.counts();
        let coords: Vec<Vec<f64>> = (0..3)
            .map(|a| {
                (0..chart.counts()[a])
                    .map(|i| chart.center[a] + (i as f64 - chart.half[a] as f64) * chart.spacing[a])
                    .collect()
            })
            .collect();
        let ex = Self::matrix(nx, &coords[0], order[0]);
        let ey = Self::matrix(ny, &coords[1], order[1]);
        let et = Self::matrix(nt, &coords[2], order[2]);

        // contract t: a[mx][my][l]
        let mut a = vec![Complex64::default(); nx * ny * pt];
        a.par_chunks_mut(pt).enumerate().for_each(|(mxy, out)| {
            let src = &self.spec[mxy * nt..(mxy + 1) * nt];
            for (l, o) in out.iter_mut().enumerate() {
                let row = &et[l * nt..(l + 1) * nt];
                *o = src.iter().zip(row).map(|(s, e)| s * e).sum();
            }
        });
        // contract y: b[mx][j][l]
        let mut b = vec![Complex64::default(); nx * py * pt];
        b.par_chunks_mut(py * pt).enumerate().for_each(|(mx, out)| {
            let slab = &a[mx * ny * pt..(mx + 1) * ny * pt];
            for j in 0..py {
                let row = &ey[j * ny..(j + 1) * ny];
                for l in 0..pt {
                    let mut s = Complex64::default();
                    for (my, e) in row.iter().enumerate() {
                        s += slab[my * pt + l] * e;
                    }
                    out[j * pt + l] = s;
                }
            }
        });
        // contract x: real part of c[i][j][l]
        let mut c = vec![0.0; px * py * pt];
        c.par_chunks_mut(py * pt).enumerate().for_each(|(i, out)| {
            let row = &ex[i * nx..(i + 1) * nx];
            for (jl, o) in out.iter_mut().enumerate() {
                let mut s = Complex64::default();
                for (mx, e) in row.iter().enumerate() {
                    s += b[mx * py * pt + jl] * e;
                }
                *o = s.re;
            }
        });
        c
    }
}
