//! Contact sets of the small-gradient ABP estimate and the reduction from a
//! torus minimum to a measure bound.
//!
//! For `v` on a ball `B` with `v(0) + ε ≤ min_{∂B} v`, the set
//! `P = {|Dv| < ε/2, v above its tangent plane on B}` satisfies
//! `εⁿ ≤ C₀ ∫_P det D²v`. Applied to `v = u + (ε/r²)|x|²` around the minimum
//! of `u`, a bound `det D²v ≤ C` on `P` gives `|{u ≤ inf u + 1}| ≥ |P| ≥ εⁿ/C`.

mod ball;
mod contact;
mod pipeline;

pub use ball::{BallField, BallGrid};
pub use contact::{abp_inequality, contact_set, contact_set_nested, curvature_scale, AbpReport, ContactPoint, ContactSet, ContactTag};
pub use pipeline::{deepen, torus_pipeline, weight_radius, PipelineConfig, PipelineOutcome, PipelineReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid3::{GridError, ScalarField3};

#[derive(Debug, Error)]
pub enum AbpError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("ball dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("radius {0} outside the allowed range")]
    Radius(f64),
    #[error("bad ball spacing {0:?}")]
    Spacing([f64; 3]),
    #[error("epsilon {0} out of range")]
    Epsilon(f64),
    #[error("field has {got} values, ball has {expected} points")]
    Length { expected: usize, got: usize },
    #[error("non-finite value at {0:?}")]
    NonFinite([f64; 3]),
    #[error("boundary hypothesis fails: min over boundary of v − v(0) = {gap:e} < ε = {epsilon:e}")]
    Hypothesis { gap: f64, epsilon: f64 },
    #[error("empty contact set ({candidates} small-gradient candidates); refine the ball grid")]
    EmptyContactSet { candidates: usize },
    #[error("Hessian determinant integral over the contact set vanishes")]
    ZeroIntegral,
    #[error("field is not normalized to sup u = 0 (sup = {sup:e})")]
    NotNormalized { sup: f64 },
    #[error("map is not monotone: {0}")]
    NonMonotone(String),
    #[error("{0}")]
    Parameter(String),
}

/// Increasing, nonnegative, unbounded test function for the `L∞` bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Fmono {
    /// `x₊^p`.
    PowerPositive { p: f64 },
    /// `e^{αx}`.
    Exp { alpha: f64 },
    /// Piecewise linear through `(xs, ys)`, zero to the left, continued with the last slope.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl Fmono {
    pub fn validate(&self) -> Result<(), AbpError> {
        match self {
            Self::PowerPositive { p } if !(*p > 0.0) => Err(AbpError::Parameter(format!("power {p} must be positive"))),
            Self::Exp { alpha } if !(*alpha > 0.0) => Err(AbpError::Parameter(format!("rate {alpha} must be positive"))),
            Self::Table { xs, ys } => {
                if xs.len() != ys.len() || xs.len() < 2 {
                    return Err(AbpError::Parameter("table needs matching xs and ys of length ≥ 2".into()));
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(AbpError::NonMonotone("xs must be strictly increasing".into()));
                }
                if ys[0] < 0.0 || ys.windows(2).any(|w| w[1] < w[0]) {
                    return Err(AbpError::NonMonotone("ys must be nonnegative and nondecreasing".into()));
                }
                let n = xs.len();
                if !(ys[n - 1] > ys[n - 2]) {
                    return Err(AbpError::NonMonotone("last segment must increase".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::PowerPositive { p } => x.max(0.0).powf(*p),
            Self::Exp { alpha } => (alpha * x).exp(),
            Self::Table { xs, ys } => {
                if x <= xs[0] {
                    return 0.0;
                }
                let n = xs.len();
                let seg = xs.partition_point(|&v| v <= x).clamp(1, n - 1);
                let (x0, x1, y0, y1) = (xs[seg - 1], xs[seg], ys[seg - 1], ys[seg]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FInequalityReport {
    /// `Fmono(‖u‖_∞ − 1)`.
    pub lhs: f64,
    /// `(C/εⁿ) · mean Fmono(−u)`.
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Evaluates `Fmono(‖u‖_∞ − 1) ≤ (C/εⁿ) ∫ Fmono(−u)` on the torus (`n = 3`).
pub fn f_inequality_check(
    u: &ScalarField3,
    fmono: &Fmono,
    epsilon: f64,
    measured_c: f64,
) -> Result<FInequalityReport, AbpError> {
    fmono.validate()?;
    if !(epsilon > 0.0) {
        return Err(AbpError::Epsilon(epsilon));
    }
    if !(measured_c > 0.0 && measured_c.is_finite()) {
        return Err(AbpError::Parameter(format!("constant {measured_c} must be positive")));
    }
    let lhs = fmono.eval(u.sup_norm() - 1.0);
    let rhs = measured_c / epsilon.powi(3) * u.map(|v| fmono.eval(-v)).mean();
    Ok(FInequalityReport {
        lhs,
        rhs,
        margin: rhs - lhs,
        holds: lhs <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid3::{Backend, Calculus, Grid3};
    use std::f64::consts::PI;

    fn paraboloid(h: f64) -> BallField {
        let g = BallGrid::new(2, 1.0, [h, h, 0.0]).unwrap();
        BallField::from_fn(g, |x| x[0] * x[0] + x[1] * x[1]).unwrap()
    }

    #[test]
    fn paraboloid_contact_set_is_small_disc() {
        let f = paraboloid(0.01);
        let cs = contact_set(&f, 0.4).unwrap();
        for p in &cs.points {
            assert!(p.coords[0].hypot(p.coords[1]) < 0.1 + 0.01);
            assert!((p.det - 4.0).abs() < 1e-8);
        }
        let g = f.grid();
        for k in 0..g.len() {
            let x = g.coords(k);
            if x[0].hypot(x[1]) < 0.1 - 0.01 {
                assert!(cs.contains(k));
            }
        }
        let rep = abp_inequality(&cs).unwrap();
        let exact = 0.16 / (4.0 * PI * 0.01);
        assert!((rep.ratio / exact - 1.0).abs() < 0.1, "ratio {}", rep.ratio);
    }

    #[test]
    fn hypothesis_violation_reports_gap() {
        let f = paraboloid(0.05);
        match contact_set(&f, 1.5) {
            Err(AbpError::Hypothesis { gap, .. }) => assert!(gap < 1.0 && gap > 0.8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scaling_leaves_ratio_invariant() {
        let g = BallGrid::new(2, 1.0, [0.02, 0.02, 0.0]).unwrap();
        let f = |x: [f64; 3]| x[0] * x[0] + 2.0 * x[1] * x[1] + 0.1 * x[0].powi(4);
        let a = abp_inequality(&contact_set(&BallField::from_fn(g.clone(), f).unwrap(), 0.4).unwrap()).unwrap();
        let b = abp_inequality(&contact_set(&BallField::from_fn(g, |x| 3.0 * f(x)).unwrap(), 1.2).unwrap())
            .unwrap();
        assert!((a.ratio / b.ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn power_and_table_maps() {
        let t = Fmono::Table {
            xs: vec![0.0, 1.0, 2.0],
            ys: vec![0.0, 1.0, 3.0],
        };
        t.validate().unwrap();
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(1.5), 2.0);
        assert_eq!(t.eval(3.0), 5.0);
        let bad = Fmono::Table {
            xs: vec![0.0, 1.0, 2.0],
            ys: vec![0.0, 2.0, 1.0],
        };
        assert!(matches!(bad.validate(), Err(AbpError::NonMonotone(_))));
        assert_eq!(Fmono::PowerPositive { p: 2.0 }.eval(-3.0), 0.0);
    }

    #[test]
    fn f_inequality_on_spike_pattern() {
        // u = −2 on one point, −2 + δ elsewhere
        let g = Grid3::cube(8).unwrap();
        let mut u = ScalarField3::constant(g, -1.9);
        u.values_mut()[0] = -2.0;
        let rep = f_inequality_check(&u, &Fmono::PowerPositive { p: 1.0 }, 0.5, 1.0).unwrap();
        assert!((rep.lhs - 1.0).abs() < 1e-15);
        let mean = (1.9 * 511.0 + 2.0) / 512.0;
        assert!((rep.rhs - 8.0 * mean).abs() < 1e-12);
        assert!(rep.holds);
    }

    #[test]
    fn shallow_field_skips_pipeline() {
        let g = Grid3::cube(8).unwrap();
        let calc = Calculus::new(g, Backend::Spectral);
        let u = ScalarField3::from_fn(g, |x, _, _| 0.1 * ((2.0 * PI * x).cos() - 1.0));
        let out = torus_pipeline(&calc, &u, &PipelineConfig::default()).unwrap();
        assert!(matches!(out, PipelineOutcome::Skipped { .. }));
    }
}
