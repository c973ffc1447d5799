//! Checks of the a priori estimate chains on computed fields: the pointwise
//! bounds at contact points, the drift lower bound, and the level-set
//! machinery (distribution function, truncations, layer-cake formula).

mod levels;

pub use levels::{
    chain_lower_bound_check, decay_check, layer_cake, layer_cake_residual, level_set_profile, log_s_grid,
    lp_to_linfty, sobolev_poincare_ratio, truncation, ChainCheck, DecayReport, LevelSetProfile, LinftyBound,
    SobolevPoincare,
};

use std::fmt;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::abp::ContactSet;
use crate::grid3::{Axis, Calculus, DiffOp, GridError, ScalarField3, ThetaDirections, TrigInterpolant};
use crate::solver::DensityF;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("s-grid is empty")]
    EmptySGrid,
    #[error("s-grid must be positive and strictly increasing")]
    BadSGrid,
    #[error("exponent {0} out of range")]
    Exponent(f64),
    #[error("contact set was not computed from this field")]
    Provenance,
    #[error("epsilon {epsilon:e} exceeds the smallness threshold {threshold:e} for radius {radius}")]
    EpsilonTooLarge { epsilon: f64, threshold: f64, radius: f64 },
    #[error("{0}")]
    Parameter(String),
}

/// Largest `ε` for which both perturbations stay below ½ when `v = u + (ε/ρ²)|x|²`
/// on a ball of radius `r`: `2ε/ρ² ≤ ½` and `4ε/ρ² + ε/2 + 2εr/ρ² ≤ ½`, the last
/// term bounding `|u_t − v_t|`. With `ρ = r` this is `4ε/r² + ε/2 + 2ε/r ≤ ½`.
pub fn chain_epsilon_threshold(weight_radius: f64, radius: f64) -> f64 {
    let p2 = weight_radius * weight_radius;
    (p2 / 4.0).min(0.5 / (4.0 / p2 + 0.5 + 2.0 * radius / p2))
}

/// Quantities at one contact point, in the frame `(X, Y, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyEstimateRow {
    /// Torus coordinates.
    pub point: [f64; 3],
    pub v_xx: f64,
    pub v_yy: f64,
    pub v_tt: f64,
    pub v_xy: f64,
    pub v_xt: f64,
    pub trace: f64,
    pub det: f64,
    pub exp_f: f64,
    pub cauchy_schwarz_xy: bool,
    pub cauchy_schwarz_xt: bool,
    pub trace_bound: bool,
    pub am_gm: bool,
    pub det_bound: bool,
}

impl KeyEstimateRow {
    pub fn all_hold(&self) -> bool {
        self.cauchy_schwarz_xy && self.cauchy_schwarz_xt && self.trace_bound && self.am_gm && self.det_bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyEstimateTrace {
    pub theta: f64,
    pub epsilon: f64,
    pub radius: f64,
    pub weight_radius: f64,
    pub threshold: f64,
    pub sup_exp_f: f64,
    /// `((2 sup e^F − ½)/3)³`, the uniform bound on `det D²v`.
    pub det_constant: f64,
    /// Absolute slack allowed in every comparison.
    pub tolerance: f64,
    pub rows: Vec<KeyEstimateRow>,
}

impl KeyEstimateTrace {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.all_hold()).count()
    }

    pub fn max_det(&self) -> f64 {
        self.rows.iter().map(|r| r.det).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `trace + ½ − 2e^F` over the rows.
    pub fn trace_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.trace + 0.5 - 2.0 * r.exp_f)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            w,
            "x,y,t,v_XX,v_YY,v_tt,v_XY,v_Xt,trace,det,exp_F,cs_xy,cs_xt,trace_bound,am_gm,det_bound"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.point[0],
                r.point[1],
                r.point[2],
                r.v_xx,
                r.v_yy,
                r.v_tt,
                r.v_xy,
                r.v_xt,
                r.trace,
                r.det,
                r.exp_f,
                r.cauchy_schwarz_xy,
                r.cauchy_schwarz_xt,
                r.trace_bound,
                r.am_gm,
                r.det_bound
            )?;
        }
        w.flush()
    }
}

fn quad(h: &[[f64; 3]; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i] * h[i][j] * b[j];
        }
    }
    s
}

/// Evaluates the pointwise chain at every contact point of `cs`, which must come
/// from [`crate::abp::torus_pipeline`] applied to `u` with `ε` below
/// [`chain_epsilon_threshold`]:
///
/// 1. `v_XY² ≤ v_XX v_YY` and `v_Xt² ≤ v_XX v_tt`,
/// 2. `v_XX + v_YY + v_tt + ½ ≤ 2e^F`,
/// 3. `det D²v ≤ (trace/3)³ ≤ ((2 sup e^F − ½)/3)³`.
pub fn key_estimate_chain(
    calc: &Calculus,
    cs: &ContactSet,
    u: &ScalarField3,
    density: &DensityF,
    theta: f64,
) -> Result<KeyEstimateTrace, EstimateError> {
    let tag = cs.tag.ok_or(EstimateError::Provenance)?;
    if tag.field_fingerprint != u.fingerprint() || cs.dim != 3 {
        return Err(EstimateError::Provenance);
    }
    u.same_grid(density.exp())?;
    let threshold = chain_epsilon_threshold(tag.weight_radius, tag.radius);
    if tag.epsilon > threshold {
        return Err(EstimateError::EpsilonTooLarge {
            epsilon: tag.epsilon,
            threshold,
            radius: tag.radius,
        });
    }
    let dirs = ThetaDirections::new(theta);
    let (x, y, t) = (dirs.x, dirs.y, Axis::T.unit());
    let f_interp = TrigInterpolant::new(calc, &density.normalized());
    let exp_at: Vec<f64> = cs
        .points
        .iter()
        .map(|p| {
            let q = [0, 1, 2].map(|a| tag.center[a] + p.coords[a]);
            f_interp.eval(q, [0, 0, 0]).exp()
        })
        .collect();
    let sup_exp_f = exp_at.iter().copied().fold(density.exp().max(), f64::max);
    let det_constant = ((2.0 * sup_exp_f - 0.5) / 3.0).powi(3);
    let scale = cs
        .points
        .iter()
        .flat_map(|p| p.hessian.iter().flatten().map(|v| v.abs()))
        .fold(1.0f64, f64::max);
    let tol = 1e-6 * scale;

    let rows = cs
        .points
        .iter()
        .zip(&exp_at)
        .map(|(p, &exp_f)| {
            let h = &p.hessian;
            let v_xx = quad(h, x, x);
            let v_yy = quad(h, y, y);
            let v_tt = quad(h, t, t);
            let v_xy = quad(h, x, y);
            let v_xt = quad(h, x, t);
            let trace = v_xx + v_yy + v_tt;
            let tol3 = tol * scale * scale;
            KeyEstimateRow {
                point: [0, 1, 2].map(|a| tag.center[a] + p.coords[a]),
                v_xx,
                v_yy,
                v_tt,
                v_xy,
                v_xt,
                trace,
                det: p.det,
                exp_f,
                cauchy_schwarz_xy: v_xy * v_xy <= v_xx * v_yy + tol * scale,
                cauchy_schwarz_xt: v_xt * v_xt <= v_xx * v_tt + tol * scale,
                trace_bound: trace + 0.5 <= 2.0 * exp_f + tol,
                am_gm: p.det <= (trace / 3.0).powi(3) + tol3,
                det_bound: p.det <= det_constant + tol3,
            }
        })
        .collect();
    Ok(KeyEstimateTrace {
        theta,
        epsilon: tag.epsilon,
        radius: tag.radius,
        weight_radius: tag.weight_radius,
        threshold,
        sup_exp_f,
        det_constant,
        tolerance: tol,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumEllipticity {
    /// `min (Δu + u_t + 2)` over the grid.
    pub min_value: f64,
    pub holds: bool,
    /// `‖u‖_{L¹}`, recorded only.
    pub l1_norm: f64,
}

/// Sum of the two ellipticity conditions: `Δu + u_t + 2 > 0` (flat Laplacian).
pub fn sum_ellipticity_check(calc: &Calculus, u: &ScalarField3) -> Result<SumEllipticity, EstimateError> {
    let op = DiffOp::laplacian().plus(&DiffOp::first_along(Axis::T.unit()));
    let s = calc.apply(u, &op)?.shift(2.0);
    let min_value = s.min();
    Ok(SumEllipticity {
        min_value,
        holds: min_value > 0.0,
        l1_norm: u.map(f64::abs).mean(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported value without a pass/fail claim.
    Diagnostic,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Diagnostic => "DIAGNOSTIC",
            Self::Skipped => "SKIPPED",
        })
    }
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateLine {
    pub tag: String,
    pub value: f64,
    pub status: Status,
    pub note: String,
}

/// One line per checked inequality.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateReport {
    pub lines: Vec<EstimateLine>,
}

impl EstimateReport {
    pub fn push(&mut self, tag: &str, value: f64, status: Status, note: impl Into<String>) {
        self.lines.push(EstimateLine {
            tag: tag.to_string(),
            value,
            status,
            note: note.into(),
        });
    }

    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|l| l.status == Status::Fail).count()
    }

    pub fn get(&self, tag: &str) -> Option<&EstimateLine> {
        self.lines.iter().find(|l| l.tag == tag)
    }
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "{:<30} {:<11} {:>14.6e}  {}", l.tag, l.status, l.value, l.note)?;
        }
        Ok(())
    }
}
