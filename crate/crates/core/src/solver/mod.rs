//! Damped Newton solver for
//!
//! ```text
//! (u_XX + 1)(u_YY + u_tt + u_t + 1) − u_XY² − u_Xt² = e^F    on T³,
//! u_XX + 1 > 0,  u_YY + u_tt + u_t + 1 > 0,  sup u = 0,
//! ```
//!
//! continued along `e^{F_s} = s e^F + (1 − s)` from the trivial solution `u = 0`.
//!
//! The discrete equation solved is `MA(u) = λ(u) e^{F_s}` with
//! `λ(u) = mean MA(u)`. The spectral backend has `mean MA(u) = 1` identically
//! (every derivative term integrates to zero), so there `λ ≡ 1` and this is the
//! equation itself; finite differences break the identity at `O(h²)` and `λ`
//! absorbs that compatibility defect.

mod density;
mod gmres;

pub use density::{DensityF, DensityFamily};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid3::{Nyquist, Axis, Backend, Calculus, DiffOp, Direction, Grid3, GridError, ScalarField3, ThetaDirections};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("density overflows exp: sup F = {sup:e}")]
    Overflow { sup: f64 },
    #[error("ellipticity margins ({a:e}, {b:e}) below floor {floor:e}")]
    NotElliptic { a: f64, b: f64, floor: f64 },
    #[error("Newton stagnated at continuity step {step} (s = {s}), iteration {iteration}, residual {residual:e}")]
    Stagnation {
        step: usize,
        s: f64,
        iteration: usize,
        residual: f64,
        trace: Vec<TraceRow>,
    },
    #[error("Newton hit {iteration} iterations at continuity step {step} (s = {s}), residual {residual:e}")]
    MaxIterations {
        step: usize,
        s: f64,
        iteration: usize,
        residual: f64,
        trace: Vec<TraceRow>,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl SolveError {
    /// Iteration trace up to the failure, if the error came from the Newton loop.
    pub fn trace(&self) -> Option<&[TraceRow]> {
        match self {
            Self::Stagnation { trace, .. } | Self::MaxIterations { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// Backtracking line search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearch {
    pub armijo: f64,
    pub shrink: f64,
    pub min_step: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            shrink: 0.5,
            min_step: 2f64.powi(-20),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub theta: f64,
    pub grid: Grid3,
    pub backend: Backend,
    /// Sup-norm tolerance on the residual of the discrete system.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub damping: LineSearch,
    pub continuity_steps: usize,
    pub ellipticity_floor: f64,
    /// Inexact Newton forcing term: linear solves stop at this fraction of the residual.
    pub linear_rtol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iters: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            theta: 0.0,
            grid: Grid3 {
                n_x: 64,
                n_y: 64,
                n_t: 64,
            },
            backend: Backend::Spectral,
            newton_tol: 1e-10,
            max_newton: 40,
            damping: LineSearch::default(),
            continuity_steps: 4,
            ellipticity_floor: 1e-6,
            linear_rtol: 1e-2,
            gmres_restart: 40,
            gmres_max_iters: 400,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        Grid3::new(self.grid.n_x, self.grid.n_y, self.grid.n_t)?;
        let bad = |m: &str| Err(SolveError::InvalidConfig(m.to_string()));
        if !(self.newton_tol > 0.0 && self.linear_rtol > 0.0 && self.ellipticity_floor > 0.0) {
            return bad("tolerances and ellipticity floor must be positive");
        }
        if self.continuity_steps == 0 || self.max_newton == 0 || self.gmres_restart == 0 {
            return bad("continuity_steps, max_newton and gmres_restart must be at least 1");
        }
        let d = self.damping;
        if !(d.shrink > 0.0 && d.shrink < 1.0 && d.min_step > 0.0 && d.armijo >= 0.0) {
            return bad("line search needs 0 < shrink < 1, min_step > 0, armijo ≥ 0");
        }
        if !self.theta.is_finite() {
            return bad("theta must be finite");
        }
        Ok(())
    }
}

/// One accepted (or initial) Newton state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub s: f64,
    pub iteration: usize,
    pub residual_sup: f64,
    pub margin_a: f64,
    pub margin_b: f64,
    /// Accepted line-search step length (1 = full Newton step, 0 for the initial state).
    pub damping: f64,
    pub linear_iters: usize,
    /// Relative residual reached by the linear solve.
    pub linear_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub config: SolveConfig,
    /// Solution normalized to `sup u = 0`.
    pub u: ScalarField3,
    /// Sup norm of the residual of the discrete system that was solved.
    pub residual_sup: f64,
    /// Sup norm of `MA(u) − e^{F+c}` without the compatibility factor.
    pub raw_residual_sup: f64,
    /// `mean MA(u) − 1`; round-off for the spectral backend.
    pub compatibility_defect: f64,
    /// `min(u_XX + 1)`.
    pub margin_a: f64,
    /// `min(u_YY + u_tt + u_t + 1)`.
    pub margin_b: f64,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub trace: Vec<TraceRow>,
}

/// Coefficient fields `(u_XX + 1, u_YY + u_tt + u_t + 1, u_XY, u_Xt)`.
#[derive(Debug, Clone)]
pub struct Parts {
    pub a: ScalarField3,
    pub b: ScalarField3,
    pub xy: ScalarField3,
    pub xt: ScalarField3,
}

impl Parts {
    /// `a·b − xy² − xt²`.
    pub fn monge_ampere(&self) -> ScalarField3 {
        let g = self.a.grid();
        let vals = (0..g.len())
            .map(|i| {
                let (a, b, p, q) = (
                    self.a.values()[i],
                    self.b.values()[i],
                    self.xy.values()[i],
                    self.xt.values()[i],
                );
                a * b - p * p - q * q
            })
            .collect();
        ScalarField3::new(g, vals).unwrap_or_else(|_| ScalarField3::constant(g, f64::NAN))
    }

    pub fn margins(&self) -> (f64, f64) {
        (self.a.min(), self.b.min())
    }
}

/// The reduced Calabi-Yau operator at a fixed angle on one grid.
#[derive(Debug)]
pub struct MongeAmpere<'c> {
    calc: &'c Calculus,
    dirs: ThetaDirections,
    ops: [DiffOp; 4],
}

impl<'c> MongeAmpere<'c> {
    pub fn new(calc: &'c Calculus, theta: f64) -> Self {
        let dirs = ThetaDirections::new(theta);
        let t = Direction::Axis(Axis::T);
        let xx = DiffOp::derivative(&dirs, Direction::FrameX, 2);
        let b = DiffOp::derivative(&dirs, Direction::FrameY, 2)
            .plus(&DiffOp::derivative(&dirs, t, 2))
            .plus(&DiffOp::derivative(&dirs, t, 1));
        let xy = DiffOp::mixed(&dirs, Direction::FrameX, Direction::FrameY);
        let xt = DiffOp::mixed(&dirs, Direction::FrameX, t);
        Self {
            calc,
            dirs,
            ops: [xx, b, xy, xt],
        }
    }

    pub fn calculus(&self) -> &Calculus {
        self.calc
    }

    pub fn directions(&self) -> ThetaDirections {
        self.dirs
    }

    /// Second-derivative combinations `(h_XX, h_YY + h_tt + h_t, h_XY, h_Xt)`.
    fn raw_parts(&self, h: &ScalarField3) -> Result<[ScalarField3; 4], GridError> {
        let mut v = self.calc.apply_many(h, &self.ops)?;
        let xt = v.pop().unwrap();
        let xy = v.pop().unwrap();
        let b = v.pop().unwrap();
        let a = v.pop().unwrap();
        Ok([a, b, xy, xt])
    }

    pub fn parts(&self, u: &ScalarField3) -> Result<Parts, GridError> {
        let [a, b, xy, xt] = self.raw_parts(u)?;
        Ok(Parts {
            a: a.shift(1.0),
            b: b.shift(1.0),
            xy,
            xt,
        })
    }

    /// The full expression `(u_XX+1)(u_YY+u_tt+u_t+1) − u_XY² − u_Xt²`.
    pub fn operator(&self, u: &ScalarField3) -> Result<ScalarField3, GridError> {
        Ok(self.parts(u)?.monge_ampere())
    }

    /// Pointwise `MA(u) − e^{F+c}`.
    pub fn residual(&self, u: &ScalarField3, density: &DensityF) -> Result<ScalarField3, SolveError> {
        u.same_grid(density.exp())?;
        let ma = self.operator(u)?;
        Ok(ma.zip_map(density.exp(), |m, e| m - e))
    }

    /// `(min(u_XX + 1), min(u_YY + u_tt + u_t + 1))`.
    pub fn ellipticity_margins(&self, u: &ScalarField3) -> Result<(f64, f64), GridError> {
        Ok(self.parts(u)?.margins())
    }

    /// Linearization at `u`; rejected unless both margins exceed `floor`.
    pub fn linearize(&self, u: &ScalarField3, floor: f64) -> Result<Linearization<'_, 'c>, SolveError> {
        let parts = self.parts(u)?;
        Linearization::from_parts(self, parts, floor)
    }

    /// `h_XX b + a (h_YY + h_tt + h_t) − 2 u_XY h_XY − 2 u_Xt h_Xt`.
    pub fn linearized_apply(
        &self,
        u: &ScalarField3,
        h: &ScalarField3,
        floor: f64,
    ) -> Result<ScalarField3, SolveError> {
        u.same_grid(h)?;
        Ok(self.linearize(u, floor)?.apply(h)?)
    }
}

pub struct Linearization<'m, 'c> {
    ma: &'m MongeAmpere<'c>,
    parts: Parts,
}

impl<'m, 'c> Linearization<'m, 'c> {
    fn from_parts(ma: &'m MongeAmpere<'c>, parts: Parts, floor: f64) -> Result<Self, SolveError> {
        let (a, b) = parts.margins();
        if !(a > floor && b > floor) {
            return Err(SolveError::NotElliptic { a, b, floor });
        }
        Ok(Self { ma, parts })
    }

    pub fn parts(&self) -> &Parts {
        &self.parts
    }

    pub fn apply(&self, h: &ScalarField3) -> Result<ScalarField3, GridError> {
        let [hxx, hb, hxy, hxt] = self.ma.raw_parts(h)?;
        let p = &self.parts;
        let g = h.grid();
        let vals = (0..g.len())
            .map(|i| {
                hxx.values()[i] * p.b.values()[i] + p.a.values()[i] * hb.values()[i]
                    - 2.0 * p.xy.values()[i] * hxy.values()[i]
                    - 2.0 * p.xt.values()[i] * hxt.values()[i]
            })
            .collect();
        Ok(ScalarField3::new(g, vals)?)
    }
}

/// Residual of the discrete system `MA(u) − mean(MA(u)) e_s`, with its pieces.
struct SystemState {
    parts: Parts,
    residual: ScalarField3,
    lambda: f64,
}

fn system_state(ma: &MongeAmpere<'_>, u: &ScalarField3, target: &ScalarField3) -> Result<SystemState, GridError> {
    let parts = ma.parts(u)?;
    let op = parts.monge_ampere();
    let lambda = op.mean();
    let residual = op.zip_map(target, |m, e| m - lambda * e);
    Ok(SystemState {
        parts,
        residual,
        lambda,
    })
}

/// Flat constant-coefficient preconditioner `(Δ + ∂t)⁻¹` on mean-zero fields.
fn flat_operator() -> DiffOp {
    DiffOp::laplacian().plus(&DiffOp::first_along(Axis::T.unit()))
}

/// Solves the reduced equation for `density` along the continuity path.
pub fn continuity_solve(density: &DensityF, config: &SolveConfig) -> Result<SolveReport, SolveError> {
    config.validate()?;
    if density.grid() != config.grid {
        return Err(GridError::GridMismatch {
            a: config.grid,
            b: density.grid(),
        }
        .into());
    }
    let calc = Calculus::new(config.grid, config.backend);
    continuity_solve_with(&calc, density, config)
}

/// As [`continuity_solve`], reusing an existing [`Calculus`] for the configured grid and backend.
pub fn continuity_solve_with(
    calc: &Calculus,
    density: &DensityF,
    config: &SolveConfig,
) -> Result<SolveReport, SolveError> {
    config.validate()?;
    let ma = MongeAmpere::new(calc, config.theta);
    let grid = calc.grid();
    let flat = flat_operator();
    let precond = |r: &[f64]| -> Vec<f64> {
        let f = ScalarField3::from_raw(grid, r.to_vec());
        calc.solve_symbol(&f, &flat, Nyquist::Keep)
            .expect("flat operator is invertible on nonzero modes")
            .into_values()
    };

    let mut u = ScalarField3::zeros(grid);
    let mut trace = Vec::new();
    let mut total_newton = 0;
    let mut total_linear = 0;
    let steps = config.continuity_steps;
    let exp_f = density.exp();

    for step in 1..=steps {
        let s = step as f64 / steps as f64;
        let target = exp_f.map(|e| s * e + (1.0 - s));
        let mut state = system_state(&ma, &u, &target)?;
        let mut res_sup = state.residual.sup_norm();
        let (ma0, mb0) = state.parts.margins();
        trace.push(TraceRow {
            step,
            s,
            iteration: 0,
            residual_sup: res_sup,
            margin_a: ma0,
            margin_b: mb0,
            damping: 0.0,
            linear_iters: 0,
            linear_residual: 0.0,
        });
        let mut iteration = 0;
        while res_sup > config.newton_tol {
            if iteration >= config.max_newton {
                return Err(SolveError::MaxIterations {
                    step,
                    s,
                    iteration,
                    residual: res_sup,
                    trace,
                });
            }
            iteration += 1;
            let lin = Linearization::from_parts(&ma, state.parts.clone(), config.ellipticity_floor)?;
            let jac = |h: &[f64]| -> Vec<f64> {
                let hf = ScalarField3::from_raw(grid, h.to_vec());
                let lh = lin.apply(&hf).expect("finite Krylov vector");
                let m = lh.mean();
                lh.zip_map(&target, |l, e| l - m * e).into_values()
            };
            let rhs: Vec<f64> = state.residual.values().iter().map(|r| -r).collect();
            let out = gmres::gmres(
                jac,
                &precond,
                &rhs,
                config.linear_rtol,
                config.gmres_restart,
                config.gmres_max_iters,
            );
            total_linear += out.iterations;
            let update = ScalarField3::from_raw(grid, out.x).mean_zero();

            let norm0 = state.residual.l2_norm();
            let mut alpha = 1.0;
            let accepted = loop {
                let mut trial = u.clone();
                trial.add_scaled(alpha, &update);
                if let Ok(tstate) = system_state(&ma, &trial, &target) {
                    let (a, b) = tstate.parts.margins();
                    let elliptic = a > config.ellipticity_floor && b > config.ellipticity_floor;
                    let decrease = tstate.residual.l2_norm() <= (1.0 - config.damping.armijo * alpha) * norm0;
                    if elliptic && decrease {
                        break Some((trial, tstate));
                    }
                }
                alpha *= config.damping.shrink;
                if alpha < config.damping.min_step {
                    break None;
                }
            };
            let Some((trial, tstate)) = accepted else {
                return Err(SolveError::Stagnation {
                    step,
                    s,
                    iteration,
                    residual: res_sup,
                    trace,
                });
            };
            u = trial;
            state = tstate;
            res_sup = state.residual.sup_norm();
            let (a, b) = state.parts.margins();
            trace.push(TraceRow {
                step,
                s,
                iteration,
                residual_sup: res_sup,
                margin_a: a,
                margin_b: b,
                damping: alpha,
                linear_iters: out.iterations,
                linear_residual: out.relative_residual,
            });
        }
        total_newton += iteration;
    }

    let u = u.normalized_sup_zero();
    let final_state = system_state(&ma, &u, exp_f)?;
    let raw = final_state.parts.monge_ampere().zip_map(exp_f, |m, e| m - e);
    let (margin_a, margin_b) = final_state.parts.margins();
    Ok(SolveReport {
        config: *config,
        residual_sup: final_state.residual.sup_norm(),
        raw_residual_sup: raw.sup_norm(),
        compatibility_defect: final_state.lambda - 1.0,
        margin_a,
        margin_b,
        newton_iterations: total_newton,
        linear_iterations: total_linear,
        trace,
        u,
    })
}
