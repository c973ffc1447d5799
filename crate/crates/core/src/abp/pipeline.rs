use nalgebra::Matrix3;

use super::contact::{norm, SupportTest};
use super::{abp_inequality, contact_set_nested, AbpError, AbpReport, BallField, BallGrid, ContactSet, ContactTag};
use crate::grid3::{Axis, Calculus, ChartBox, Grid3, ScalarField3, TrigInterpolant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub epsilon: f64,
    pub radius: f64,
    /// The chart ball is sampled at the torus grid spacing divided by `refine`.
    pub refine: usize,
    /// Skip unless `inf u < −1`.
    pub require_depth: bool,
    /// Core grid points per semi-axis of the predicted region `{|Dv| < ε/2}`.
    pub core_resolution: usize,
    /// Upper bound on the number of core ball points.
    pub max_core_points: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            radius: 0.25,
            refine: 2,
            require_depth: true,
            core_resolution: 6,
            max_core_points: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    /// Torus grid index of the discrete minimum.
    pub argmin: usize,
    /// Torus coordinates of the chart center, the minimum of the interpolant on the sampled points.
    pub center: [f64; 3],
    pub inf_u: f64,
    pub epsilon: f64,
    pub radius: f64,
    /// Smallest `|x|` on the boundary layer of the chart ball; `v = u + (ε/ρ²)|x|²` with this `ρ`.
    pub weight_radius: f64,
    pub chart_spacing: [f64; 3],
    pub core_radius: f64,
    pub core_spacing: [f64; 3],
    pub recenter_steps: usize,
    pub contact: ContactSet,
    pub abp: AbpReport,
    /// Chart points outside the core that pass the gradient filter and the support-plane test;
    /// zero when the core captures the whole contact set at chart resolution.
    pub missed_outside_core: usize,
    /// `max_P (u − inf u − ε/2)`; nonpositive up to the contact slack.
    pub max_excess: f64,
    pub excess_ok: bool,
    /// Normalized measure of `{u ≤ inf u + 1}` on the torus grid.
    pub sublevel_measure: f64,
    /// `εⁿ / C` with the measured `C`.
    pub measure_lower: f64,
    pub measure_ok: bool,
}

#[derive(Debug, Clone)]
pub enum PipelineOutcome {
    Skipped { inf_u: f64, note: String },
    Completed(Box<PipelineReport>),
}

impl PipelineOutcome {
    pub fn report(&self) -> Option<&PipelineReport> {
        match self {
            Self::Completed(r) => Some(r),
            Self::Skipped { .. } => None,
        }
    }
}

/// Multiplies `u` so that its infimum becomes `target_inf` (which must be negative).
pub fn deepen(u: &ScalarField3, target_inf: f64) -> Result<(ScalarField3, f64), AbpError> {
    let inf = u.min();
    if !(inf < 0.0 && target_inf < 0.0) {
        return Err(AbpError::Parameter(format!("cannot rescale inf {inf} to {target_inf}")));
    }
    let kappa = target_inf / inf;
    Ok((u.scale(kappa), kappa))
}

const SECOND: [([u8; 3], usize, usize); 6] = [
    ([2, 0, 0], 0, 0),
    ([0, 2, 0], 1, 1),
    ([0, 0, 2], 2, 2),
    ([1, 1, 0], 0, 1),
    ([1, 0, 1], 0, 2),
    ([0, 1, 1], 1, 2),
];

struct Chart<'a> {
    interp: &'a TrigInterpolant,
    center: [f64; 3],
}

impl Chart<'_> {
    fn sample(&self, ball: &BallGrid, order: [u8; 3]) -> Vec<f64> {
        let chart = ChartBox {
            center: self.center,
            spacing: ball.spacing(),
            half: ball.half(),
        };
        let boxed = self.interp.sample_box(&chart, order);
        (0..ball.len()).map(|k| boxed[ball.box_slot(k)]).collect()
    }

    /// `v = u + c|x|²` with exact derivatives.
    fn field(&self, ball: BallGrid, c: f64) -> Result<BallField, AbpError> {
        let u = self.sample(&ball, [0, 0, 0]);
        let du = [[1, 0, 0], [0, 1, 0], [0, 0, 1]].map(|o| self.sample(&ball, o));
        let d2u: Vec<Vec<f64>> = SECOND.iter().map(|(o, _, _)| self.sample(&ball, *o)).collect();
        let mut values = Vec::with_capacity(ball.len());
        let mut grads = Vec::with_capacity(ball.len());
        let mut hess = Vec::with_capacity(ball.len());
        for k in 0..ball.len() {
            let x = ball.coords(k);
            values.push(u[k] + c * x.iter().map(|a| a * a).sum::<f64>());
            grads.push([0, 1, 2].map(|a| du[a][k] + 2.0 * c * x[a]));
            let mut h = [[0.0; 3]; 3];
            for (s, (_, a, b)) in SECOND.iter().enumerate() {
                h[*a][*b] = d2u[s][k];
                h[*b][*a] = d2u[s][k];
            }
            for (a, row) in h.iter_mut().enumerate() {
                row[a] += 2.0 * c;
            }
            hess.push(h);
        }
        BallField::new(ball, values)?.with_derivatives(grads, hess)
    }

    fn hessian_at_center(&self) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for (o, a, b) in SECOND {
            let v = self.interp.eval(self.center, o);
            h[a][b] = v;
            h[b][a] = v;
        }
        h
    }
}

fn boundary_radius(ball: &BallGrid) -> f64 {
    ball.boundary_layer().map(|k| norm(&ball.coords(k))).fold(f64::INFINITY, f64::min)
}

/// The radius `ρ` used in the quadratic weight for `grid` and `cfg`.
pub fn weight_radius(grid: Grid3, cfg: &PipelineConfig) -> Result<f64, AbpError> {
    let spacing = Axis::ALL.map(|a| grid.spacing(a) / cfg.refine.max(1) as f64);
    Ok(boundary_radius(&BallGrid::new(3, cfg.radius, spacing)?))
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = k;
        }
    }
    best
}

/// Core ball sized from the quadratic model `Dv(x) ≈ H x`: the region `|Hx| < ε/2`
/// is an ellipsoid reaching `(ε/2)√((H⁻²)_aa)` along axis `a`.
fn core_grid(h: &[[f64; 3]; 3], c: f64, rho: f64, cfg: &PipelineConfig, chart: &BallGrid) -> Result<BallGrid, AbpError> {
    let m = Matrix3::from_fn(|i, j| h[i][j] + if i == j { 2.0 * c } else { 0.0 });
    let half_eps = cfg.epsilon / 2.0;
    let reach: [f64; 3] = match m.try_inverse() {
        Some(inv) => {
            let sq = inv * inv;
            [0, 1, 2].map(|a| half_eps * sq[(a, a)].abs().sqrt())
        }
        None => [chart.radius(); 3],
    };
    // contact points satisfy ε|x|²/ρ² ≤ v(x) − v(0) < (ε/2)|x|, so |x| < ρ²/2
    let radius = (2.0 * reach.iter().cloned().fold(0.0, f64::max))
        .min(0.5 * rho * rho)
        .max(2.0 * chart.max_spacing())
        .min(chart.radius());
    let res = cfg.core_resolution.max(1) as f64;
    let mut spacing = [0, 1, 2].map(|a| (reach[a] / res).min(chart.spacing()[a] / 2.0).min(radius / 4.0));
    loop {
        let estimate = 4.19 * radius.powi(3) / (spacing[0] * spacing[1] * spacing[2]);
        if estimate <= cfg.max_core_points as f64 {
            break;
        }
        spacing = spacing.map(|s| s * 1.25);
    }
    BallGrid::new(3, radius, spacing)
}

/// Runs the contact-set construction for `v = u + (ε/ρ²)|x|²` on a flat chart
/// ball of radius `r` around the minimum of `u`, with `u` and its derivatives
/// evaluated by trigonometric interpolation. `ρ ≤ r` is the inner radius of the
/// discrete boundary layer, so that `v ≥ v(0) + ε` there.
///
/// Candidates come from a finer core ball sized to the predicted region
/// `{|Dv| < ε/2}`; the support-plane test uses both balls.
pub fn torus_pipeline(calc: &Calculus, u: &ScalarField3, cfg: &PipelineConfig) -> Result<PipelineOutcome, AbpError> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
        return Err(AbpError::Epsilon(cfg.epsilon));
    }
    if !(cfg.radius > 0.0 && cfg.radius < 0.5) {
        return Err(AbpError::Radius(cfg.radius));
    }
    if cfg.refine == 0 {
        return Err(AbpError::Parameter("refine must be at least 1".into()));
    }
    u.same_grid(&ScalarField3::zeros(calc.grid()))?;
    let sup = u.max();
    let grid_inf = u.min();
    if sup.abs() > 1e-12 * (1.0 + grid_inf.abs()) {
        return Err(AbpError::NotNormalized { sup });
    }
    if cfg.require_depth && grid_inf >= -1.0 {
        return Ok(PipelineOutcome::Skipped {
            inf_u: grid_inf,
            note: format!("inf u = {grid_inf:.6} is not below -1; the reduction needs a deep minimum"),
        });
    }
    let grid = u.grid();
    let argmin_index = u.argmin();
    let spacing = Axis::ALL.map(|a| grid.spacing(a) / cfg.refine as f64);
    let chart_ball = BallGrid::new(3, cfg.radius, spacing)?;
    let rho = boundary_radius(&chart_ball);
    let c = cfg.epsilon / (rho * rho);
    let interp = TrigInterpolant::new(calc, u);
    let mut chart = Chart {
        interp: &interp,
        center: grid.coords(argmin_index),
    };

    // move the center to the minimum over both sampled balls
    let mut steps = 0;
    let core = loop {
        let outer_u = chart.sample(&chart_ball, [0, 0, 0]);
        let k = argmin(&outer_u);
        if k != chart_ball.center() && steps < 16 {
            let x = chart_ball.coords(k);
            chart.center = [0, 1, 2].map(|a| chart.center[a] + x[a]);
            steps += 1;
            continue;
        }
        let core = core_grid(&chart.hessian_at_center(), c, rho, cfg, &chart_ball)?;
        let core_u = chart.sample(&core, [0, 0, 0]);
        let k = argmin(&core_u);
        if core_u[k] < core_u[core.center()] && steps < 16 {
            let x = core.coords(k);
            chart.center = [0, 1, 2].map(|a| chart.center[a] + x[a]);
            steps += 1;
            continue;
        }
        break core;
    };

    let core_radius = core.radius();
    let core_spacing = core.spacing();
    let outer = chart.field(chart_ball, c)?;
    let inner = chart.field(core, c)?;
    let mut contact = contact_set_nested(&outer, Some(&inner), cfg.epsilon)?;
    contact.tag = Some(ContactTag {
        field_fingerprint: u.fingerprint(),
        epsilon: cfg.epsilon,
        radius: cfg.radius,
        weight_radius: rho,
        center: chart.center,
    });

    let test = SupportTest::new(&[&outer, &inner], cfg.epsilon, contact.slack);
    let og = outer.grid();
    let missed_outside_core = (0..og.len())
        .filter(|&k| norm(&og.coords(k)) > core_radius)
        .filter(|&k| {
            let g = outer.gradient(k).expect("exact derivatives");
            norm(&g) < cfg.epsilon / 2.0 && test.passes(og.coords(k), outer.values()[k], g)
        })
        .count();

    let abp = abp_inequality(&contact)?;
    let uc = inner.values()[inner.grid().center()];
    let inf_u = uc.min(grid_inf);
    let max_excess = contact
        .points
        .iter()
        .map(|p| p.value - c * norm(&p.coords).powi(2) - (uc + cfg.epsilon / 2.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let excess_ok = max_excess <= contact.slack;
    let level = inf_u + 1.0;
    let sublevel_measure = u.values().iter().filter(|&&v| v <= level).count() as f64 / grid.len() as f64;
    let measure_lower = abp.measure_lower_bound();

    Ok(PipelineOutcome::Completed(Box::new(PipelineReport {
        argmin: argmin_index,
        center: chart.center,
        inf_u,
        epsilon: cfg.epsilon,
        radius: cfg.radius,
        weight_radius: rho,
        chart_spacing: spacing,
        core_radius,
        core_spacing,
        recenter_steps: steps,
        contact,
        abp,
        missed_outside_core,
        max_excess,
        excess_ok,
        sublevel_measure,
        measure_lower,
        measure_ok: sublevel_measure >= measure_lower,
    })))
}
