use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{AbpError, BallField};

/// Ties a contact set to the torus field and chart it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactTag {
    pub field_fingerprint: u64,
    pub epsilon: f64,
    pub radius: f64,
    /// `ρ` in the weight `(ε/ρ²)|x|²`.
    pub weight_radius: f64,
    /// Chart center in torus coordinates.
    pub center: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    /// Index into the ball grid.
    pub index: usize,
    pub coords: [f64; 3],
    pub value: f64,
    pub gradient: [f64; 3],
    pub gradient_norm: f64,
    /// Hessian, with the unused row and column zero in dimension 2.
    pub hessian: [[f64; 3]; 3],
    pub det: f64,
    pub min_eigenvalue: f64,
}

/// Points `x` of the ball with `|Dv(x)| < ε/2` at which `v` lies above its
/// tangent plane on the whole ball:
///
/// ```text
/// P = { x ∈ B : |Dv(x)| < ε/2,  v(y) ≥ v(x) + Dv(x)·(y − x) − slack  ∀ y ∈ B }.
/// ```
#[derive(Debug, Clone)]
pub struct ContactSet {
    pub dim: usize,
    pub epsilon: f64,
    pub cell_volume: f64,
    /// Tolerance of the discrete support-plane test.
    pub slack: f64,
    /// `min_{boundary layer} v − v(0)`.
    pub boundary_gap: f64,
    /// Number of interior points that passed the gradient filter.
    pub candidates: usize,
    pub points: Vec<ContactPoint>,
    pub tag: Option<ContactTag>,
}

impl ContactSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `|P|` as a point count times the cell volume.
    pub fn measure(&self) -> f64 {
        self.points.len() as f64 * self.cell_volume
    }

    pub fn sup_det(&self) -> f64 {
        self.points.iter().map(|p| p.det).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.points.iter().map(|p| p.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.points.binary_search_by_key(&index, |p| p.index).is_ok()
    }

    /// Columns: coordinates, `|Dv|`, `det D²v`, minimum Hessian eigenvalue.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x,y,t,grad_norm,det,min_eigenvalue")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.coords[0], p.coords[1], p.coords[2], p.gradient_norm, p.det, p.min_eigenvalue
            )?;
        }
        w.flush()
    }
}

fn hessian_matrix(h: &[[f64; 3]; 3], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| 0.5 * (h[i][j] + h[j][i]))
}

/// Largest Hessian spectral norm over the ball, the curvature scale of `v`.
pub fn curvature_scale(field: &BallField) -> f64 {
    let dim = field.grid().dim();
    (0..field.grid().len())
        .into_par_iter()
        .filter_map(|k| field.hessian(k))
        .map(|h| {
            hessian_matrix(&h, dim)
                .symmetric_eigenvalues()
                .iter()
                .fold(0.0f64, |m, e| m.max(e.abs()))
        })
        .reduce(|| 0.0, f64::max)
}

/// Detects the contact set of `field` for the given `epsilon`.
///
/// Requires `v(0) + ε ≤ min` of `v` over the boundary layer. The support-plane
/// test is a brute-force scan over every ball point with slack `½ K h²`, where
/// `K` is [`curvature_scale`] and `h` the largest spacing.
pub fn contact_set(field: &BallField, epsilon: f64) -> Result<ContactSet, AbpError> {
    contact_set_nested(field, None, epsilon)
}

/// Points tested against a candidate's tangent plane, sorted by `w = v − (ε/2)|y|`.
///
/// A point with `w(y) ≥ v(x) + (ε/2)|x|` lies above every plane through `(x, v(x))`
/// with slope below `ε/2`, so only a prefix of the sorted list needs checking.
pub(crate) struct SupportTest {
    points: Vec<([f64; 3], f64, f64)>,
    half_eps: f64,
    slack: f64,
}

impl SupportTest {
    pub(crate) fn new(fields: &[&BallField], epsilon: f64, slack: f64) -> Self {
        let half_eps = epsilon / 2.0;
        let mut points: Vec<([f64; 3], f64, f64)> = fields
            .iter()
            .flat_map(|f| {
                let g = f.grid();
                (0..g.len()).map(move |k| {
                    let y = g.coords(k);
                    let vy = f.values()[k];
                    (y, vy, vy - half_eps * norm(&y))
                })
            })
            .collect();
        points.sort_by(|a, b| a.2.total_cmp(&b.2));
        Self {
            points,
            half_eps,
            slack,
        }
    }

    /// `v(y) ≥ v(x) + g·(y − x) − slack` for every tested `y`; needs `|g| < ε/2`.
    pub(crate) fn passes(&self, x: [f64; 3], vx: f64, g: [f64; 3]) -> bool {
        let cutoff = vx + self.half_eps * norm(&x);
        self.points
            .iter()
            .take_while(|p| p.2 < cutoff)
            .all(|(y, vy, _)| *vy >= vx + (0..3).map(|a| g[a] * (y[a] - x[a])).sum::<f64>() - self.slack)
    }
}

/// As [`contact_set`], with candidates taken from a finer `core` ball around the
/// same center. The hypothesis is checked on the boundary layer of `outer` and
/// the support-plane test runs over the points of both balls.
pub fn contact_set_nested(outer: &BallField, core: Option<&BallField>, epsilon: f64) -> Result<ContactSet, AbpError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(AbpError::Epsilon(epsilon));
    }
    if let Some(c) = core {
        if c.grid().dim() != outer.grid().dim() || c.grid().radius() > outer.grid().radius() {
            return Err(AbpError::Parameter("core ball must lie inside the outer ball".into()));
        }
    }
    let grid = outer.grid();
    let field = core.unwrap_or(outer);
    let v0 = field.values()[field.grid().center()];
    let boundary_min = grid.boundary_layer().map(|k| outer.values()[k]).fold(f64::INFINITY, f64::min);
    let gap = boundary_min - v0;
    if gap < epsilon {
        return Err(AbpError::Hypothesis { gap, epsilon });
    }
    let cgrid = field.grid();
    let dim = cgrid.dim();
    let h = cgrid.max_spacing();
    let slack = 0.5 * curvature_scale(field) * h * h;
    let fields: Vec<&BallField> = match core {
        Some(c) => vec![outer, c],
        None => vec![outer],
    };
    let test = SupportTest::new(&fields, epsilon, slack);

    let candidates: Vec<(usize, [f64; 3])> = (0..cgrid.len())
        .filter(|&k| cgrid.is_interior(k))
        .filter_map(|k| field.gradient(k).map(|g| (k, g)))
        .filter(|(_, g)| norm(g) < epsilon / 2.0)
        .collect();

    let v = field.values();
    let points: Vec<ContactPoint> = candidates
        .par_iter()
        .filter(|(k, g)| test.passes(cgrid.coords(*k), v[*k], *g))
        .map(|&(k, g)| {
            let hess = field.hessian(k).expect("candidates have Hessians");
            let m = hessian_matrix(&hess, dim);
            let min_eigenvalue = m.clone().symmetric_eigenvalues().min();
            ContactPoint {
                index: k,
                coords: cgrid.coords(k),
                value: v[k],
                gradient: g,
                gradient_norm: norm(&g),
                hessian: hess,
                det: m.determinant(),
                min_eigenvalue,
            }
        })
        .collect();

    Ok(ContactSet {
        dim,
        epsilon,
        cell_volume: cgrid.cell_volume(),
        slack,
        boundary_gap: gap,
        candidates: candidates.len(),
        points,
        tag: None,
    })
}

pub(crate) fn norm(g: &[f64; 3]) -> f64 {
    g.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbpReport {
    pub dim: usize,
    pub epsilon: f64,
    /// `εⁿ`.
    pub epsilon_power: f64,
    /// `Σ_P max(det D²v, 0) · cell volume`.
    pub integral: f64,
    /// `εⁿ / integral`, the measured constant in `εⁿ ≤ C₀ ∫_P det D²v`.
    pub ratio: f64,
    pub sup_det: f64,
    /// `ratio · sup_P det D²v`, so that `|P| ≥ εⁿ / measured_c`.
    pub measured_c: f64,
    pub contact_measure: f64,
    pub count: usize,
}

impl AbpReport {
    /// `εⁿ / measured_c`.
    pub fn measure_lower_bound(&self) -> f64 {
        self.epsilon_power / self.measured_c
    }
}

/// Hessian-determinant integral over the contact set and the constants it implies.
/// Negative determinants count as zero.
pub fn abp_inequality(cs: &ContactSet) -> Result<AbpReport, AbpError> {
    if cs.is_empty() {
        return Err(AbpError::EmptyContactSet {
            candidates: cs.candidates,
        });
    }
    let integral: f64 = cs.points.iter().map(|p| p.det.max(0.0)).sum::<f64>() * cs.cell_volume;
    if integral <= 0.0 {
        return Err(AbpError::ZeroIntegral);
    }
    let epsilon_power = cs.epsilon.powi(cs.dim as i32);
    let ratio = epsilon_power / integral;
    let sup_det = cs.sup_det().max(0.0);
    Ok(AbpReport {
        dim: cs.dim,
        epsilon: cs.epsilon,
        epsilon_power,
        integral,
        ratio,
        sup_det,
        measured_c: ratio * sup_det,
        contact_measure: cs.measure(),
        count: cs.len(),
    })
}
