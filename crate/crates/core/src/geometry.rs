//! Frame-level linear algebra of the Kodaira-Thurston manifold in the invariant
//! coframe `e¹ = dy, e² = dx, e³ = dt, e⁴ = dz − x dy`.
//!
//! Everything here is pointwise: the structures are invariant, so their
//! coefficients in the coframe are constants.
//!
//! Conventions:
//! * a [`FrameMap`] stores the action on coframe coefficients, column `i` being
//!   the image of `eⁱ`;
//! * since every `J_θ` is orthogonal for the frame metric, the same matrix is
//!   used for the action on tangent vectors in the dual frame;
//! * the volume orientation is `e¹∧e²∧e³∧e⁴`, for which `ω_θ ∧ ω_θ = +2`.

use nalgebra::Matrix4;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate 2-form: top-degree coefficient of ω̃∧ω̃ is {0:e}")]
    Degenerate(f64),
}

/// Endomorphism of the cotangent space in the basis `(e¹, e², e³, e⁴)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMap(pub Matrix4<f64>);

impl FrameMap {
    /// Builds the map from the images of `e¹..e⁴`, each given as a coefficient vector.
    fn from_images(images: [[f64; 4]; 4]) -> Self {
        let mut m = Matrix4::zeros();
        for (col, img) in images.iter().enumerate() {
            for (row, &v) in img.iter().enumerate() {
                m[(row, col)] = v;
            }
        }
        Self(m)
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    /// Image of `eⁱ` (1-based index as in the coframe).
    pub fn image(&self, i: usize) -> [f64; 4] {
        assert!((1..=4).contains(&i), "coframe index {i} outside 1..=4");
        let c = self.0.column(i - 1);
        [c[0], c[1], c[2], c[3]]
    }

    /// Composition `self ∘ other`.
    pub fn compose(&self, other: &FrameMap) -> FrameMap {
        FrameMap(self.0 * other.0)
    }

    pub fn max_abs_diff(&self, other: &FrameMap) -> f64 {
        (self.0 - other.0).abs().max()
    }
}

const E1: [f64; 4] = [1.0, 0.0, 0.0, 0.0];
const E2: [f64; 4] = [0.0, 1.0, 0.0, 0.0];
const E3: [f64; 4] = [0.0, 0.0, 1.0, 0.0];
const E4: [f64; 4] = [0.0, 0.0, 0.0, 1.0];

fn neg(v: [f64; 4]) -> [f64; 4] {
    v.map(|x| -x)
}

/// `J_(1)`: `e¹ ↦ e³, e⁴ ↦ e²`; `J² = −Id` forces `e³ ↦ −e¹, e² ↦ −e⁴`.
pub fn j1() -> FrameMap {
    FrameMap::from_images([E3, neg(E4), neg(E1), E2])
}

/// `J_(2)`: `e¹ ↦ e⁴, e² ↦ e³`; completed by `e⁴ ↦ −e¹, e³ ↦ −e²`.
pub fn j2() -> FrameMap {
    FrameMap::from_images([E4, E3, neg(E2), neg(E1)])
}

/// The integrable structure `J_(3)`: `e¹ ↦ e², e³ ↦ e⁴`.
pub fn j3() -> FrameMap {
    FrameMap::from_images([E2, neg(E1), E4, neg(E3)])
}

/// `J_θ = cos θ J_(1) + sin θ J_(2)`.
pub fn build_j(theta: f64) -> FrameMap {
    let (s, c) = theta.sin_cos();
    FrameMap(j1().0 * c + j2().0 * s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuaternionReport {
    /// `max |J_(1) J_(2) − J_(3)|`
    pub product: f64,
    /// `max |J_(2) J_(1) + J_(3)|`
    pub anticommutator: f64,
    /// `max |J_(3)² + Id|`
    pub square: f64,
}

impl QuaternionReport {
    pub fn max_defect(&self) -> f64 {
        self.product.max(self.anticommutator).max(self.square)
    }
}

/// Checks the quaternionic relations between `J_(1)`, `J_(2)`, `J_(3)`.
pub fn quaternion_check() -> QuaternionReport {
    let minus_id = FrameMap(-Matrix4::identity());
    let neg_j3 = FrameMap(-j3().0);
    QuaternionReport {
        product: j1().compose(&j2()).max_abs_diff(&j3()),
        anticommutator: j2().compose(&j1()).max_abs_diff(&neg_j3),
        square: j3().compose(&j3()).max_abs_diff(&minus_id),
    }
}

/// Index pairs of the 2-form basis, in storage order.
pub const FORM_BASIS: [(usize, usize); 6] = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];

/// Invariant 2-form `Σ c_ij eⁱ∧eʲ` over `e¹²,e¹³,e¹⁴,e²³,e²⁴,e³⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameForm2(pub [f64; 6]);

impl FrameForm2 {
    /// `eⁱ ∧ eʲ` for `1 ≤ i, j ≤ 4`; reversed order flips the sign.
    pub fn basis(i: usize, j: usize) -> Self {
        let mut c = [0.0; 6];
        if let Some(pos) = FORM_BASIS.iter().position(|&p| p == (i, j)) {
            c[pos] = 1.0;
        } else if let Some(pos) = FORM_BASIS.iter().position(|&p| p == (j, i)) {
            c[pos] = -1.0;
        }
        Self(c)
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(other.0) {
            *a += b;
        }
        Self(c)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.map(|x| x * s))
    }

    /// Antisymmetric matrix `Ω` with `ω(u, w) = uᵀ Ω w`.
    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for (c, &(i, j)) in self.0.iter().zip(FORM_BASIS.iter()) {
            m[(i - 1, j - 1)] = *c;
            m[(j - 1, i - 1)] = -*c;
        }
        m
    }
}

/// `ω_θ = (cos θ e¹ + sin θ e²) ∧ e³ + e⁴ ∧ (−sin θ e¹ + cos θ e²)`.
pub fn build_omega(theta: f64) -> FrameForm2 {
    let (s, c) = theta.sin_cos();
    // e¹³: c, e²³: s, e⁴¹ = −e¹⁴: −(−s), e⁴² = −e²⁴: −c
    FrameForm2([0.0, c, s, s, -c, 0.0])
}

/// Coefficient of `a ∧ b` on `e¹∧e²∧e³∧e⁴`.
pub fn wedge(a: &FrameForm2, b: &FrameForm2) -> f64 {
    let [a12, a13, a14, a23, a24, a34] = a.0;
    let [b12, b13, b14, b23, b24, b34] = b.0;
    a12 * b34 - a13 * b24 + a14 * b23 + a23 * b14 - a24 * b13 + a34 * b12
}

/// `tr_ω̃ ω := 2 (ω̃ ∧ ω) / ω̃²`.
pub fn trace_ratio(omega_tilde: &FrameForm2, omega: &FrameForm2) -> Result<f64, GeometryError> {
    let vol = wedge(omega_tilde, omega_tilde);
    if vol == 0.0 || !vol.is_finite() {
        return Err(GeometryError::Degenerate(vol));
    }
    Ok(2.0 * wedge(omega_tilde, omega) / vol)
}

/// Bilinear form `g(u, w) = ω(u, J w)` in the frame.
pub fn metric_from(omega: &FrameForm2, j: &FrameMap) -> Matrix4<f64> {
    omega.matrix() * j.0
}

/// Real symmetric 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat4(Matrix4<f64>);

impl SymMat4 {
    /// Symmetrizes `m` as `(m + mᵀ)/2`, which is exactly symmetric in floating point.
    pub fn new(m: Matrix4<f64>) -> Self {
        let mut s = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                s[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        Self(s)
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.symmetric_eigenvalues().min()
    }
}

/// J-invariant part `½ (S + Jᵀ S J)`.
pub fn j_invariant_part(s: &SymMat4, j: &FrameMap) -> SymMat4 {
    SymMat4::new((s.0 + j.0.transpose() * s.0 * j.0) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const ULP4: f64 = 4.0 * f64::EPSILON;

    #[test]
    fn generators_match_their_defining_relations() {
        let a = j1();
        assert_eq!(a.image(1), E3);
        assert_eq!(a.image(4), E2);
        assert_eq!(a.image(3), neg(E1));
        assert_eq!(a.image(2), neg(E4));
        let b = j2();
        assert_eq!(b.image(1), E4);
        assert_eq!(b.image(2), E3);
        assert_eq!(b.image(4), neg(E1));
        assert_eq!(b.image(3), neg(E2));
        assert_eq!(build_j(0.0), j1());
        let half_pi = build_j(PI / 2.0);
        assert!(half_pi.max_abs_diff(&j2()) < 1e-15);
    }

    #[test]
    fn j_theta_squares_to_minus_identity() {
        for theta in [0.0, 1.0, 2f64.sqrt().atan(), PI.atan(), 4.4] {
            let j = build_j(theta);
            let sq = j.compose(&j);
            assert!(sq.max_abs_diff(&FrameMap(-Matrix4::identity())) <= ULP4);
        }
    }

    #[test]
    fn quaternion_relations() {
        // J_(2)e¹ = e⁴, then J_(1)e⁴ = e², which is J_(3)e¹
        assert_eq!(j1().compose(&j2()).image(1), E2);
        assert_eq!(j3().image(1), E2);
        assert_eq!(j3().image(3), E4);
        assert_eq!(quaternion_check().max_defect(), 0.0);
    }

    #[test]
    fn omega_at_zero_and_its_metric() {
        let w0 = build_omega(0.0);
        let expected = FrameForm2::basis(1, 3).plus(&FrameForm2::basis(4, 2));
        assert_eq!(w0, expected);
        for theta in [0.0, 0.5, 2.0, 5.5] {
            let g = metric_from(&build_omega(theta), &build_j(theta));
            assert!((g - Matrix4::identity()).abs().max() <= 1e-15);
        }
    }

    #[test]
    fn wedge_basis_cases() {
        assert_eq!(wedge(&FrameForm2::basis(1, 2), &FrameForm2::basis(3, 4)), 1.0);
        assert_eq!(wedge(&FrameForm2::basis(1, 3), &FrameForm2::basis(1, 4)), 0.0);
        assert_eq!(wedge(&FrameForm2::basis(1, 3), &FrameForm2::basis(2, 4)), -1.0);
    }

    #[test]
    fn trace_ratio_trivial_cases() {
        let w = build_omega(0.3);
        assert!((trace_ratio(&w, &w).unwrap() - 2.0).abs() < 1e-15);
        assert!((trace_ratio(&w.scaled(2.0), &w).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            trace_ratio(&FrameForm2::basis(1, 2), &w),
            Err(GeometryError::Degenerate(_))
        ));
    }

    #[test]
    fn j_invariant_part_of_identity() {
        let p = j_invariant_part(&SymMat4::identity(), &build_j(1.234));
        assert!((p.matrix() - Matrix4::identity()).abs().max() < 1e-15);
    }
}
