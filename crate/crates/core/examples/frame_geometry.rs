//! Pointwise geometry of the invariant frame: the almost complex structures,
//! the symplectic form `ω_θ` and the compatible metric.

use ktcy::geometry::{build_j, build_omega, j1, j2, j3, metric_from, quaternion_check, wedge, FrameForm2, FrameMap};
use nalgebra::Matrix4;

fn main() {
    let q = quaternion_check();
    println!("J1 J2 = J3 defect {:.1e}, J2 J1 = -J3 defect {:.1e}, J3^2 = -1 defect {:.1e}", q.product, q.anticommutator, q.square);

    for theta in [0.0, std::f64::consts::FRAC_PI_6, 2f64.sqrt().atan(), std::f64::consts::PI.atan()] {
        let j = build_j(theta);
        let minus = FrameMap(-Matrix4::identity());
        let omega = build_omega(theta);
        let g = metric_from(&omega, &j);
        let eig = g.symmetric_eigen().eigenvalues;
        println!(
            "theta {theta:.6}: J^2 + 1 = {:.1e}, omega^omega = {:.3}, metric eigenvalues [{:.3}, {:.3}]",
            j.compose(&j).max_abs_diff(&minus),
            wedge(&omega, &omega),
            eig.min(),
            eig.max()
        );
    }

    // J_θ = cos θ J1 + sin θ J2
    let theta: f64 = 0.7;
    let mix = FrameMap(j1().0 * theta.cos() + j2().0 * theta.sin());
    println!("cos J1 + sin J2 vs J_theta: {:.1e}", mix.max_abs_diff(&build_j(theta)));
    println!("J3 column images: {:?}", (1..=4).map(|i| j3().image(i)).collect::<Vec<_>>());
    let e12 = FrameForm2::basis(1, 2);
    let e34 = FrameForm2::basis(3, 4);
    println!("e12 ^ e34 = {}", wedge(&e12, &e34));
}
