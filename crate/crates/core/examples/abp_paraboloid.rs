//! Contact set of `v = |x|²` on the unit disc: `P` is the disc `|x| < ε/4`.

use ktcy::abp::{abp_inequality, contact_set, BallField, BallGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 0.4;
    for h in [0.02, 0.01, 0.005] {
        let grid = BallGrid::new(2, 1.0, [h, h, 1.0])?;
        let field = BallField::from_fn(grid, |x| x[0] * x[0] + x[1] * x[1])?;
        let cs = contact_set(&field, eps)?;
        let abp = abp_inequality(&cs)?;
        let radius = cs.points.iter().map(|p| p.coords[0].hypot(p.coords[1])).fold(0.0, f64::max);
        println!(
            "h {h}: |P| = {:.5} (disc {:.5}), max |x| on P {:.4}, det {:.3}, eps^2 / int det = {:.4} (exact {:.4})",
            cs.measure(),
            std::f64::consts::PI * (eps / 4.0).powi(2),
            radius,
            cs.sup_det(),
            abp.ratio,
            eps * eps / (4.0 * std::f64::consts::PI * (eps / 4.0).powi(2))
        );
    }
    Ok(())
}
