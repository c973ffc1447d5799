//! Solves the t-only density `F = log(1 + a cos 2πt)` and compares with the
//! closed form `u = A cos 2πt + B sin 2πt + const`.

use std::f64::consts::PI;

use ktcy::grid3::Grid3;
use ktcy::solver::{continuity_solve, DensityFamily, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = 0.5;
    let grid = Grid3::new(16, 16, 64)?;
    let density = DensityFamily::TCosine { a }.density(grid)?;
    let report = continuity_solve(&density, &SolveConfig { grid, ..SolveConfig::default() })?;

    let big_a = -a / (4.0 * PI * PI + 1.0);
    let big_b = a / (2.0 * PI * (4.0 * PI * PI + 1.0));
    let exact = ktcy::grid3::ScalarField3::from_fn(grid, |_, _, t| big_a * (2.0 * PI * t).cos() + big_b * (2.0 * PI * t).sin());
    let exact = exact.normalized_sup_zero();
    let err = report.u.zip_map(&exact, |x, y| (x - y).abs()).max();

    println!("Newton iterations {}, residual {:.2e}", report.newton_iterations, report.residual_sup);
    println!("margins ({:.4}, {:.4}), inf u {:.6}", report.margin_a, report.margin_b, report.u.min());
    println!("sup |u - closed form| = {err:.2e}");
    for row in &report.trace {
        println!("  step {} s {:.2} it {} residual {:.3e}", row.step, row.s, row.iteration, row.residual_sup);
    }
    Ok(())
}
