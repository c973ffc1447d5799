//! Solves one 3D density at angles with irrational `tan θ`, plus a few rational ones.

use ktcy::grid3::Grid3;
use ktcy::solver::{continuity_solve, DensityFamily, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid3::cube(24)?;
    let density = DensityFamily::Generic { a: 0.3 }.density(grid)?;
    let thetas = [
        ("0", 0.0),
        ("pi/6", std::f64::consts::FRAC_PI_6),
        ("pi/4", std::f64::consts::FRAC_PI_4),
        ("arctan sqrt 2", 2f64.sqrt().atan()),
        ("arctan pi", std::f64::consts::PI.atan()),
        ("pi/2", std::f64::consts::FRAC_PI_2),
    ];
    for (name, theta) in thetas {
        let r = continuity_solve(&density, &SolveConfig { grid, theta, ..SolveConfig::default() })?;
        println!(
            "{name:>14}: {:2} Newton iterations, residual {:.2e}, margins ({:.3}, {:.3}), inf u {:.5}",
            r.newton_iterations,
            r.residual_sup,
            r.margin_a,
            r.margin_b,
            r.u.min()
        );
    }
    Ok(())
}
