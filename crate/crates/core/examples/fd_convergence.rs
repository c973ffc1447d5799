//! Second-order convergence of the finite-difference backend toward the spectral solution.

use ktcy::grid3::{Backend, Calculus, Grid3};
use ktcy::runner::{centered_distance, resample};
use ktcy::solver::{continuity_solve, DensityFamily, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let family = DensityFamily::Generic { a: 0.3 };
    let fine = Grid3::cube(48)?;
    let reference = continuity_solve(&family.density(fine)?, &SolveConfig { grid: fine, ..SolveConfig::default() })?.u;
    let calc = Calculus::new(fine, Backend::Spectral);

    let mut prev: Option<(f64, f64)> = None;
    for n in [12, 16, 24] {
        let grid = Grid3::cube(n)?;
        let cfg = SolveConfig { grid, backend: Backend::Fd, ..SolveConfig::default() };
        let u = continuity_solve(&family.density(grid)?, &cfg)?.u;
        let err = centered_distance(&u, &resample(&calc, &reference, grid));
        let order = prev.map(|(m, e)| (e / err).ln() / (n as f64 / m).ln());
        println!("n {n:3}: error {err:.3e}  order {}", order.map_or("-".into(), |o| format!("{o:.3}")));
        prev = Some((n as f64, err));
    }
    Ok(())
}
