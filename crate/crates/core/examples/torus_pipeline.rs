//! Runs the contact-set pipeline on a solver output rescaled to `inf u = −1.05`,
//! sweeping ε, and reports the measure bound `|{u ≤ inf u + 1}| ≥ ε³/C`.

use ktcy::abp::{deepen, torus_pipeline, PipelineConfig, PipelineOutcome};
use ktcy::grid3::{Backend, Calculus, Grid3};
use ktcy::solver::{continuity_solve, DensityFamily, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid3::cube(32)?;
    let density = DensityFamily::XyBump { a: 0.3, k: 1 }.density(grid)?;
    let solved = continuity_solve(&density, &SolveConfig { grid, theta: 0.4, ..SolveConfig::default() })?;
    let calc = Calculus::new(grid, Backend::Spectral);

    let raw = torus_pipeline(&calc, &solved.u, &PipelineConfig::default())?;
    if let PipelineOutcome::Skipped { note, .. } = raw {
        println!("as solved: {note}");
    }

    let (deep, kappa) = deepen(&solved.u, -1.05)?;
    println!("rescaled by {kappa:.3}");
    for epsilon in [0.4, 0.2, 0.1, 0.05] {
        let out = torus_pipeline(&calc, &deep, &PipelineConfig { epsilon, ..PipelineConfig::default() })?;
        let Some(p) = out.report() else { continue };
        println!(
            "eps {epsilon:<5} |P| {:4} pts, ratio {:.3}, C {:9.3}, sublevel {:.4} >= {:.3e}: {}, missed outside core {}",
            p.contact.len(),
            p.abp.ratio,
            p.abp.measured_c,
            p.sublevel_measure,
            p.measure_lower,
            p.measure_ok,
            p.missed_outside_core
        );
    }
    Ok(())
}
