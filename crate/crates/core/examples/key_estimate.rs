//! Pointwise chain at the contact points of an unscaled solution: Cauchy-Schwarz
//! on the mixed second derivatives, the trace bound and the determinant bound.

use ktcy::abp::{torus_pipeline, weight_radius, PipelineConfig};
use ktcy::estimates::{chain_epsilon_threshold, key_estimate_chain};
use ktcy::grid3::{Backend, Calculus, Grid3};
use ktcy::solver::{continuity_solve, DensityFamily, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid3::cube(32)?;
    let theta = 2f64.sqrt().atan();
    let density = DensityFamily::Generic { a: 0.3 }.density(grid)?;
    let solved = continuity_solve(&density, &SolveConfig { grid, theta, ..SolveConfig::default() })?;
    let calc = Calculus::new(grid, Backend::Spectral);

    let base = PipelineConfig { require_depth: false, ..PipelineConfig::default() };
    let rho = weight_radius(grid, &base)?;
    let epsilon = 0.9 * chain_epsilon_threshold(rho, base.radius);
    let out = torus_pipeline(&calc, &solved.u, &PipelineConfig { epsilon, ..base })?;
    let p = out.report().expect("depth not required");
    let trace = key_estimate_chain(&calc, &p.contact, &solved.u, &density, theta)?;
    println!("eps {epsilon:.3e} (rho {rho:.4}), {} contact points", trace.rows.len());
    println!("violations {}", trace.violations());
    println!("max det {:.4e} <= constant {:.4e}", trace.max_det(), trace.det_constant);
    println!("max (trace + 1/2 - 2e^F) = {:.4}", trace.trace_margin());
    Ok(())
}
