use std::io::Write;
use std::path::Path;

use super::{config_json, kv, kvf, write_kv, Manifest, RunConfig, RunError};
use crate::grid3::{write_field_binary, Backend, Grid3, GridError};
use crate::solver::{continuity_solve, DensityF, SolveError, SolveReport, TraceRow};

pub const SOLUTION: &str = "solution.bin";
pub const DENSITY: &str = "density.bin";

pub(crate) fn grid_label(g: Grid3) -> String {
    format!("{}x{}x{}", g.n_x, g.n_y, g.n_t)
}

pub(crate) fn backend_label(b: Backend) -> &'static str {
    match b {
        Backend::Spectral => "spectral",
        Backend::Fd => "fd",
    }
}

pub(crate) fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<(), RunError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "step,s,iteration,residual_sup,margin_a,margin_b,damping,linear_iters,linear_residual")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{:e},{:e},{:e},{},{},{:e}",
            r.step, r.s, r.iteration, r.residual_sup, r.margin_a, r.margin_b, r.damping, r.linear_iters, r.linear_residual
        )?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn report_header() -> Vec<String> {
    vec![
        "ktcy solve report".into(),
        "periods: x, y and t all 1 (the circle coordinate is rescaled from [0, 2pi))".into(),
        "normalization: sup u = 0".into(),
    ]
}

/// Solves on `grid` at `theta`, writing `solution.bin`, `density.bin`, `iterations.csv` and
/// `solve_report.txt` into `dir`. The trace and report are written on failure too.
pub(crate) fn solve_into(cfg: &RunConfig, grid: Grid3, theta: f64, dir: &Path) -> Result<(SolveReport, DensityF), RunError> {
    let density = cfg.density(grid)?;
    let scfg = cfg.solve_config(grid, theta);
    let mut pairs = vec![
        kv("scenario", &cfg.scenario),
        kv("density", cfg.density_name()),
        kv("theta", theta),
        kv("grid", grid_label(grid)),
        kv("backend", backend_label(cfg.backend)),
        kvf("density_shift", density.shift()),
    ];
    let path = dir.join("solve_report.txt");
    match continuity_solve(&density, &scfg) {
        Ok(r) => {
            write_field_binary(&r.u, &dir.join(SOLUTION)).map_err(grid_io)?;
            write_field_binary(density.raw(), &dir.join(DENSITY)).map_err(grid_io)?;
            write_trace(&dir.join("iterations.csv"), &r.trace)?;
            pairs.insert(0, kv("status", "converged"));
            pairs.extend([
                kv("newton_iterations", r.newton_iterations),
                kv("linear_iterations", r.linear_iterations),
                kvf("residual_sup", r.residual_sup),
                kvf("raw_residual_sup", r.raw_residual_sup),
                kvf("compatibility_defect", r.compatibility_defect),
                kvf("margin_a", r.margin_a),
                kvf("margin_b", r.margin_b),
                kvf("sup_u", r.u.max()),
                kvf("inf_u", r.u.min()),
            ]);
            write_kv(&path, &report_header(), &pairs)?;
            Ok((r, density))
        }
        Err(SolveError::InvalidConfig(m)) => Err(RunError::Config(m)),
        Err(err) => {
            write_trace(&dir.join("iterations.csv"), err.trace().unwrap_or(&[]))?;
            pairs.insert(0, kv("status", "failed"));
            pairs.push(kv("error", &err));
            write_kv(&path, &report_header(), &pairs)?;
            Err(RunError::Solver(err.to_string()))
        }
    }
}

pub(crate) fn grid_io(e: GridError) -> RunError {
    match e {
        GridError::Io(e) => RunError::Io(e),
        other => RunError::Integrity(other.to_string()),
    }
}

/// Solves the configured scenario on the first grid.
pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<SolveReport, RunError> {
    std::fs::create_dir_all(out)?;
    let grid = cfg.grids[0].grid()?;
    let mut manifest = Manifest::open(out, config_json(cfg))?;
    match solve_into(cfg, grid, cfg.theta, out) {
        Ok((report, _)) => {
            manifest.record("solve", "converged", 0, "");
            manifest.save(out)?;
            Ok(report)
        }
        Err(run) => {
            manifest.record("solve", "failed", run.exit_code(), run.to_string());
            manifest.save(out)?;
            Err(run)
        }
    }
}
