use std::fs;
use std::io::Write;
use std::path::Path;

use super::solve::{backend_label, grid_label, solve_into};
use super::svg::{line_plot, Axes, Series};
use super::{config_json, Manifest, RunConfig, RunError};
use crate::abp::{deepen, torus_pipeline, PipelineConfig, PipelineOutcome};
use crate::estimates::sum_ellipticity_check;
use crate::grid3::{Backend, Calculus, ChartBox, Grid3, ScalarField3, TrigInterpolant};
use crate::solver::continuity_solve;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub grid: Grid3,
    pub backend: Backend,
    pub converged: bool,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub residual_sup: f64,
    pub margin_a: f64,
    pub margin_b: f64,
    pub inf_u: f64,
    /// `min (Δu + u_t + 2)`.
    pub drift_min: f64,
    /// ABP ratio of the rescaled solution at the configured ε.
    pub abp_ratio: f64,
    pub measured_c: f64,
    /// Sup distance (means removed) to the spectral solution on the finest grid.
    pub error_vs_reference: f64,
    /// `log(e_prev / e) / log(n / n_prev)` against the next coarser grid of the same angle.
    pub observed_order: f64,
    pub note: String,
}

const HEADER: &str = "theta,n_x,n_y,n_t,backend,status,newton_iterations,linear_iterations,residual_sup,margin_a,margin_b,inf_u,drift_min,abp_ratio,measured_c,error_vs_reference,observed_order,note";

impl SweepRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            self.theta,
            self.grid.n_x,
            self.grid.n_y,
            self.grid.n_t,
            backend_label(self.backend),
            if self.converged { "converged" } else { "failed" },
            self.newton_iterations,
            self.linear_iterations,
            self.residual_sup,
            self.margin_a,
            self.margin_b,
            self.inf_u,
            self.drift_min,
            self.abp_ratio,
            self.measured_c,
            self.error_vs_reference,
            if self.observed_order.is_nan() { "nan".to_string() } else { format!("{:.4}", self.observed_order) },
            self.note.replace(',', ";"),
        )
    }
}

/// Values of the trigonometric interpolant of `reference` on the nodes of `grid`.
pub fn resample(calc: &Calculus, reference: &ScalarField3, grid: Grid3) -> ScalarField3 {
    let interp = TrigInterpolant::new(calc, reference);
    let [nx, ny, nt] = grid.dims();
    // a box centered at (½, ½, ½) with half-widths n/2 spans the nodes 0, 1/n, …, 1
    let chart = ChartBox {
        center: [0.5; 3],
        spacing: grid.spacings(),
        half: [nx / 2, ny / 2, nt / 2],
    };
    let boxed = interp.sample_box(&chart, [0, 0, 0]);
    let [_, by, bt] = chart.counts();
    let values = (0..grid.len())
        .map(|idx| {
            let (i, j, k) = grid.unravel(idx);
            boxed[(i * by + j) * bt + k]
        })
        .collect();
    ScalarField3::new(grid, values).expect("interpolant values are finite")
}

/// Sup distance between two fields on the same grid after removing their means.
pub fn centered_distance(a: &ScalarField3, b: &ScalarField3) -> f64 {
    let (ma, mb) = (a.mean(), b.mean());
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| ((x - ma) - (y - mb)).abs())
        .fold(0.0, f64::max)
}

/// Solves every (θ, grid) pair, each in its own subdirectory, and writes `sweep.csv`.
/// Failed members are recorded and the sweep continues; the command then exits with the solver code.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepRow>, RunError> {
    if cfg.grids.is_empty() || cfg.thetas.as_ref().is_some_and(Vec::is_empty) {
        return Err(RunError::Usage("sweep needs at least one angle and one grid".into()));
    }
    fs::create_dir_all(out)?;
    let mut manifest = Manifest::open(out, config_json(cfg))?;
    let thetas = cfg.thetas();
    let grids = cfg.grids.iter().map(|g| g.grid()).collect::<Result<Vec<_>, _>>()?;
    let mut order: Vec<usize> = (0..grids.len()).collect();
    order.sort_by_key(|&i| grids[i].len());
    let finest = grids[*order.last().unwrap()];

    let mut rows = Vec::new();
    for (ti, &theta) in thetas.iter().enumerate() {
        let reference = if grids.len() > 1 {
            let rcfg = RunConfig {
                backend: Backend::Spectral,
                ..cfg.clone()
            };
            let calc = Calculus::new(finest, Backend::Spectral);
            rcfg.density(finest)
                .ok()
                .and_then(|d| continuity_solve(&d, &rcfg.solve_config(finest, theta)).ok())
                .map(|r| (calc, r.u))
        } else {
            None
        };
        let mut prev: Option<(usize, f64)> = None;
        for &gi in &order {
            let grid = grids[gi];
            let dir = out.join(format!("theta{ti:02}_{}", grid_label(grid)));
            fs::create_dir_all(&dir)?;
            let mut row = SweepRow {
                theta,
                grid,
                backend: cfg.backend,
                converged: false,
                newton_iterations: 0,
                linear_iterations: 0,
                residual_sup: f64::NAN,
                margin_a: f64::NAN,
                margin_b: f64::NAN,
                inf_u: f64::NAN,
                drift_min: f64::NAN,
                abp_ratio: f64::NAN,
                measured_c: f64::NAN,
                error_vs_reference: f64::NAN,
                observed_order: f64::NAN,
                note: String::new(),
            };
            match solve_into(cfg, grid, theta, &dir) {
                Ok((r, _)) => {
                    row.converged = true;
                    row.newton_iterations = r.newton_iterations;
                    row.linear_iterations = r.linear_iterations;
                    row.residual_sup = r.residual_sup;
                    row.margin_a = r.margin_a;
                    row.margin_b = r.margin_b;
                    row.inf_u = r.u.min();
                    let calc = Calculus::new(grid, cfg.backend);
                    if let Ok(s) = sum_ellipticity_check(&calc, &r.u) {
                        row.drift_min = s.min_value;
                    }
                    if let Ok((deep, _)) = deepen(&r.u, cfg.depth) {
                        let pc = PipelineConfig {
                            epsilon: cfg.epsilon,
                            radius: cfg.radius,
                            refine: cfg.refine,
                            ..PipelineConfig::default()
                        };
                        match torus_pipeline(&Calculus::new(grid, Backend::Spectral), &deep, &pc) {
                            Ok(PipelineOutcome::Completed(p)) => {
                                row.abp_ratio = p.abp.ratio;
                                row.measured_c = p.abp.measured_c;
                            }
                            Ok(PipelineOutcome::Skipped { note, .. }) => row.note = note,
                            Err(e) => row.note = e.to_string(),
                        }
                    }
                    if let Some((rcalc, ru)) = &reference {
                        let e = centered_distance(&r.u, &resample(rcalc, ru, grid));
                        row.error_vs_reference = e;
                        if let Some((n_prev, e_prev)) = prev {
                            row.observed_order = (e_prev / e).ln() / (grid.n_x as f64 / n_prev as f64).ln();
                        }
                        prev = Some((grid.n_x, e));
                    }
                }
                Err(e) => row.note = e.to_string(),
            }
            rows.push(row);
        }
    }

    let mut w = std::io::BufWriter::new(fs::File::create(out.join("sweep.csv"))?);
    writeln!(w, "{HEADER}")?;
    for r in &rows {
        writeln!(w, "{}", r.csv())?;
    }
    w.flush()?;
    drop(w);
    if cfg.plots && grids.len() > 1 {
        let series: Vec<Series> = thetas
            .iter()
            .map(|&t| Series {
                name: format!("theta = {t:.4}"),
                points: rows
                    .iter()
                    .filter(|r| r.theta == t)
                    .map(|r| (r.grid.n_x as f64, r.error_vs_reference))
                    .collect(),
            })
            .collect();
        let svg = line_plot("distance to spectral reference", "n", "sup error", &series, Axes { log_x: true, log_y: true });
        fs::write(out.join("convergence.svg"), svg)?;
    }
    let failed = rows.iter().filter(|r| !r.converged).count();
    let code = if failed == 0 { 0 } else { 3 };
    manifest.record("sweep", if failed == 0 { "converged" } else { "partial" }, code, format!("{failed} of {} member(s) failed", rows.len()));
    manifest.save(out)?;
    if failed > 0 {
        return Err(RunError::Solver(format!("{failed} sweep member(s) failed; see sweep.csv")));
    }
    Ok(rows)
}
