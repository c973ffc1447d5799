use std::fmt::Write;
use std::fs;
use std::path::Path;

use super::svg::{line_plot, Axes, Series};
use super::verify::checked_manifest;
use super::{config_json, read_csv_columns, read_kv, RunConfig, RunError};

/// Summarizes the artifacts already in `out` into `summary.txt` (and plots), after checking
/// the manifest. Recomputes nothing.
pub fn cmd_report(cfg: &RunConfig, out: &Path) -> Result<String, RunError> {
    let mut manifest = checked_manifest(out, &[])?;
    let mut s = String::new();
    let _ = writeln!(s, "ktcy report for {}", out.display());
    for (name, st) in &manifest.stages {
        let _ = writeln!(s, "stage {name}: {} (exit {})", st.status, st.exit_code);
    }
    let mut found = false;

    let solve = out.join("solve_report.txt");
    if solve.exists() {
        found = true;
        let kv = read_kv(&solve)?;
        let _ = writeln!(s, "\n[solve]");
        for key in [
            "status",
            "scenario",
            "density",
            "theta",
            "grid",
            "backend",
            "newton_iterations",
            "residual_sup",
            "margin_a",
            "margin_b",
            "inf_u",
            "error",
        ] {
            if let Some(v) = kv.get(key) {
                let _ = writeln!(s, "{key:<18} {v}");
            }
        }
    }
    let iters = out.join("iterations.csv");
    if cfg.plots && iters.exists() {
        let cols = read_csv_columns(&iters)?;
        if let Some(res) = cols.get("residual_sup") {
            let pts = res.iter().enumerate().map(|(i, r)| (i as f64, *r)).collect();
            let svg = line_plot(
                "Newton residual history",
                "accepted state",
                "sup residual",
                &[Series { name: "residual".into(), points: pts }],
                Axes { log_x: false, log_y: true },
            );
            fs::write(out.join("residual_history.svg"), svg)?;
        }
    }

    let est = out.join("estimate_report.txt");
    if est.exists() {
        found = true;
        let text = fs::read_to_string(&est)?;
        let count = |tag: &str| text.lines().filter(|l| l.split_whitespace().nth(1) == Some(tag)).count();
        let _ = writeln!(
            s,
            "\n[estimates] {} pass, {} fail, {} diagnostic, {} skipped",
            count("PASS"),
            count("FAIL"),
            count("DIAGNOSTIC"),
            count("SKIPPED")
        );
        for l in text.lines().filter(|l| !l.starts_with('#')) {
            let _ = writeln!(s, "{l}");
        }
    }

    let sweep = out.join("sweep.csv");
    if sweep.exists() {
        found = true;
        let text = fs::read_to_string(&sweep)?;
        let rows: Vec<&str> = text.lines().skip(1).collect();
        let converged = rows.iter().filter(|r| r.contains(",converged,")).count();
        let _ = writeln!(s, "\n[sweep] {converged} of {} member(s) converged", rows.len());
        let cols = read_csv_columns(&sweep)?;
        let get = |k: &str| cols.get(k).cloned().unwrap_or_default();
        let (theta, nx, err, order) = (get("theta"), get("n_x"), get("error_vs_reference"), get("observed_order"));
        for i in 0..theta.len() {
            let _ = writeln!(
                s,
                "theta {:<10.6} n {:<4} error {:<12.4e} order {:.3}",
                theta[i], nx[i], err[i], order[i]
            );
        }
    }
    if !found {
        return Err(RunError::Usage(format!("no solve, verify or sweep artifacts in {}", out.display())));
    }
    fs::write(out.join("summary.txt"), &s)?;
    manifest.config = config_json(cfg);
    manifest.record("report", "written", 0, "");
    manifest.save(out)?;
    Ok(s)
}
