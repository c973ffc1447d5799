//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest
//! harness so the lines are printed by a plain `cargo test`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};
use std::process::ExitCode;
use std::time::Instant;

use ktcy::abp::{abp_inequality, contact_set, deepen, torus_pipeline, weight_radius, BallField, BallGrid, PipelineConfig, PipelineOutcome};
use ktcy::estimates::{
    chain_epsilon_threshold, key_estimate_chain, layer_cake_residual, level_set_profile, log_s_grid, sum_ellipticity_check,
};
use ktcy::geometry::{build_j, build_omega, j_invariant_part, metric_from, quaternion_check, wedge, FrameMap, SymMat4};
use ktcy::grid3::{Backend, Calculus, Grid3, ScalarField3};
use ktcy::runner::{cmd_sweep, GridSpec, RunConfig};
use ktcy::solver::{continuity_solve, DensityF, DensityFamily, MongeAmpere, SolveConfig, SolveReport};
use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Run {
    name: String,
    theta: f64,
    backend: Backend,
    density: DensityF,
    report: SolveReport,
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn solve(name: &str, family: DensityFamily, n: usize, theta: f64, backend: Backend) -> Result<Run, String> {
    let grid = Grid3::cube(n).map_err(|e| e.to_string())?;
    let density = family.density(grid).map_err(|e| e.to_string())?;
    let cfg = SolveConfig {
        grid,
        theta,
        backend,
        ..SolveConfig::default()
    };
    let report = continuity_solve(&density, &cfg).map_err(|e| format!("{name}: {e}"))?;
    Ok(Run {
        name: name.into(),
        theta,
        backend,
        density,
        report,
    })
}

fn t_cosine_exact(grid: Grid3, a: f64) -> ScalarField3 {
    let big_a = -a / (4.0 * PI * PI + 1.0);
    let big_b = a / (2.0 * PI * (4.0 * PI * PI + 1.0));
    ScalarField3::from_fn(grid, |_, _, t| big_a * (2.0 * PI * t).cos() + big_b * (2.0 * PI * t).sin()).normalized_sup_zero()
}

fn sup_diff(a: &ScalarField3, b: &ScalarField3) -> f64 {
    a.zip_map(b, |x, y| (x - y).abs()).max()
}

fn criterion_1(runs: &mut Vec<Run>) -> Outcome {
    let start = Instant::now();
    match solve("t-cosine 64^3", DensityFamily::TCosine { a: 0.5 }, 64, 0.0, Backend::Spectral) {
        Ok(run) => {
            let secs = start.elapsed().as_secs_f64();
            let err = sup_diff(&run.report.u, &t_cosine_exact(run.report.u.grid(), 0.5));
            let res = run.report.residual_sup;
            runs.push(run);
            outcome(
                res <= 1e-8 && err <= 1e-8 && secs <= 120.0,
                format!("residual {res:.2e}, closed-form error {err:.2e}, {secs:.1} s"),
            )
        }
        Err(e) => outcome(false, e),
    }
}

fn criterion_2(runs: &mut Vec<Run>) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (label, theta) in [("arctan sqrt 2", 2f64.sqrt().atan()), ("arctan pi", PI.atan())] {
        match solve(&format!("generic(0.3) 32^3 at {label}"), DensityFamily::Generic { a: 0.3 }, 32, theta, Backend::Spectral) {
            Ok(run) => {
                notes.push(format!("{label}: {} its, residual {:.1e}", run.report.newton_iterations, run.report.residual_sup));
                runs.push(run);
            }
            Err(e) => {
                pass = false;
                notes.push(e);
            }
        }
    }
    let exact = t_cosine_exact(Grid3::cube(64).unwrap(), 0.5);
    let mut worst: f64 = 0.0;
    for theta in [0.0, FRAC_PI_6, FRAC_PI_4, 2f64.sqrt().atan(), FRAC_PI_2] {
        match solve(&format!("t-cosine 64^3 at {theta:.4}"), DensityFamily::TCosine { a: 0.5 }, 64, theta, Backend::Spectral) {
            Ok(run) => {
                worst = worst.max(sup_diff(&run.report.u, &exact));
                runs.push(run);
            }
            Err(e) => {
                pass = false;
                notes.push(e);
            }
        }
    }
    notes.push(format!("t-cosine over 5 angles converged, max closed-form error {worst:.1e}"));
    outcome(pass && worst <= 1e-8, notes.join("; "))
}

fn criterion_3() -> Outcome {
    let grid = Grid3::cube(24).unwrap();
    let calc = Calculus::new(grid, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let thetas = [0.0, FRAC_PI_6, FRAC_PI_4, 2f64.sqrt().atan(), PI.atan(), FRAC_PI_2];
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let amp = rng.gen_range(0.01..0.2);
        let u = calc.random_band_limited(5, amp, &mut rng);
        for theta in thetas {
            let ma = MongeAmpere::new(&calc, theta).operator(&u).unwrap();
            worst = worst.max((ma.mean() - 1.0).abs());
        }
    }
    outcome(worst <= 1e-9, format!("20 fields x {} angles, max |mean MA - 1| = {worst:.2e}", thetas.len()))
}

fn criterion_4(runs: &[Run]) -> Outcome {
    let mut worst = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut pass = true;
    for r in runs {
        let calc = Calculus::new(r.report.u.grid(), r.backend);
        let drift = sum_ellipticity_check(&calc, &r.report.u).unwrap().min_value;
        let ok = r.report.margin_a > 0.0 && r.report.margin_b > 0.0 && drift > 0.0;
        if !ok {
            eprintln!("  {}: margins ({}, {}), drift {}", r.name, r.report.margin_a, r.report.margin_b, drift);
        }
        pass &= ok;
        worst = (worst.0.min(r.report.margin_a), worst.1.min(r.report.margin_b), worst.2.min(drift));
    }
    outcome(
        pass,
        format!(
            "{} runs, min margins ({:.3}, {:.3}), min(lap u + u_t + 2) = {:.3}",
            runs.len(),
            worst.0,
            worst.1,
            worst.2
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let minus = FrameMap(-Matrix4::identity());
    let q = quaternion_check().max_defect();
    let mut worst = q;
    for _ in 0..100 {
        let theta = rng.gen_range(0.0..2.0 * PI);
        let j = build_j(theta);
        let omega = build_omega(theta);
        worst = worst
            .max(j.compose(&j).max_abs_diff(&minus))
            .max((metric_from(&omega, &j) - Matrix4::identity()).abs().max())
            .max((wedge(&omega, &omega) - 2.0).abs());
    }
    outcome(worst <= 1e-12, format!("100 angles, max defect {worst:.1e} (quaternion {q:.1e})"))
}

fn criterion_6() -> Outcome {
    let eps = 0.4;
    let h = 0.01;
    let grid = BallGrid::new(2, 1.0, [h, h, 1.0]).unwrap();
    let field = BallField::from_fn(grid.clone(), |x| x[0] * x[0] + x[1] * x[1]).unwrap();
    let cs = contact_set(&field, eps).unwrap();
    let abp = abp_inequality(&cs).unwrap();
    let closed = eps * eps / (PI * 0.1 * 0.1 * 4.0);
    let r = |k: usize| {
        let c = grid.coords(k);
        c[0].hypot(c[1])
    };
    let outside = cs.points.iter().filter(|p| p.coords[0].hypot(p.coords[1]) > 0.1 + h).count();
    let missing = (0..grid.len()).filter(|&k| r(k) < 0.1 - h && !cs.contains(k)).count();
    let ratio_ok = (abp.ratio - closed).abs() <= 0.1 * closed;
    let holds = eps * eps <= abp.ratio * abp.integral * (1.0 + 1e-12);
    let disc_ok = outside == 0 && missing == 0;

    // convex perturbations: v = xᵀ(I + A)x + c(x⁴ + y⁴) + b·x
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ratios = Vec::new();
    let mut constants = Vec::new();
    let mut failures = 0;
    for _ in 0..100 {
        let m = [rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)];
        let a = [[m[0] * m[0], m[0] * m[1]], [m[0] * m[1], m[1] * m[1]]];
        let c = rng.gen_range(0.0..0.5);
        let b = [rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)];
        let f = BallField::from_fn(grid.clone(), |x| {
            let q = (1.0 + a[0][0]) * x[0] * x[0] + 2.0 * a[0][1] * x[0] * x[1] + (1.0 + a[1][1]) * x[1] * x[1];
            q + c * (x[0].powi(4) + x[1].powi(4)) + b[0] * x[0] + b[1] * x[1]
        })
        .unwrap();
        match contact_set(&f, eps).and_then(|cs| abp_inequality(&cs)) {
            Ok(rep) if eps * eps <= rep.ratio * rep.integral * (1.0 + 1e-12) => {
                ratios.push(rep.ratio);
                constants.push(rep.measured_c);
            }
            _ => failures += 1,
        }
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_c = constants.iter().cloned().fold(0.0, f64::max);
    // for convex v the gradient maps P onto the disc of radius ε/2, so the ratio tends to 4/π
    let bounded = failures == 0 && max_ratio <= 1.15 * closed && min_ratio >= 0.85 * closed;
    outcome(
        disc_ok && ratio_ok && holds && bounded,
        format!(
            "paraboloid |P| {} pts, outside {outside}, missing {missing}, ratio {:.4} vs {closed:.4}; \
             100 perturbations: ratio in [{min_ratio:.4}, {max_ratio:.4}], max C {max_c:.3}, failures {failures}",
            cs.len(),
            abp.ratio
        ),
    )
}

/// Runs with a nonconstant solution; the t-only angle sweep repeats one solution and is skipped.
fn pipeline_runs(runs: &[Run]) -> Vec<&Run> {
    runs.iter()
        .filter(|r| r.report.u.min() < 0.0 && !r.name.starts_with("t-cosine 64^3 at"))
        .collect()
}

fn criterion_7(runs: &[Run]) -> Outcome {
    let eps_list = [0.4, 0.2, 0.1, 0.05];
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut min_slack = f64::INFINITY;
    for r in pipeline_runs(runs) {
        let grid = r.report.u.grid();
        let calc = Calculus::new(grid, Backend::Spectral);
        let (deep, _) = deepen(&r.report.u, -1.05).unwrap();
        for epsilon in eps_list {
            let cfg = PipelineConfig {
                epsilon,
                ..PipelineConfig::default()
            };
            match torus_pipeline(&calc, &deep, &cfg) {
                Ok(PipelineOutcome::Completed(p)) => {
                    checked += 1;
                    min_slack = min_slack.min(p.sublevel_measure / p.measure_lower);
                    if !(p.measure_ok && p.excess_ok) {
                        failures.push(format!("{} eps {epsilon}", r.name));
                    }
                }
                Ok(PipelineOutcome::Skipped { note, .. }) => failures.push(format!("{} eps {epsilon}: {note}", r.name)),
                Err(e) => failures.push(format!("{} eps {epsilon}: {e}", r.name)),
            }
        }
    }
    outcome(
        failures.is_empty() && checked > 0,
        if failures.is_empty() {
            format!("{checked} rescaled runs, min |{{u <= inf u + 1}}| / (eps^3/C) = {min_slack:.3e}")
        } else {
            failures.join("; ")
        },
    )
}

fn criterion_8(runs: &[Run]) -> Outcome {
    let mut points = 0;
    let mut violations = 0;
    let mut errors = Vec::new();
    for r in runs {
        let grid = r.report.u.grid();
        let calc = Calculus::new(grid, Backend::Spectral);
        let base = PipelineConfig {
            require_depth: false,
            ..PipelineConfig::default()
        };
        let rho = weight_radius(grid, &base).unwrap();
        let cfg = PipelineConfig {
            epsilon: 0.9 * chain_epsilon_threshold(rho, base.radius),
            ..base
        };
        let result = torus_pipeline(&calc, &r.report.u, &cfg)
            .map_err(|e| e.to_string())
            .and_then(|o| match o {
                PipelineOutcome::Completed(p) => {
                    key_estimate_chain(&calc, &p.contact, &r.report.u, &r.density, r.theta).map_err(|e| e.to_string())
                }
                PipelineOutcome::Skipped { note, .. } => Err(note),
            });
        match result {
            Ok(trace) => {
                points += trace.rows.len();
                violations += trace.violations();
            }
            Err(e) => errors.push(format!("{}: {e}", r.name)),
        }
    }
    outcome(
        violations == 0 && errors.is_empty() && points > 0,
        format!("{} runs, {points} contact points, {violations} violations {}", runs.len(), errors.join("; ")),
    )
}

fn criterion_9() -> Outcome {
    let grid = Grid3::cube(24).unwrap();
    let calc = Calculus::new(grid, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p_list = [1.0 / 3.0, 0.5];
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let amp = rng.gen_range(0.05..2.0);
        let phi = calc.random_band_limited(4, amp, &mut rng);
        let osc = phi.max() - phi.min();
        let profile = level_set_profile(&phi, &log_s_grid(1e-4 * osc, osc, 200), &p_list).unwrap();
        for p in p_list {
            worst = worst.max(layer_cake_residual(&profile, p).unwrap());
        }
    }
    outcome(worst <= 0.01, format!("10 fields, p in {{1/3, 1/2}}, max relative residual {worst:.2e}"))
}

fn random_psd(rng: &mut impl Rng) -> Matrix4<f64> {
    let rank = rng.gen_range(1..=4);
    let m = Matrix4::from_fn(|_, j| if j < rank { rng.gen_range(-1.0..1.0) } else { 0.0 });
    m * m.transpose()
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut sum_violations = 0;
    let mut j_violations = 0;
    for _ in 0..100_000 {
        let a = random_psd(&mut rng);
        let b = random_psd(&mut rng);
        let (da, db, dab) = (a.determinant(), b.determinant(), (a + b).determinant());
        let scale = (a.norm() + b.norm()).powi(4);
        if dab < da + db - 1e-12 * scale {
            sum_violations += 1;
        }
        let s = SymMat4::new(a);
        let j = build_j(rng.gen_range(0.0..2.0 * PI));
        let sj = j_invariant_part(&s, &j);
        if s.det() > 8.0 * sj.det() + 1e-12 * a.norm().powi(4) {
            j_violations += 1;
        }
    }
    outcome(
        sum_violations == 0 && j_violations == 0,
        format!("1e5 samples: det(A+B) >= det A + det B violations {sum_violations}, det S <= 8 det S^J violations {j_violations}"),
    )
}

fn criterion_11(runs: &mut Vec<Run>) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        scenario: "generic".into(),
        backend: Backend::Fd,
        grids: vec![GridSpec::Cube(16), GridSpec::Cube(32), GridSpec::Cube(64)],
        plots: false,
        ..RunConfig::default()
    };
    let rows = match cmd_sweep(&cfg, dir.path()) {
        Ok(rows) => rows,
        Err(e) => return outcome(false, e.to_string()),
    };
    let orders: Vec<f64> = rows.iter().skip(1).map(|r| r.observed_order).collect();
    let errors: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.error_vs_reference)).collect();
    if let Ok(run) = solve("generic(0.3) 32^3 fd", DensityFamily::Generic { a: 0.3 }, 32, 0.0, Backend::Fd) {
        runs.push(run);
    }
    outcome(
        orders.len() == 2 && orders.iter().all(|o| (1.8..=2.2).contains(o)),
        format!("errors {} at n = 16, 32, 64; orders {:.3?}", errors.join(", "), orders),
    )
}

fn main() -> ExitCode {
    // test listing tools probe with `--list`; this target has no individually named tests
    if std::env::args().skip(1).any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut runs = Vec::new();
    let mut lines = Vec::new();
    let mut record = |n: usize, o: Outcome| {
        println!("criterion {n:2}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        lines.push(o.pass);
    };
    record(1, criterion_1(&mut runs));
    record(2, criterion_2(&mut runs));
    record(3, criterion_3());
    if let Ok(run) = solve("xy-bump 32^3 at pi/6", DensityFamily::XyBump { a: 0.3, k: 1 }, 32, FRAC_PI_6, Backend::Spectral) {
        runs.push(run);
    }
    let o11 = criterion_11(&mut runs);
    record(4, criterion_4(&runs));
    record(5, criterion_5());
    record(6, criterion_6());
    record(7, criterion_7(&runs));
    record(8, criterion_8(&runs));
    record(9, criterion_9());
    record(10, criterion_10());
    record(11, o11);
    let failed = lines.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
