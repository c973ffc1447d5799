use std::f64::consts::PI;

use ktcy::abp::{contact_set, curvature_scale, deepen, torus_pipeline, BallField, BallGrid, PipelineConfig};
use ktcy::estimates::{layer_cake_residual, level_set_profile, log_s_grid};
use ktcy::geometry::{build_j, build_omega, j_invariant_part, metric_from, trace_ratio, wedge, FrameMap, SymMat4};
use ktcy::grid3::{read_field, write_field_binary, write_field_csv, Axis, Backend, Calculus, DiffOp, Grid3, ScalarField3};
use ktcy::solver::{continuity_solve, DensityFamily, MongeAmpere, SolveConfig};
use nalgebra::Matrix4;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mode(grid: Grid3, k: [i64; 3], phase: f64) -> ScalarField3 {
    ScalarField3::from_fn(grid, |x, y, t| (2.0 * PI * (k[0] as f64 * x + k[1] as f64 * y + k[2] as f64 * t) + phase).cos())
}

fn mode_derivative(grid: Grid3, k: [i64; 3], phase: f64, a: usize) -> ScalarField3 {
    let w = 2.0 * PI * k[a] as f64;
    ScalarField3::from_fn(grid, |x, y, t| -w * (2.0 * PI * (k[0] as f64 * x + k[1] as f64 * y + k[2] as f64 * t) + phase).sin())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_first_derivative_is_exact_below_nyquist(kx in -7i64..8, ky in -7i64..8, kt in -7i64..8, phase in 0.0..6.3f64, a in 0usize..3) {
        let grid = Grid3::cube(16).unwrap();
        let calc = Calculus::new(grid, Backend::Spectral);
        let k = [kx, ky, kt];
        let d = calc.apply(&mode(grid, k, phase), &DiffOp::first_along(Axis::ALL[a].unit())).unwrap();
        let exact = mode_derivative(grid, k, phase, a);
        let err = d.zip_map(&exact, |p, q| (p - q).abs()).max();
        prop_assert!(err < 1e-10 * (1.0 + 2.0 * PI * 8.0), "error {}", err);
    }

    #[test]
    fn fd_second_derivative_matches_its_symbol(k in -7i64..8, phase in 0.0..6.3f64, a in 0usize..3) {
        let grid = Grid3::cube(16).unwrap();
        let calc = Calculus::new(grid, Backend::Fd);
        let mut kk = [0; 3];
        kk[a] = k;
        let f = mode(grid, kk, phase);
        let e = Axis::ALL[a].unit();
        let d = calc.apply(&f, &DiffOp::second_along(e, e)).unwrap();
        // central three-point stencil acting on e^{2πikx}: −4n² sin²(πk/n)
        let n = 16.0;
        let symbol = -4.0 * n * n * (PI * k as f64 / n).sin().powi(2);
        let err = d.zip_map(&f, |p, q| (p - symbol * q).abs()).max();
        prop_assert!(err < 1e-9 * n * n, "error {}", err);
    }

    #[test]
    fn poisson_inverts_laplacian(seed in 0u64..1000) {
        let grid = Grid3::new(16, 8, 12).unwrap();
        let calc = Calculus::new(grid, Backend::Spectral);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = calc.random_band_limited(3, 1.0, &mut rng);
        let f = f.shift(-f.mean());
        let u = calc.poisson_solve(&f).unwrap();
        let back = calc.apply(&u, &DiffOp::laplacian()).unwrap();
        prop_assert!(back.zip_map(&f, |p, q| (p - q).abs()).max() < 1e-10);
        prop_assert!(u.mean().abs() < 1e-12);
    }

    #[test]
    fn field_files_round_trip(seed in 0u64..1000, csv in any::<bool>()) {
        let grid = Grid3::new(8, 10, 12).unwrap();
        let calc = Calculus::new(grid, Backend::Spectral);
        let f = calc.random_band_limited(2, 3.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if csv { "f.csv" } else { "f.bin" });
        if csv { write_field_csv(&f, &path).unwrap() } else { write_field_binary(&f, &path).unwrap() }
        let g = read_field(&path).unwrap();
        prop_assert_eq!(g.grid(), grid);
        prop_assert_eq!(g.values(), f.values());
    }

    #[test]
    fn full_monge_ampere_has_unit_mean(seed in 0u64..1000, theta in 0.0..6.3f64, amp in 0.0..0.5f64) {
        let grid = Grid3::cube(16).unwrap();
        let calc = Calculus::new(grid, Backend::Spectral);
        let u = calc.random_band_limited(4, amp, &mut ChaCha8Rng::seed_from_u64(seed));
        let ma = MongeAmpere::new(&calc, theta).operator(&u).unwrap();
        prop_assert!((ma.mean() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn linearization_is_the_derivative(seed in 0u64..1000, theta in 0.0..6.3f64) {
        let grid = Grid3::cube(12).unwrap();
        let calc = Calculus::new(grid, Backend::Spectral);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = calc.random_band_limited(2, 0.002, &mut rng);
        let h = calc.random_band_limited(2, 1.0, &mut rng);
        let ma = MongeAmpere::new(&calc, theta);
        let lin = ma.linearize(&u, 1e-6).unwrap().apply(&h).unwrap();
        let d = 1e-5;
        let plus = ma.operator(&u.zip_map(&h, |a, b| a + d * b)).unwrap();
        let minus = ma.operator(&u.zip_map(&h, |a, b| a - d * b)).unwrap();
        let fd = plus.zip_map(&minus, |p, m| (p - m) / (2.0 * d));
        let scale = lin.sup_norm().max(1.0);
        prop_assert!(fd.zip_map(&lin, |p, q| (p - q).abs()).max() < 1e-6 * scale);
    }

    #[test]
    fn geometry_holds_for_every_angle(theta in -10.0..10.0f64) {
        let j = build_j(theta);
        let omega = build_omega(theta);
        prop_assert!(j.compose(&j).max_abs_diff(&FrameMap(-Matrix4::identity())) < 1e-12);
        prop_assert!((metric_from(&omega, &j) - Matrix4::identity()).abs().max() < 1e-12);
        prop_assert!((wedge(&omega, &omega) - 2.0).abs() < 1e-12);
        prop_assert!((trace_ratio(&omega, &omega).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn j_invariant_part_is_a_projection(theta in 0.0..6.3f64, entries in proptest::collection::vec(-1.0..1.0f64, 16)) {
        let m = Matrix4::from_column_slice(&entries);
        let s = SymMat4::new(m * m.transpose());
        let j = build_j(theta);
        let p = j_invariant_part(&s, &j);
        let pp = j_invariant_part(&p, &j);
        prop_assert!((p.matrix() - pp.matrix()).abs().max() < 1e-12);
        let conj = j.0.transpose() * p.matrix() * j.0;
        prop_assert!((conj - p.matrix()).abs().max() < 1e-12);
        prop_assert!(p.det() >= s.det() - 1e-12);
    }

    #[test]
    fn level_profile_is_monotone_and_consistent(seed in 0u64..1000, amp in 0.01..5.0f64) {
        let grid = Grid3::cube(16).unwrap();
        let calc = Calculus::new(grid, Backend::Spectral);
        let phi = calc.random_band_limited(3, amp, &mut ChaCha8Rng::seed_from_u64(seed));
        let osc = phi.max() - phi.min();
        let profile = level_set_profile(&phi, &log_s_grid(1e-4 * osc, osc, 200), &[1.0 / 3.0, 0.5]).unwrap();
        prop_assert!(profile.gamma.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(profile.psi_mean.windows(2).all(|w| w[1] >= w[0]));
        for p in [1.0 / 3.0, 0.5] {
            prop_assert!(layer_cake_residual(&profile, p).unwrap() < 0.01);
        }
    }
}

/// Unpruned support-plane scan over every ball point.
fn brute_force_contact(field: &BallField, eps: f64) -> Vec<usize> {
    let g = field.grid();
    let h = g.max_spacing();
    let slack = 0.5 * curvature_scale(field) * h * h;
    let v = field.values();
    (0..g.len())
        .filter(|&k| g.is_interior(k))
        .filter(|&k| {
            let Some(d) = field.gradient(k) else { return false };
            if d.iter().map(|c| c * c).sum::<f64>().sqrt() >= eps / 2.0 {
                return false;
            }
            let x = g.coords(k);
            (0..g.len()).all(|m| {
                let y = g.coords(m);
                v[m] >= v[k] + (0..3).map(|a| d[a] * (y[a] - x[a])).sum::<f64>() - slack
            })
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn contact_set_matches_unpruned_scan(
        a in 0.3..2.0f64,
        b in 0.3..2.0f64,
        wiggle in 0.0..0.05f64,
        freq in 1.0..6.0f64,
        eps in 0.1..0.8f64,
    ) {
        let grid = BallGrid::new(2, 1.0, [0.04, 0.04, 1.0]).unwrap();
        let field = BallField::from_fn(grid, |x| {
            a * x[0] * x[0] + b * x[1] * x[1] + wiggle * (freq * x[0]).sin() * (freq * x[1]).cos()
        })
        .unwrap();
        let v0 = field.values()[field.grid().center()];
        let gap = field.grid().boundary_layer().map(|k| field.values()[k]).fold(f64::INFINITY, f64::min) - v0;
        prop_assume!(gap >= eps);
        let cs = contact_set(&field, eps).unwrap();
        let fast: Vec<usize> = cs.points.iter().map(|p| p.index).collect();
        prop_assert_eq!(fast, brute_force_contact(&field, eps));
    }
}

#[test]
fn fd_generic_solve_converges_at_random_angles() {
    let grid = Grid3::cube(16).unwrap();
    let density = DensityFamily::Generic { a: 0.25 }.density(grid).unwrap();
    for theta in [0.3, 1.1, 2.7] {
        let cfg = SolveConfig {
            grid,
            theta,
            backend: Backend::Fd,
            ..SolveConfig::default()
        };
        let r = continuity_solve(&density, &cfg).unwrap();
        assert!(r.residual_sup <= cfg.newton_tol);
        assert!(r.margin_a > 0.0 && r.margin_b > 0.0);
        assert_eq!(r.u.max(), 0.0);
    }
}

#[test]
fn pipeline_is_translation_equivariant() {
    let grid = Grid3::cube(16).unwrap();
    let calc = Calculus::new(grid, Backend::Spectral);
    let density = DensityFamily::Generic { a: 0.3 }.density(grid).unwrap();
    let u = continuity_solve(&density, &SolveConfig { grid, theta: 0.5, ..SolveConfig::default() }).unwrap().u;
    let (deep, _) = deepen(&u, -1.2).unwrap();
    let shift = (3isize, 5isize, 7isize);
    let shifted = ScalarField3::new(
        grid,
        (0..grid.len())
            .map(|idx| {
                let (i, j, k) = grid.unravel(idx);
                deep.values()[grid.index_wrapped(i as isize + shift.0, j as isize + shift.1, k as isize + shift.2)]
            })
            .collect(),
    )
    .unwrap();
    let cfg = PipelineConfig { epsilon: 0.2, ..PipelineConfig::default() };
    let a = torus_pipeline(&calc, &deep, &cfg).unwrap();
    let b = torus_pipeline(&calc, &shifted, &cfg).unwrap();
    let (a, b) = (a.report().unwrap(), b.report().unwrap());
    assert_ne!(a.argmin, b.argmin);
    let spacing = grid.spacings();
    for (axis, s) in [shift.0, shift.1, shift.2].iter().enumerate() {
        let moved = (b.center[axis] + *s as f64 * spacing[axis] - a.center[axis]).rem_euclid(1.0);
        assert!(moved < 1e-9 || moved > 1.0 - 1e-9, "axis {axis}: {moved}");
    }
    assert_eq!(a.contact.len(), b.contact.len());
    assert!((a.abp.ratio - b.abp.ratio).abs() < 1e-9 * a.abp.ratio);
    assert!((a.sublevel_measure - b.sublevel_measure).abs() < 1e-12);
}

#[test]
fn continuity_step_count_does_not_change_the_solution() {
    let grid = Grid3::cube(16).unwrap();
    let density = DensityFamily::Generic { a: 0.3 }.density(grid).unwrap();
    let solve = |steps| {
        let cfg = SolveConfig { grid, theta: 0.4, continuity_steps: steps, ..SolveConfig::default() };
        continuity_solve(&density, &cfg).unwrap().u
    };
    let reference = solve(1);
    for steps in [2, 4, 7] {
        let u = solve(steps);
        assert!(u.zip_map(&reference, |a, b| (a - b).abs()).max() < 1e-9, "steps {steps}");
    }
}
