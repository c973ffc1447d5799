//! Level-set distribution of a solution: `γ(s)`, the layer-cake identity and the
//! `L^p → L^∞` step.

use ktcy::estimates::{layer_cake, level_set_profile, log_s_grid, lp_to_linfty};
use ktcy::grid3::Grid3;
use ktcy::solver::{continuity_solve, DensityFamily, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid3::cube(24)?;
    let density = DensityFamily::Generic { a: 0.3 }.density(grid)?;
    let u = continuity_solve(&density, &SolveConfig { grid, ..SolveConfig::default() })?.u;
    let osc = u.max() - u.min();
    let p_list = [1.0 / 3.0, 0.5];
    let profile = level_set_profile(&u, &log_s_grid(1e-4 * osc, osc, 200), &p_list)?;

    for k in (0..200).step_by(40) {
        println!("s {:.3e}  gamma {:.4}  mean psi_s {:.3e}", profile.s_grid[k], profile.gamma[k], profile.psi_mean[k]);
    }
    for (i, &p) in p_list.iter().enumerate() {
        let direct = profile.lp_norms[i].powf(p);
        let cake = layer_cake(&profile, p);
        let lam = osc / 2.0;
        let measure = u.values().iter().filter(|&&v| v >= -lam).count() as f64 / grid.len() as f64;
        let bound = lp_to_linfty(direct, p, lam, measure)?;
        println!(
            "p {p:.3}: direct {direct:.5}, layer cake {cake:.5} ({:.2e} rel), sup|u| {:.4} <= {:.4}",
            (cake - direct).abs() / direct,
            u.sup_norm(),
            bound.bound
        );
    }
    Ok(())
}
