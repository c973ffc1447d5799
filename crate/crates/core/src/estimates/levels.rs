use std::io::Write;
use std::path::Path;

use super::EstimateError;
use crate::grid3::{Axis, ScalarField3};

/// Distribution data of `d = φ − inf φ` under the normalized counting measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetProfile {
    pub inf: f64,
    pub osc: f64,
    pub s_grid: Vec<f64>,
    /// `γ(s) = |{φ ≥ inf φ + s}|`.
    pub gamma: Vec<f64>,
    /// Means of the truncations `ψ_s = max(inf φ + s − φ, 0)`.
    pub psi_mean: Vec<f64>,
    pub p_list: Vec<f64>,
    /// `‖φ − inf φ‖_{L^p}` for each entry of `p_list`.
    pub lp_norms: Vec<f64>,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_s_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn level_set_profile(phi: &ScalarField3, s_grid: &[f64], p_list: &[f64]) -> Result<LevelSetProfile, EstimateError> {
    if s_grid.is_empty() {
        return Err(EstimateError::EmptySGrid);
    }
    if s_grid[0] <= 0.0 || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(EstimateError::BadSGrid);
    }
    if let Some(&p) = p_list.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
        return Err(EstimateError::Exponent(p));
    }
    let inf = phi.min();
    let mut d: Vec<f64> = phi.values().iter().map(|v| v - inf).collect();
    d.sort_by(f64::total_cmp);
    let n = d.len() as f64;
    let mut prefix = Vec::with_capacity(d.len() + 1);
    prefix.push(0.0);
    for (i, v) in d.iter().enumerate() {
        prefix.push(prefix[i] + v);
    }
    let mut gamma = Vec::with_capacity(s_grid.len());
    let mut psi_mean = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let below = d.partition_point(|&v| v < s);
        gamma.push((d.len() - below) as f64 / n);
        psi_mean.push((below as f64 * s - prefix[below]) / n);
    }
    let lp_norms = p_list
        .iter()
        .map(|&p| (d.iter().map(|v| v.powf(p)).sum::<f64>() / n).powf(1.0 / p))
        .collect();
    Ok(LevelSetProfile {
        inf,
        osc: d.last().copied().unwrap_or(0.0),
        s_grid: s_grid.to_vec(),
        gamma,
        psi_mean,
        p_list: p_list.to_vec(),
        lp_norms,
    })
}

impl LevelSetProfile {
    /// Columns `s, gamma, psi_mean`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "s,gamma,psi_mean")?;
        for ((s, g), m) in self.s_grid.iter().zip(&self.gamma).zip(&self.psi_mean) {
            writeln!(w, "{s},{g},{m}")?;
        }
        w.flush()
    }
}

/// `p ∫₀^∞ γ(s) s^{p−1} ds` on the profile's s-grid: γ is linear between nodes
/// (with `γ(0) = 1`) and `s^{p−1}` is integrated exactly, so each interval
/// contributes `½(γ_{k−1} + γ_k)(s_k^p − s_{k−1}^p)`. Nothing is added past the
/// last node, so the grid should reach `osc φ`.
pub fn layer_cake(profile: &LevelSetProfile, p: f64) -> f64 {
    let mut prev_s: f64 = 0.0;
    let mut prev_g = 1.0;
    let mut total = 0.0;
    for (&s, &g) in profile.s_grid.iter().zip(&profile.gamma) {
        total += 0.5 * (prev_g + g) * (s.powf(p) - prev_s.powf(p));
        prev_s = s;
        prev_g = g;
    }
    total
}

/// Relative difference between [`layer_cake`] and the direct `‖φ − inf φ‖_p^p`.
pub fn layer_cake_residual(profile: &LevelSetProfile, p: f64) -> Option<f64> {
    let i = profile.p_list.iter().position(|&q| q == p)?;
    let direct = profile.lp_norms[i].powf(p);
    Some(if direct == 0.0 {
        layer_cake(profile, p).abs()
    } else {
        (layer_cake(profile, p) - direct).abs() / direct
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport {
    pub exponent: f64,
    /// `sup_{s ≥ 2} γ(s) s^exponent` over the s-grid, zero if no node reaches 2.
    pub sup: f64,
    pub s_at_sup: f64,
    pub nodes: usize,
}

pub fn decay_check(profile: &LevelSetProfile, exponent: f64) -> DecayReport {
    let mut out = DecayReport {
        exponent,
        sup: 0.0,
        s_at_sup: f64::NAN,
        nodes: 0,
    };
    for (&s, &g) in profile.s_grid.iter().zip(&profile.gamma) {
        if s < 2.0 {
            continue;
        }
        out.nodes += 1;
        let v = g * s.powf(exponent);
        if v > out.sup || out.s_at_sup.is_nan() {
            out.sup = v;
            out.s_at_sup = s;
        }
    }
    out
}

/// `ψ_s = max(inf φ + s − φ, 0)`.
pub fn truncation(phi: &ScalarField3, s: f64) -> ScalarField3 {
    let inf = phi.min();
    phi.map(|v| (inf + s - v).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinftyBound {
    pub p: f64,
    pub q: f64,
    /// `C_q = C_p^{1/p}`.
    pub c_q: f64,
    /// `C_q · measure_lower^{−q} + λ`.
    pub bound: f64,
}

/// Converts an `L^p` constant and a lower bound on `|{φ ≥ −λ}|` into an `L∞` bound.
pub fn lp_to_linfty(c_p: f64, p: f64, lam: f64, measure_lower: f64) -> Result<LinftyBound, EstimateError> {
    if !(p > 0.0 && p < 2.0 / 3.0) {
        return Err(EstimateError::Exponent(p));
    }
    if !(measure_lower > 0.0) {
        return Err(EstimateError::Parameter(format!("measure lower bound {measure_lower} must be positive")));
    }
    if !(c_p > 0.0) {
        return Err(EstimateError::Parameter(format!("constant {c_p} must be positive")));
    }
    let q = 1.0 / p;
    let c_q = c_p.powf(q);
    Ok(LinftyBound {
        p,
        q,
        c_q,
        bound: c_q * measure_lower.powf(-q) + lam,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainCheck {
    /// `(−λ − inf φ)^p |{φ ≥ −λ}|`.
    pub lower: f64,
    /// `∫_{φ ≥ −λ} (φ − inf φ)^p`.
    pub restricted: f64,
    /// `‖φ − inf φ‖_p^p`.
    pub full: f64,
    pub holds: bool,
}

/// Pointwise comparison behind the `L^p → L∞` step, requires `λ < −inf φ`.
pub fn chain_lower_bound_check(phi: &ScalarField3, p: f64, lam: f64) -> Result<ChainCheck, EstimateError> {
    let inf = phi.min();
    if !(lam < -inf) {
        return Err(EstimateError::Parameter(format!("need λ < −inf φ = {}", -inf)));
    }
    let n = phi.values().len() as f64;
    let upper: Vec<f64> = phi.values().iter().copied().filter(|&v| v >= -lam).collect();
    let lower = (-lam - inf).powf(p) * upper.len() as f64 / n;
    let restricted = upper.iter().map(|v| (v - inf).powf(p)).sum::<f64>() / n;
    let full = phi.values().iter().map(|v| (v - inf).powf(p)).sum::<f64>() / n;
    Ok(ChainCheck {
        lower,
        restricted,
        full,
        holds: lower <= restricted && restricted <= full,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevPoincare {
    pub grad_l1: f64,
    /// `‖ψ − ψ̄‖_{L^{4/3}} / ‖∂ψ‖_{L¹}`.
    pub ratio_4_3: f64,
    /// `‖ψ − ψ̄‖_{L^{3/2}} / ‖∂ψ‖_{L¹}`.
    pub ratio_3_2: f64,
}

/// Sobolev-Poincaré quotients with forward-difference gradients.
pub fn sobolev_poincare_ratio(psi: &ScalarField3) -> SobolevPoincare {
    let g = psi.grid();
    let h = g.spacings();
    let v = psi.values();
    let mut grad = 0.0;
    for idx in 0..g.len() {
        let (i, j, k) = g.unravel(idx);
        let (i, j, k) = (i as isize, j as isize, k as isize);
        let fwd = [
            g.index_wrapped(i + 1, j, k),
            g.index_wrapped(i, j + 1, k),
            g.index_wrapped(i, j, k + 1),
        ];
        let s: f64 = Axis::ALL
            .iter()
            .map(|a| ((v[fwd[a.index()]] - v[idx]) / h[a.index()]).powi(2))
            .sum();
        grad += s.sqrt();
    }
    let grad_l1 = grad / g.len() as f64;
    if grad_l1 == 0.0 {
        return SobolevPoincare {
            grad_l1,
            ratio_4_3: 0.0,
            ratio_3_2: 0.0,
        };
    }
    let mean = psi.mean();
    let norm = |q: f64| (v.iter().map(|x| (x - mean).abs().powf(q)).sum::<f64>() / g.len() as f64).powf(1.0 / q);
    SobolevPoincare {
        grad_l1,
        ratio_4_3: norm(4.0 / 3.0) / grad_l1,
        ratio_3_2: norm(1.5) / grad_l1,
    }
}
