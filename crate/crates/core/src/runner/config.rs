use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::abp::Fmono;
use crate::grid3::{read_field, Backend, Grid3};
use crate::solver::{DensityF, DensityFamily, LineSearch, SolveConfig};

/// Density given either as a builtin family or as a field file (grid3 layout).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySource {
    Family(DensityFamily),
    File { file: PathBuf },
}

/// Grid size: one integer for a cube or `[n_x, n_y, n_t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Cube(usize),
    Dims([usize; 3]),
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid3, RunError> {
        let [a, b, c] = match *self {
            Self::Cube(n) => [n; 3],
            Self::Dims(d) => d,
        };
        Grid3::new(a, b, c).map_err(|e| RunError::Config(e.to_string()))
    }
}

/// Newton and continuity settings; the grid, angle and backend come from the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub continuity_steps: usize,
    pub ellipticity_floor: f64,
    pub linear_rtol: f64,
    pub damping: LineSearch,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolveConfig::default();
        Self {
            newton_tol: d.newton_tol,
            max_newton: d.max_newton,
            continuity_steps: d.continuity_steps,
            ellipticity_floor: d.ellipticity_floor,
            linear_rtol: d.linear_rtol,
            damping: d.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub theta: f64,
    /// Angles for `sweep`; defaults to `[theta]`.
    pub thetas: Option<Vec<f64>>,
    /// Defaults to the builtin family named by `scenario`.
    pub density: Option<DensitySource>,
    /// The first entry is used by `solve`; `sweep` runs all of them.
    pub grids: Vec<GridSpec>,
    pub backend: Backend,
    pub solver: SolverSettings,
    pub epsilon: f64,
    pub radius: f64,
    /// Chart refinement relative to the torus grid.
    pub refine: usize,
    /// Epsilons for the rescaled measure-bound runs.
    pub epsilon_sweep: Vec<f64>,
    /// Target infimum of the rescaled solution (below −1).
    pub depth: f64,
    /// Explicit s-grid for level-set analytics; log-spaced over `[1e-4 osc, osc]` when absent.
    pub s_grid: Option<Vec<f64>>,
    pub s_points: usize,
    pub p_list: Vec<f64>,
    /// Exponent in the diagnostic `sup_{s ≥ 2} γ(s) s^e`.
    pub decay_exponent: f64,
    pub fmono: Fmono,
    pub seed: u64,
    pub plots: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "flat".into(),
            theta: 0.0,
            thetas: None,
            density: None,
            grids: vec![GridSpec::Cube(64)],
            backend: Backend::Spectral,
            solver: SolverSettings::default(),
            epsilon: 0.1,
            radius: 0.25,
            refine: 2,
            epsilon_sweep: vec![0.4, 0.2, 0.1, 0.05],
            depth: -1.05,
            s_grid: None,
            s_points: 200,
            p_list: vec![1.0 / 3.0, 0.5],
            decay_exponent: 2.0 / 3.0,
            fmono: Fmono::PowerPositive { p: 2.0 },
            seed: 0,
            plots: true,
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.grids.is_empty() {
            return bad("grids must not be empty".into());
        }
        for g in &self.grids {
            g.grid()?;
        }
        if let Some(t) = &self.thetas {
            if t.is_empty() {
                return bad("thetas must not be empty when given".into());
            }
        }
        if !self.theta.is_finite() || self.thetas.iter().flatten().any(|t| !t.is_finite()) {
            return bad("angles must be finite".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) || self.epsilon_sweep.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return bad("epsilons must lie in (0, 1]".into());
        }
        if !(self.radius > 0.0 && self.radius <= 0.25) {
            return bad(format!("radius {} must lie in (0, 1/4]", self.radius));
        }
        if self.refine == 0 {
            return bad("refine must be at least 1".into());
        }
        if !(self.depth < -1.0) {
            return bad(format!("depth {} must be below -1", self.depth));
        }
        if self.p_list.iter().any(|p| !(*p > 0.0)) {
            return bad("p_list entries must be positive".into());
        }
        if self.s_points < 2 && self.s_grid.is_none() {
            return bad("s_points must be at least 2".into());
        }
        self.fmono.validate().map_err(|e| RunError::Config(e.to_string()))?;
        if let Some(DensitySource::File { file }) = &self.density {
            let p = self.resolve(file);
            if !p.exists() {
                return bad(format!("density file {} does not exist", p.display()));
            }
        }
        self.family()?;
        self.solve_config(self.grids[0].grid()?, self.theta)
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Builtin family implied by the config, if the density is not a file.
    pub fn family(&self) -> Result<Option<DensityFamily>, RunError> {
        Ok(match &self.density {
            Some(DensitySource::Family(f)) => Some(*f),
            Some(DensitySource::File { .. }) => None,
            None => Some(match self.scenario.as_str() {
                "flat" => DensityFamily::Flat,
                "t-cosine" => DensityFamily::TCosine { a: 0.5 },
                "xy-bump" => DensityFamily::XyBump { a: 0.3, k: 1 },
                "generic" => DensityFamily::Generic { a: 0.3 },
                other => {
                    return Err(RunError::Config(format!(
                        "scenario {other:?} names no builtin density; give \"density\" explicitly"
                    )))
                }
            }),
        })
    }

    pub fn density(&self, grid: Grid3) -> Result<DensityF, RunError> {
        match self.family()? {
            Some(f) => f.density(grid).map_err(|e| RunError::Config(e.to_string())),
            None => {
                let Some(DensitySource::File { file }) = &self.density else {
                    unreachable!()
                };
                let raw = read_field(&self.resolve(file)).map_err(|e| RunError::Config(e.to_string()))?;
                if raw.grid() != grid {
                    return Err(RunError::Config(format!(
                        "density file grid {:?} differs from run grid {:?}",
                        raw.grid(),
                        grid
                    )));
                }
                DensityF::normalize(raw).map_err(|e| RunError::Config(e.to_string()))
            }
        }
    }

    pub fn density_name(&self) -> String {
        match (&self.density, self.family()) {
            (Some(DensitySource::File { file }), _) => format!("file:{}", file.display()),
            (_, Ok(Some(f))) => f.name(),
            _ => "unknown".into(),
        }
    }

    pub fn solve_config(&self, grid: Grid3, theta: f64) -> SolveConfig {
        let s = &self.solver;
        SolveConfig {
            theta,
            grid,
            backend: self.backend,
            newton_tol: s.newton_tol,
            max_newton: s.max_newton,
            damping: s.damping,
            continuity_steps: s.continuity_steps,
            ellipticity_floor: s.ellipticity_floor,
            linear_rtol: s.linear_rtol,
            ..SolveConfig::default()
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.thetas.clone().unwrap_or_else(|| vec![self.theta])
    }
}
