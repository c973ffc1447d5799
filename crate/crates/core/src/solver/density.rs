use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SolveError;
use crate::grid3::{Grid3, ScalarField3};

/// Density `F` together with the constant `c` making `mean(e^{F+c}) = 1`,
/// the discrete form of `∫ (e^F − 1) ω_θ² = 0` (the volume form `ω_θ²` is
/// constant, see [`crate::geometry::wedge`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityF {
    raw: ScalarField3,
    shift: f64,
    exp: ScalarField3,
}

impl DensityF {
    /// Normalizes `raw` by `c = −log mean(exp raw)`.
    pub fn normalize(raw: ScalarField3) -> Result<Self, SolveError> {
        raw.check_finite()?;
        let top = raw.max();
        if top > f64::MAX.ln() {
            return Err(SolveError::Overflow { sup: top });
        }
        // mean(e^F) = e^top · mean(e^{F − top}), keeps the exponentials bounded
        let scaled_mean = raw.map(|v| (v - top).exp()).mean();
        let shift = -(top + scaled_mean.ln());
        let exp = raw.map(|v| (v + shift).exp());
        Ok(Self { raw, shift, exp })
    }

    pub fn grid(&self) -> Grid3 {
        self.raw.grid()
    }

    pub fn raw(&self) -> &ScalarField3 {
        &self.raw
    }

    /// The normalization constant `c`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `F + c`.
    pub fn normalized(&self) -> ScalarField3 {
        self.raw.shift(self.shift)
    }

    /// `e^{F + c}`, mean one.
    pub fn exp(&self) -> &ScalarField3 {
        &self.exp
    }
}

/// Builtin analytic density families. Each is normalized by [`DensityF::normalize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DensityFamily {
    /// `F ≡ 0`.
    Flat,
    /// `F = log(1 + a cos 2πt)`, `|a| < 1`.
    TCosine { a: f64 },
    /// `F = a cos(2πkx) cos(2πky)`.
    XyBump { a: f64, k: u32 },
    /// `F = a (cos 2πx + cos 2πy cos 2πt)`.
    Generic { a: f64 },
}

impl DensityFamily {
    pub fn name(&self) -> String {
        match self {
            Self::Flat => "flat".into(),
            Self::TCosine { a } => format!("t-cosine({a})"),
            Self::XyBump { a, k } => format!("xy-bump({a}, {k})"),
            Self::Generic { a } => format!("generic({a})"),
        }
    }

    pub fn raw_field(&self, grid: Grid3) -> Result<ScalarField3, SolveError> {
        let tau = 2.0 * PI;
        Ok(match *self {
            Self::Flat => ScalarField3::zeros(grid),
            Self::TCosine { a } => {
                if a.abs() >= 1.0 {
                    return Err(SolveError::InvalidConfig(format!(
                        "t-cosine needs |a| < 1, got {a}"
                    )));
                }
                ScalarField3::from_fn(grid, |_, _, t| (1.0 + a * (tau * t).cos()).ln())
            }
            Self::XyBump { a, k } => {
                let k = k as f64;
                ScalarField3::from_fn(grid, |x, y, _| a * (tau * k * x).cos() * (tau * k * y).cos())
            }
            Self::Generic { a } => ScalarField3::from_fn(grid, |x, y, t| {
                a * ((tau * x).cos() + (tau * y).cos() * (tau * t).cos())
            }),
        })
    }

    pub fn density(&self, grid: Grid3) -> Result<DensityF, SolveError> {
        DensityF::normalize(self.raw_field(grid)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid3 {
        Grid3::cube(16).unwrap()
    }

    #[test]
    fn constant_densities() {
        let d = DensityF::normalize(ScalarField3::zeros(grid())).unwrap();
        assert_eq!(d.shift(), 0.0);
        let d = DensityF::normalize(ScalarField3::constant(grid(), 3.0)).unwrap();
        assert!((d.shift() + 3.0).abs() < 1e-15);
    }

    #[test]
    fn t_cosine_is_already_normalized() {
        let d = DensityFamily::TCosine { a: 0.5 }.density(grid()).unwrap();
        assert!(d.shift().abs() <= 1e-12);
        assert!((d.exp().mean() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn generic_normalizes_to_unit_mean() {
        let d = DensityFamily::Generic { a: 0.3 }.density(grid()).unwrap();
        assert!((d.exp().mean() - 1.0).abs() <= 1e-12);
        assert!(d.shift() < 0.0);
    }

    #[test]
    fn overflow_is_rejected_with_sup() {
        let mut raw = ScalarField3::zeros(grid());
        raw.values_mut()[5] = 1e6;
        match DensityF::normalize(raw) {
            Err(SolveError::Overflow { sup }) => assert_eq!(sup, 1e6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn family_names_and_config_shape() {
        let f: DensityFamily = serde_json::from_str(r#"{"family":"xy-bump","a":0.2,"k":2}"#).unwrap();
        assert_eq!(f, DensityFamily::XyBump { a: 0.2, k: 2 });
        assert_eq!(DensityFamily::Generic { a: 0.3 }.name(), "generic(0.3)");
        assert!(DensityFamily::TCosine { a: 1.2 }.raw_field(grid()).is_err());
    }
}
