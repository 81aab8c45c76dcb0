use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::group::{GroupKind, SymmetryGroup};

/// Positive-definite kernel on `R^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Kernel {
    /// `exp(−σ‖u − v‖²)`.
    Gaussian { sigma: f64 },
    /// `exp(−σ‖u − v‖₁)`.
    Laplace { sigma: f64 },
    /// `(‖u‖^α + ‖v‖^α − ‖u − v‖^α) / 2`, `α ∈ (0, 2)`.
    Distance { alpha: f64 },
}

/// Bandwidth `1/(4p)`, i.e. `K(x, y) = exp(−‖x − y‖²/(4p))`.
pub fn default_sigma(p: usize) -> f64 {
    1.0 / (4.0 * p as f64)
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Kernel::Gaussian { sigma }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Kernel::Gaussian { sigma } | Kernel::Laplace { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::invalid(format!("kernel bandwidth must be positive, got {sigma}")))
            }
            Kernel::Distance { alpha } if !(alpha > 0.0 && alpha < 2.0) => {
                Err(Error::invalid(format!("distance kernel exponent must lie in (0, 2), got {alpha}")))
            }
            k => Ok(k),
        }
    }

    /// Builds a kernel from a CLI name and optional parameter; the bandwidth
    /// defaults to [`default_sigma`] and the exponent to 1.
    pub fn from_name(name: &str, param: Option<f64>, p: usize) -> Result<Self> {
        let k = match name {
            "gaussian" => Kernel::Gaussian {
                sigma: param.unwrap_or_else(|| default_sigma(p)),
            },
            "laplace" => Kernel::Laplace {
                sigma: param.unwrap_or_else(|| default_sigma(p)),
            },
            "distance" => Kernel::Distance {
                alpha: param.unwrap_or(1.0),
            },
            _ => return Err(Error::invalid(format!("unknown kernel {name:?}"))),
        };
        k.validated()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Gaussian { .. } => "gaussian",
            Kernel::Laplace { .. } => "laplace",
            Kernel::Distance { .. } => "distance",
        }
    }

    #[inline]
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { sigma } => {
                let d: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sigma * d).exp()
            }
            Kernel::Laplace { sigma } => {
                let d: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
                (-sigma * d).exp()
            }
            Kernel::Distance { alpha } => {
                let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                let d: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                0.5 * (nu.powf(alpha) + nv.powf(alpha) - d.powf(alpha))
            }
        }
    }

    /// Whether `K(Qu, Qv) = K(u, v)` for every `Q` in `group`.
    pub fn is_invariant_under(&self, group: &SymmetryGroup) -> bool {
        match self {
            Kernel::Gaussian { .. } | Kernel::Distance { .. } => true,
            Kernel::Laplace { .. } => matches!(
                group.kind(),
                GroupKind::Trivial | GroupKind::Central | GroupKind::Sign | GroupKind::Permutation
            ),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Gaussian { sigma } => write!(f, "gaussian({sigma:?})"),
            Kernel::Laplace { sigma } => write!(f, "laplace({sigma:?})"),
            Kernel::Distance { alpha } => write!(f, "distance({alpha:?})"),
        }
    }
}

/// Score function `J` applied to ranks before they enter a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    #[default]
    Identity,
    /// `(Φ(x₁), …, Φ(x_p))`.
    NormalCdf,
}

impl Score {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Score::Identity => x.to_vec(),
            Score::NormalCdf => x.iter().map(|v| normal_cdf(*v)).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Score::Identity => "identity",
            Score::NormalCdf => "normal_cdf",
        }
    }
}

impl FromStr for Score {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Score::Identity),
            "normal_cdf" | "normal-cdf" | "phi" => Ok(Score::NormalCdf),
            _ => Err(Error::invalid(format!("unknown score function {s:?}"))),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let g = Kernel::Gaussian { sigma: 1.0 };
        assert!((g.eval(&[0.0], &[1.0]) - (-1f64).exp()).abs() < 1e-15);
        let l = Kernel::Laplace { sigma: 0.5 };
        assert!((l.eval(&[0.0, 0.0], &[1.0, -2.0]) - (-1.5f64).exp()).abs() < 1e-15);
        let d = Kernel::Distance { alpha: 1.0 };
        // (5 + 1 − ‖(3,4) − (1,0)‖)/2 = (6 − √20)/2
        assert!((d.eval(&[3.0, 4.0], &[1.0, 0.0]) - (6.0 - 20f64.sqrt()) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_parameters_are_checked() {
        assert!(Kernel::gaussian(0.0).is_err());
        assert!(Kernel::from_name("distance", Some(2.0), 2).is_err());
        assert_eq!(
            Kernel::from_name("gaussian", None, 2).unwrap(),
            Kernel::Gaussian { sigma: 0.125 }
        );
        assert!(Kernel::from_name("cosine", None, 2).is_err());
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        // statrs' erfc is good to about 1e-11 here.
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-10);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-10);
    }
}
