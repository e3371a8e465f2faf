//! Specification models: parametric maps `m(s, θ)` from a state (or time)
//! into the level interval `(0, 1)`, with analytic parameter gradients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_inv, norm_pdf};

/// Numerical clamp keeping levels strictly inside the unit interval.
pub const LEVEL_EPS: f64 = 1e-8;

/// Default parameter box half-width.
pub const DEFAULT_BOUND: f64 = 20.0;

/// Strictly increasing smooth map ℝ → (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Logistic,
    Probit,
}

impl Link {
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Link::Logistic => logistic(u),
            Link::Probit => norm_cdf(u),
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Link::Logistic => {
                let p = logistic(u);
                p * (1.0 - p)
            }
            Link::Probit => norm_pdf(u),
        }
    }

    pub fn inverse(self, p: f64) -> f64 {
        match self {
            Link::Logistic => (p / (1.0 - p)).ln(),
            Link::Probit => norm_inv(p),
        }
    }
}

pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecModel {
    /// `m = L(θ₁)`.
    Constant {
        #[serde(default)]
        link: Link,
    },
    /// `m = Ψ(θ₁ + z·θ₂)`.
    LogisticLinear,
    /// `m = 1{t > t_b}·L(θ₁) + 1{t ≤ t_b}·L(θ₂)`.
    StructuralBreak {
        break_at: f64,
        #[serde(default)]
        link: Link,
    },
    /// `m = L(θ₁ + θ₂·sin(2πt/θ₃))`.
    Seasonal {
        #[serde(default)]
        link: Link,
    },
}

impl SpecModel {
    pub fn n_params(&self) -> usize {
        match self {
            SpecModel::Constant { .. } => 1,
            SpecModel::LogisticLinear | SpecModel::StructuralBreak { .. } => 2,
            SpecModel::Seasonal { .. } => 3,
        }
    }

    pub fn link(&self) -> Link {
        match *self {
            SpecModel::Constant { link }
            | SpecModel::StructuralBreak { link, .. }
            | SpecModel::Seasonal { link } => link,
            SpecModel::LogisticLinear => Link::Logistic,
        }
    }

    /// Whether the model is driven by the time index rather than the state column.
    pub fn uses_time(&self) -> bool {
        matches!(
            self,
            SpecModel::StructuralBreak { .. } | SpecModel::Seasonal { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpecModel::Constant { .. } => "constant",
            SpecModel::LogisticLinear => "logistic_linear",
            SpecModel::StructuralBreak { .. } => "break",
            SpecModel::Seasonal { .. } => "seasonal",
        }
    }

    pub fn param_labels(&self) -> Vec<String> {
        let names: &[&str] = match self {
            SpecModel::Constant { .. } => &["level"],
            SpecModel::LogisticLinear => &["intercept", "slope"],
            SpecModel::StructuralBreak { .. } => &["after_break", "before_break"],
            SpecModel::Seasonal { .. } => &["intercept", "amplitude", "period"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::ParamLength {
                expected: self.n_params(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite parameter vector {theta:?}"
            )));
        }
        if matches!(self, SpecModel::Seasonal { .. }) && theta[2] == 0.0 {
            return Err(Error::ZeroPeriod);
        }
        Ok(())
    }

    /// Argument of the link together with its gradient in θ.
    ///
    /// For the break model the argument is whichever regime parameter applies.
    pub fn linear_predictor(&self, s: f64, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_params(theta)?;
        Ok(self.linear_predictor_unchecked(s, theta))
    }

    pub(crate) fn linear_predictor_unchecked(&self, s: f64, theta: &[f64]) -> (f64, Vec<f64>) {
        match *self {
            SpecModel::Constant { .. } => (theta[0], vec![1.0]),
            SpecModel::LogisticLinear => (theta[0] + s * theta[1], vec![1.0, s]),
            SpecModel::StructuralBreak { break_at, .. } => {
                if s > break_at {
                    (theta[0], vec![1.0, 0.0])
                } else {
                    (theta[1], vec![0.0, 1.0])
                }
            }
            SpecModel::Seasonal { .. } => {
                let phase = 2.0 * PI * s / theta[2];
                let (sin, cos) = phase.sin_cos();
                let d_period = -theta[1] * cos * phase / theta[2];
                (theta[0] + theta[1] * sin, vec![1.0, sin, d_period])
            }
        }
    }

    /// Level `m(s, θ)`, clamped into `[ε, 1 - ε]`.
    pub fn level(&self, s: f64, theta: &[f64]) -> Result<f64> {
        self.check_params(theta)?;
        Ok(self.level_unchecked(s, theta))
    }

    #[inline]
    pub(crate) fn level_unchecked(&self, s: f64, theta: &[f64]) -> f64 {
        let u = match *self {
            SpecModel::Constant { .. } => theta[0],
            SpecModel::LogisticLinear => theta[0] + s * theta[1],
            SpecModel::StructuralBreak { break_at, .. } => {
                if s > break_at {
                    theta[0]
                } else {
                    theta[1]
                }
            }
            SpecModel::Seasonal { .. } => theta[0] + theta[1] * (2.0 * PI * s / theta[2]).sin(),
        };
        self.link().apply(u).clamp(LEVEL_EPS, 1.0 - LEVEL_EPS)
    }

    /// Analytic `∂m/∂θ` (of the unclamped level).
    pub fn level_gradient(&self, s: f64, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        Ok(self.level_gradient_unchecked(s, theta))
    }

    pub(crate) fn level_gradient_unchecked(&self, s: f64, theta: &[f64]) -> Vec<f64> {
        let (u, mut grad) = self.linear_predictor_unchecked(s, theta);
        let d = self.link().derivative(u);
        grad.iter_mut().for_each(|g| *g *= d);
        grad
    }

    /// Parameter box used by the estimator. The seasonal period is confined
    /// to `[2, max(T, 3)]`.
    pub fn default_bounds(&self, t_eff: usize) -> Vec<(f64, f64)> {
        let mut b = vec![(-DEFAULT_BOUND, DEFAULT_BOUND); self.n_params()];
        if matches!(self, SpecModel::Seasonal { .. }) {
            b[2] = (2.0, (t_eff as f64).max(3.0));
        }
        b
    }
}

impl std::str::FromStr for SpecModel {
    type Err = Error;

    /// `constant`, `logistic_linear`, `break:<t_b>`, `seasonal`; optional
    /// `+probit` suffix selects the probit link where a link applies.
    fn from_str(s: &str) -> Result<Self> {
        let (base, link) = match s.strip_suffix("+probit") {
            Some(b) => (b, Link::Probit),
            None => (s, Link::Logistic),
        };
        let model = match base {
            "constant" => SpecModel::Constant { link },
            "logistic_linear" => SpecModel::LogisticLinear,
            "seasonal" => SpecModel::Seasonal { link },
            _ => {
                let at = base
                    .strip_prefix("break:")
                    .or_else(|| base.strip_prefix("break="))
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "unknown model `{s}` (expected constant|logistic_linear|break:<t_b>|seasonal)"
                        ))
                    })?;
                let break_at = at.parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("cannot parse break point `{at}`"))
                })?;
                SpecModel::StructuralBreak { break_at, link }
            }
        };
        if link == Link::Probit && model == SpecModel::LogisticLinear {
            return Err(Error::InvalidArgument(
                "logistic_linear always uses the logistic link".into(),
            ));
        }
        Ok(model)
    }
}

/// Flags a state column that cannot identify the slope of a
/// logistic-linear model.
pub fn identifiability_warning(model: &SpecModel, states: &[f64]) -> Option<String> {
    if !matches!(model, SpecModel::LogisticLinear) || states.is_empty() {
        return None;
    }
    let first = states[0];
    if states.iter().all(|&z| z == first) {
        Some("state column is constant: the slope parameter is not identified".into())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_linear_examples() {
        let m = SpecModel::LogisticLinear;
        assert_eq!(m.level(3.7, &[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(m.level(-12.0, &[0.8, 0.0]).unwrap(), logistic(0.8));
        assert_eq!(m.level_gradient(2.0, &[0.0, 0.0]).unwrap(), vec![0.25, 0.5]);
        assert!(m.level(0.0, &[1.0]).is_err());
    }

    #[test]
    fn break_model_example() {
        let m = SpecModel::StructuralBreak {
            break_at: 10.0,
            link: Link::Logistic,
        };
        let before = 1.0 / (1.0 + 1f64.exp());
        let after = 1.0 / (1.0 + (-1f64).exp());
        assert!((m.level(5.0, &[1.0, -1.0]).unwrap() - before).abs() < 1e-15);
        assert!((m.level(15.0, &[1.0, -1.0]).unwrap() - after).abs() < 1e-15);
        assert!((before - 0.268_94).abs() < 1e-5 && (after - 0.731_06).abs() < 1e-5);
    }

    #[test]
    fn constant_gradient() {
        let m = SpecModel::Constant {
            link: Link::Logistic,
        };
        assert_eq!(m.level_gradient(0.0, &[0.0]).unwrap(), vec![0.25]);
    }

    #[test]
    fn seasonal_rejects_zero_period() {
        let m = SpecModel::Seasonal {
            link: Link::Logistic,
        };
        assert!(matches!(m.level(1.0, &[0.0, 1.0, 0.0]), Err(Error::ZeroPeriod)));
    }

    #[test]
    fn levels_stay_inside_unit_interval() {
        let m = SpecModel::LogisticLinear;
        let hi = m.level(1.0, &[1e6, 0.0]).unwrap();
        let lo = m.level(1.0, &[-1e6, 0.0]).unwrap();
        assert!(hi < 1.0 && lo > 0.0);
    }

    #[test]
    fn parses_model_names() {
        assert_eq!("logistic_linear".parse::<SpecModel>().unwrap(), SpecModel::LogisticLinear);
        assert_eq!(
            "break:40".parse::<SpecModel>().unwrap(),
            SpecModel::StructuralBreak {
                break_at: 40.0,
                link: Link::Logistic
            }
        );
        assert_eq!(
            "constant+probit".parse::<SpecModel>().unwrap(),
            SpecModel::Constant { link: Link::Probit }
        );
        assert!("cubic".parse::<SpecModel>().is_err());
    }

    #[test]
    fn flags_constant_state() {
        assert!(identifiability_warning(&SpecModel::LogisticLinear, &[1.0, 1.0, 1.0]).is_some());
        assert!(identifiability_warning(&SpecModel::LogisticLinear, &[1.0, 2.0]).is_none());
    }
}
