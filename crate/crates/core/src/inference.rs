//! J-test of overidentifying restrictions, Wald tests, chi-square tail
//! probabilities and pointwise confidence bands for the level curve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{asymptotic_covariance, inverse_psd, GmmFit};
use crate::special::{gamma_q, norm_inv};
use crate::specmodels::SpecModel;

/// `P(χ²_df > x)`.
pub fn chi2_survival(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidArgument("chi-square needs df > 0".into()));
    }
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "chi-square statistic must be non-negative, got {x}"
        )));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_q(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    J,
    Wald,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    #[serde(rename = "T_eff")]
    pub t_eff: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TestResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

fn small_sample_warning(t_eff: usize, p: usize) -> Vec<String> {
    if t_eff < 30 * p {
        vec![format!(
            "effective sample size {t_eff} is below 30·p = {}; asymptotic p-values may be unreliable",
            30 * p
        )]
    } else {
        Vec::new()
    }
}

/// `J = T_eff · g_T(θ̂)' S⁻¹ g_T(θ̂)` with `S` the HAC matrix at `θ̂`.
pub fn j_test(fit: &GmmFit) -> Result<TestResult> {
    j_statistic(fit, &fit.moment_mean)
}

/// J-test with an externally supplied moment mean (e.g. from
/// [`crate::gmm::moment_series`]).
pub fn j_statistic(fit: &GmmFit, moment_mean: &DVector<f64>) -> Result<TestResult> {
    let (q, p) = (fit.q(), fit.p());
    if q <= p {
        return Err(Error::ExactlyIdentified);
    }
    if moment_mean.len() != q {
        return Err(Error::Shape(format!(
            "moment mean has length {}, expected {q}",
            moment_mean.len()
        )));
    }
    let (s_inv, _) = inverse_psd(&fit.s)?;
    let quad = (moment_mean.transpose() * s_inv * moment_mean)[(0, 0)];
    let statistic = (fit.t_eff as f64 * quad).max(0.0);
    let df = q - p;
    Ok(TestResult {
        kind: TestKind::J,
        statistic,
        df,
        p_value: chi2_survival(statistic, df)?,
        t_eff: fit.t_eff,
        warnings: small_sample_warning(fit.t_eff, p),
    })
}

/// A differentiable restriction `R(θ) = 0`.
pub trait Restriction {
    fn value(&self, theta: &[f64]) -> DVector<f64>;
    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64>;
}

/// `R(θ) = Aθ - b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRestriction {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearRestriction {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Shape(format!(
                "{} restriction rows but {} targets",
                a.nrows(),
                b.len()
            )));
        }
        Ok(LinearRestriction { a, b })
    }

    /// `θ₂ = 0`: the level does not depend on the state.
    pub fn zero_slope() -> Self {
        LinearRestriction {
            a: DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            b: DVector::zeros(1),
        }
    }

    /// `θ₁ - θ₂ = 0`: no structural break.
    pub fn no_break() -> Self {
        LinearRestriction {
            a: DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            b: DVector::zeros(1),
        }
    }

    /// Built-in restriction by name.
    pub fn named(name: &str, model: &SpecModel) -> Result<Self> {
        let (r, ok) = match name {
            "zero_slope" => (Self::zero_slope(), *model == SpecModel::LogisticLinear),
            "no_break" => (
                Self::no_break(),
                matches!(model, SpecModel::StructuralBreak { .. }),
            ),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown restriction `{other}` (expected zero_slope|no_break)"
                )))
            }
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "restriction `{name}` does not apply to model `{}`",
                model.name()
            )));
        }
        Ok(r)
    }
}

impl Restriction for LinearRestriction {
    fn value(&self, theta: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(theta) - &self.b
    }

    fn jacobian(&self, _theta: &[f64]) -> DMatrix<f64> {
        self.a.clone()
    }
}

/// `W = R(θ̂)' [R_θ Σ̂ R_θ']⁻¹ R(θ̂)` with `Σ̂` the covariance of `θ̂`
/// (including the `1/T` factor).
pub fn wald_test(fit: &GmmFit, restriction: &dyn Restriction) -> Result<TestResult> {
    let cov = asymptotic_covariance(fit);
    let mut res = wald_statistic(&fit.theta, &cov, restriction)?;
    res.t_eff = fit.t_eff;
    res.warnings = small_sample_warning(fit.t_eff, fit.p());
    Ok(res)
}

/// Wald test from an estimate and its covariance.
pub fn wald_statistic(
    theta: &[f64],
    cov: &DMatrix<f64>,
    restriction: &dyn Restriction,
) -> Result<TestResult> {
    let p = theta.len();
    let r = restriction.value(theta);
    let rg = restriction.jacobian(theta);
    let l = r.len();
    if l == 0 || l > p || rg.shape() != (l, p) || cov.shape() != (p, p) {
        return Err(Error::Shape(format!(
            "restriction with {l} rows and Jacobian {:?} for {p} parameters",
            rg.shape()
        )));
    }
    let middle = &rg * cov * rg.transpose();
    let middle = (&middle + middle.transpose()) * 0.5;
    let inv = middle
        .cholesky()
        .ok_or(Error::Singular("Wald middle matrix R_θ Σ R_θ'"))?
        .inverse();
    let statistic = (r.transpose() * inv * &r)[(0, 0)].max(0.0);
    Ok(TestResult {
        kind: TestKind::Wald,
        statistic,
        df: l,
        p_value: chi2_survival(statistic, l)?,
        t_eff: 0,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBand {
    pub z_grid: Vec<f64>,
    pub level_hat: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub confidence: f64,
}

/// Pointwise band for `m(z, θ̂)` from a fit.
pub fn level_confidence_band(
    fit: &GmmFit,
    z_grid: &[f64],
    confidence: f64,
) -> Result<LevelBand> {
    level_band(&fit.model, &fit.theta, &asymptotic_covariance(fit), z_grid, confidence)
}

/// Normal interval for the link argument `η(z) = L⁻¹(m(z, θ̂))` with
/// variance `c(z)' Σ̂ c(z)`, mapped back through the link.
pub fn level_band(
    model: &SpecModel,
    theta: &[f64],
    cov: &DMatrix<f64>,
    z_grid: &[f64],
    confidence: f64,
) -> Result<LevelBand> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::LevelOutOfRange(confidence));
    }
    let p = model.n_params();
    if cov.shape() != (p, p) {
        return Err(Error::Shape(format!(
            "covariance is {:?}, expected {p}×{p}",
            cov.shape()
        )));
    }
    let link = model.link();
    // monotonicity of the link is what makes the back-transformed interval exact
    if link.apply(1.0) <= link.apply(-1.0) {
        return Err(Error::InvalidArgument("link is not increasing".into()));
    }
    let crit = norm_inv(0.5 + confidence / 2.0);
    let mut band = LevelBand {
        z_grid: z_grid.to_vec(),
        level_hat: Vec::with_capacity(z_grid.len()),
        lower: Vec::with_capacity(z_grid.len()),
        upper: Vec::with_capacity(z_grid.len()),
        confidence,
    };
    for &z in z_grid {
        let (eta, grad) = model.linear_predictor(z, theta)?;
        let c = DVector::from_vec(grad);
        let var = (c.transpose() * cov * &c)[(0, 0)].max(0.0);
        let half = crit * var.sqrt();
        let level = model.level(z, theta)?;
        band.level_hat.push(level);
        band.lower.push(link.apply(eta - half).min(level));
        band.upper.push(link.apply(eta + half).max(level));
    }
    Ok(band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specmodels::logistic;

    #[test]
    fn chi2_examples() {
        assert!((chi2_survival(0.80, 2).unwrap() - 0.6703).abs() < 1e-4);
        assert_eq!(chi2_survival(0.0, 3).unwrap(), 1.0);
        assert!((chi2_survival(3.841, 1).unwrap() - 0.05).abs() < 2e-4);
        assert!(chi2_survival(-1.0, 2).is_err());
        assert!(chi2_survival(1.0, 0).is_err());
    }

    #[test]
    fn chi2_even_df_closed_form() {
        // df = 2: exp(-x/2); df = 4: exp(-x/2)(1 + x/2)
        for &x in &[0.1, 1.0, 5.0, 40.0, 200.0] {
            let two = (-x / 2.0f64).exp();
            assert!((chi2_survival(x, 2).unwrap() - two).abs() < 1e-14);
            let four = two * (1.0 + x / 2.0);
            assert!((chi2_survival(x, 4).unwrap() - four).abs() < 1e-14);
        }
    }

    #[test]
    fn wald_zero_at_restriction() {
        let cov = DMatrix::identity(2, 2) * 0.01;
        let res = wald_statistic(&[0.7, 0.0], &cov, &LinearRestriction::zero_slope()).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.p_value, 1.0);
        assert_eq!(res.df, 1);
    }

    #[test]
    fn wald_rejects_oversized_restriction() {
        let cov = DMatrix::identity(1, 1);
        let r = LinearRestriction::new(DMatrix::identity(2, 1), DVector::zeros(2)).unwrap();
        assert!(wald_statistic(&[0.1], &cov, &r).is_err());
        let singular = DMatrix::zeros(2, 2);
        assert!(matches!(
            wald_statistic(&[0.0, 1.0], &singular, &LinearRestriction::zero_slope()),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn named_restrictions_check_model() {
        assert!(LinearRestriction::named("zero_slope", &SpecModel::LogisticLinear).is_ok());
        assert!(LinearRestriction::named(
            "no_break",
            &SpecModel::Constant {
                link: Default::default()
            }
        )
        .is_err());
        assert!(LinearRestriction::named("other", &SpecModel::LogisticLinear).is_err());
    }

    #[test]
    fn band_collapses_without_uncertainty() {
        let band = level_band(
            &SpecModel::LogisticLinear,
            &[0.3, -0.2],
            &DMatrix::zeros(2, 2),
            &[-1.0, 0.0, 2.0],
            0.8,
        )
        .unwrap();
        assert_eq!(band.lower, band.level_hat);
        assert_eq!(band.upper, band.level_hat);
    }

    #[test]
    fn band_at_origin() {
        let t = 400.0;
        let cov = DMatrix::identity(2, 2) / t;
        let band = level_band(&SpecModel::LogisticLinear, &[0.0, 0.0], &cov, &[0.0], 0.8).unwrap();
        let half = norm_inv(0.9) / t.sqrt();
        assert!((norm_inv(0.9) - 1.2816).abs() < 1e-4);
        assert!((band.lower[0] - logistic(-half)).abs() < 1e-14);
        assert!((band.upper[0] - logistic(half)).abs() < 1e-14);
        assert_eq!(band.level_hat[0], 0.5);
    }
}
