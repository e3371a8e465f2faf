//! Identification functions for quantiles and expectiles, plus solvers for
//! the standard normal and empirical samples.
//!
//! Both identification functions are affine in the level `τ`:
//! `V(x, y; τ) = A(x, y) - τ·B(x, y)` with
//!
//! * quantile:  `A = 1{y ≤ x}`,        `B = 1`
//! * expectile: `A = max(x - y, 0)`,   `B = |x - y|`
//!
//! The GMM objective exploits this to precompute per-row terms once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_inv, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Quantile,
    Expectile,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Quantile => f.write_str("quantile"),
            Family::Expectile => f.write_str("expectile"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(Family::Quantile),
            "expectile" => Ok(Family::Expectile),
            other => Err(Error::InvalidArgument(format!(
                "unknown family `{other}` (expected quantile|expectile)"
            ))),
        }
    }
}

pub(crate) fn check_level(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::LevelOutOfRange(tau))
    }
}

impl Family {
    /// `V(x, y)` at level `tau`.
    pub fn identification(self, x: f64, y: f64, tau: f64) -> Result<f64> {
        check_level(tau)?;
        Ok(self.identification_unchecked(x, y, tau))
    }

    /// `∂V/∂τ`: `-1` for quantiles, `-|x - y|` for expectiles.
    pub fn identification_level_derivative(self, x: f64, y: f64, tau: f64) -> Result<f64> {
        check_level(tau)?;
        Ok(-self.level_slope(x, y))
    }

    #[inline]
    pub(crate) fn identification_unchecked(self, x: f64, y: f64, tau: f64) -> f64 {
        self.intercept(x, y) - tau * self.level_slope(x, y)
    }

    /// `A(x, y)` in `V = A - τ·B`.
    #[inline]
    pub(crate) fn intercept(self, x: f64, y: f64) -> f64 {
        match self {
            Family::Quantile => {
                if y <= x {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Expectile => (x - y).max(0.0),
        }
    }

    /// `B(x, y)` in `V = A - τ·B`.
    #[inline]
    pub(crate) fn level_slope(self, x: f64, y: f64) -> f64 {
        match self {
            Family::Quantile => 1.0,
            Family::Expectile => (x - y).abs(),
        }
    }

    /// The level-`tau` functional of the standard normal distribution.
    pub fn normal_functional(self, tau: f64) -> Result<f64> {
        match self {
            Family::Quantile => normal_quantile(tau),
            Family::Expectile => normal_expectile(tau),
        }
    }

    /// Level-`tau` functional of an empirical sample.
    pub fn sample_functional(self, values: &[f64], tau: f64) -> Result<f64> {
        match self {
            Family::Quantile => sample_quantile(values, tau),
            Family::Expectile => sample_expectile(values, tau),
        }
    }
}

pub fn normal_quantile(tau: f64) -> Result<f64> {
    check_level(tau)?;
    Ok(norm_inv(tau))
}

// (1-τ)·E[(x-Y)⁺] - τ·E[(Y-x)⁺] for Y ~ N(0, 1).
fn expectile_equation(x: f64, tau: f64) -> (f64, f64) {
    let cdf = norm_cdf(x);
    let pdf = norm_pdf(x);
    let below = x * cdf + pdf;
    let above = pdf - x * (1.0 - cdf);
    let value = (1.0 - tau) * below - tau * above;
    let slope = (1.0 - tau) * cdf + tau * (1.0 - cdf);
    (value, slope)
}

/// Expectile of the standard normal at level `tau`.
///
/// Newton steps safeguarded by a shrinking bracket; the defining equation is
/// strictly increasing in `x`, so the root is unique.
pub fn normal_expectile(tau: f64) -> Result<f64> {
    check_level(tau)?;
    if tau == 0.5 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
    while expectile_equation(lo, tau).0 > 0.0 {
        lo *= 2.0;
    }
    while expectile_equation(hi, tau).0 < 0.0 {
        hi *= 2.0;
    }
    let mut x = 0.0;
    for _ in 0..200 {
        let (f, df) = expectile_equation(x, tau);
        if f.abs() < 1e-14 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - f / df;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(x)
}

/// Asymmetric-least-squares expectile of a sample.
pub fn sample_expectile(values: &[f64], tau: f64) -> Result<f64> {
    check_level(tau)?;
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let n = values.len() as f64;
    let mut x = values.iter().sum::<f64>() / n;
    // Weights only change when x crosses a data point, so the iteration
    // terminates once the weighted mean reproduces itself.
    for _ in 0..1_000 {
        let (mut num, mut den) = (0.0, 0.0);
        for &v in values {
            let w = if v <= x { 1.0 - tau } else { tau };
            num += w * v;
            den += w;
        }
        let next = num / den;
        if next == x {
            break;
        }
        x = next;
    }
    let resid = sample_expectile_residual(values, x, tau);
    let scale = values.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if resid.abs() <= 1e-10 * scale {
        return Ok(x);
    }
    // Fall back to bisection on the monotone empirical identification mean.
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sample_expectile_residual(values, mid, tau) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn sample_expectile_residual(values: &[f64], x: f64, tau: f64) -> f64 {
    values
        .iter()
        .map(|&v| Family::Expectile.identification_unchecked(x, v, tau))
        .sum::<f64>()
        / values.len() as f64
}

/// Left-continuous inverse of the empirical CDF.
pub fn sample_quantile(values: &[f64], tau: f64) -> Result<f64> {
    check_level(tau)?;
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((tau * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[k.min(n) - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identification_examples() {
        assert_eq!(Family::Quantile.identification(1.0, 0.5, 0.5).unwrap(), 0.5);
        assert!((Family::Expectile.identification(0.0, 1.0, 0.3).unwrap() + 0.3).abs() < 1e-15);
        assert!(Family::Quantile.identification(0.0, 0.0, 1.0).is_err());
        assert!(Family::Expectile.identification(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn quantile_identification_takes_two_values() {
        for &(x, y) in &[(0.0, 1.0), (1.0, 0.0), (2.0, 2.0)] {
            let v = Family::Quantile.identification(x, y, 0.3).unwrap();
            assert!(v == -0.3 || v == 0.7);
        }
    }

    #[test]
    fn quantile_identification_integrates_to_zero_on_uniform() {
        // Riemann sum of V(0.3, y) over y ~ U(0, 1).
        let n = 100_000;
        let mean = (0..n)
            .map(|i| (i as f64 + 0.5) / n as f64)
            .map(|y| Family::Quantile.identification(0.3, y, 0.3).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 1e-4);
    }

    #[test]
    fn level_derivative_examples() {
        assert_eq!(
            Family::Quantile.identification_level_derivative(3.0, -1.0, 0.2).unwrap(),
            -1.0
        );
        assert_eq!(
            Family::Expectile.identification_level_derivative(2.0, 0.0, 0.4).unwrap(),
            -2.0
        );
        let h = 1e-6;
        let fd = (Family::Expectile.identification(0.0, 3.0, 0.4 + h).unwrap()
            - Family::Expectile.identification(0.0, 3.0, 0.4 - h).unwrap())
            / (2.0 * h);
        let d = Family::Expectile.identification_level_derivative(0.0, 3.0, 0.4).unwrap();
        assert!((d + 3.0).abs() < 1e-15);
        assert!((fd - d).abs() < 1e-8);
    }

    #[test]
    fn normal_quantile_examples() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.975).unwrap() - 1.959_964).abs() < 1e-5);
        assert_eq!(normal_quantile(0.25).unwrap(), -normal_quantile(0.75).unwrap());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn normal_expectile_examples() {
        assert_eq!(normal_expectile(0.5).unwrap(), 0.0);
        let e = normal_expectile(1.0 / 2.85).unwrap();
        assert!((-0.255..=-0.245).contains(&e), "{e}");
        assert!(expectile_equation(e, 1.0 / 2.85).0.abs() < 1e-12);
        for &tau in &[1e-6, 0.01, 0.2, 0.9, 0.999_999] {
            let x = normal_expectile(tau).unwrap();
            assert!(expectile_equation(x, tau).0.abs() < 1e-12, "tau = {tau}");
        }
    }

    #[test]
    fn sample_expectile_examples() {
        assert_eq!(sample_expectile(&[1.0, 1.0, 1.0], 0.2).unwrap(), 1.0);
        assert_eq!(sample_expectile(&[0.0, 1.0], 0.5).unwrap(), 0.5);
        // (1-τ)·x = τ·(1-x)  ⇒  x = τ on [0, 1]
        assert!((sample_expectile(&[0.0, 1.0], 0.75).unwrap() - 0.75).abs() < 1e-12);
        assert!(sample_expectile(&[], 0.5).is_err());
    }

    #[test]
    fn sample_quantile_examples() {
        assert_eq!(sample_quantile(&[1.0, 2.0, 3.0], 0.5).unwrap(), 2.0);
        assert_eq!(sample_quantile(&[4.0, 2.0, 3.0, 1.0], 0.25).unwrap(), 1.0);
        assert_eq!(sample_quantile(&[4.0, 2.0, 3.0, 1.0], 0.26).unwrap(), 2.0);
        assert!(sample_quantile(&[], 0.5).is_err());
    }
}
