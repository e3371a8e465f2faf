//! Predictive densities from point forecasts with estimated functionals,
//! and scoring rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{check_level, normal_quantile, Family};
use crate::special::{norm_cdf, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityForecast {
    pub t: i64,
    pub mu: f64,
    pub sigma: f64,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "scale must be positive and finite, got {sigma}"
        )))
    }
}

/// Gaussian whose `m`-quantile equals `x`: `μ = x - q_m(N(0,1))·σ`.
pub fn gaussian_closed_form(x: f64, level: f64, sigma: f64) -> Result<DensityForecast> {
    check_sigma(sigma)?;
    let q = normal_quantile(level)?;
    Ok(DensityForecast {
        t: 0,
        mu: x - q * sigma,
        sigma,
    })
}

/// Monotone weight applied to each forecaster's J-test p-value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFn {
    /// `w(p) = p`.
    #[default]
    Identity,
    /// `w(p) = p^k`, `k > 0`.
    Power { exponent: f64 },
    /// `w(p) = 1`.
    Uniform,
}

impl WeightFn {
    pub fn weight(self, p: f64) -> f64 {
        match self {
            WeightFn::Identity => p,
            WeightFn::Power { exponent } => p.powf(exponent),
            WeightFn::Uniform => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Absolute,
    #[default]
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationProblem {
    pub forecasts: Vec<f64>,
    pub levels: Vec<f64>,
    pub p_values: Vec<f64>,
    pub families: Vec<Family>,
    #[serde(default)]
    pub weight_fn: WeightFn,
    #[serde(default)]
    pub distance: Distance,
}

impl CombinationProblem {
    /// Quantile forecasters with unit p-values.
    pub fn quantiles(forecasts: Vec<f64>, levels: Vec<f64>) -> Self {
        let n = forecasts.len();
        CombinationProblem {
            forecasts,
            levels,
            p_values: vec![1.0; n],
            families: vec![Family::Quantile; n],
            weight_fn: WeightFn::Identity,
            distance: Distance::Squared,
        }
    }
}

/// Location of the Gaussian with scale `sigma` that best matches the
/// forecasts' functionals:
/// `argmin_μ Σ w(p_i)·d(α_{m_i}(N(μ, σ²)) - x_i)`.
///
/// Each forecast implies a location `a_i = x_i - α_{m_i}(N(0,1))·σ`; the
/// squared distance gives their weighted mean and the absolute distance a
/// weighted median.
pub fn solve_combination(prob: &CombinationProblem, sigma: f64, t: i64) -> Result<DensityForecast> {
    check_sigma(sigma)?;
    let n = prob.forecasts.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no forecasts to combine".into()));
    }
    if prob.levels.len() != n || prob.p_values.len() != n || prob.families.len() != n {
        return Err(Error::Shape(format!(
            "{n} forecasts with {} levels, {} p-values, {} families",
            prob.levels.len(),
            prob.p_values.len(),
            prob.families.len()
        )));
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let p = prob.p_values[i];
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
        }
        check_level(prob.levels[i])?;
        let w = prob.weight_fn.weight(p);
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid weight {w} for p = {p}")));
        }
        let shift = prob.families[i].normal_functional(prob.levels[i])?;
        points.push((prob.forecasts[i] - shift * sigma, w));
    }
    let total: f64 = points.iter().map(|p| p.1).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("all combination weights are zero".into()));
    }
    let mu = match prob.distance {
        Distance::Squared => points.iter().map(|(a, w)| a * w).sum::<f64>() / total,
        Distance::Absolute => weighted_median(&mut points, total),
    };
    Ok(DensityForecast { t, mu, sigma })
}

// Midpoint of the minimizing interval when the half-weight lands on a boundary.
fn weighted_median(points: &mut [(f64, f64)], total: f64) -> f64 {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = total / 2.0;
    let mut acc = 0.0;
    for (i, &(a, w)) in points.iter().enumerate() {
        acc += w;
        if acc > half {
            return a;
        }
        if acc == half {
            let next = points[i + 1..]
                .iter()
                .find(|p| p.1 > 0.0)
                .map(|p| p.0)
                .unwrap_or(a);
            return 0.5 * (a + next);
        }
    }
    points.last().map(|p| p.0).unwrap_or(0.0)
}

/// Closed-form CRPS of `N(μ, σ²)` at `y`.
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let u = (y - mu) / sigma;
    let v = sigma
        * (u * (2.0 * norm_cdf(u) - 1.0) + 2.0 * norm_pdf(u) - 1.0 / std::f64::consts::PI.sqrt());
    Ok(v.max(0.0))
}

/// Scale recipe for the Gaussian combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SigmaRecipe {
    /// `σ_t = |y_{t-1} - y_{t-2}|`, floored at `1e-6·sd(y)`.
    Diff2,
    Column(String),
}

impl std::str::FromStr for SigmaRecipe {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "diff2" {
            return Ok(SigmaRecipe::Diff2);
        }
        match s.strip_prefix("column:") {
            Some(c) if !c.is_empty() => Ok(SigmaRecipe::Column(c.to_string())),
            _ => Err(Error::InvalidArgument(format!(
                "unknown sigma recipe `{s}` (expected diff2|column:<name>)"
            ))),
        }
    }
}

impl TryFrom<String> for SigmaRecipe {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SigmaRecipe> for String {
    fn from(s: SigmaRecipe) -> String {
        match s {
            SigmaRecipe::Diff2 => "diff2".into(),
            SigmaRecipe::Column(c) => format!("column:{c}"),
        }
    }
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

/// `|y_{t-1} - y_{t-2}|` for `t ≥ 2` (the first two entries are `None`),
/// floored at `1e-6` times the sample standard deviation of `y`.
pub fn diff2_sigma(y: &[f64]) -> Vec<Option<f64>> {
    let floor = 1e-6 * sample_sd(y);
    (0..y.len())
        .map(|t| {
            if t < 2 {
                None
            } else {
                Some((y[t - 1] - y[t - 2]).abs().max(floor))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub mse: f64,
    /// Mean state-dependent lin-lin loss, see [`lin_lin`].
    pub mfll: f64,
}

pub fn score_forecasts(x: &[f64], y: &[f64], levels: &[f64]) -> Result<Scores> {
    let n = x.len();
    if y.len() != n || levels.len() != n {
        return Err(Error::Shape(format!(
            "{n} forecasts, {} realizations, {} levels",
            y.len(),
            levels.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("nothing to score".into()));
    }
    for &m in levels {
        check_level(m)?;
    }
    let (mut mse, mut mfll) = (0.0, 0.0);
    for i in 0..n {
        let e = x[i] - y[i];
        mse += e * e;
        mfll += lin_lin(e, levels[i]);
    }
    Ok(Scores {
        mse: mse / n as f64,
        mfll: mfll / n as f64,
    })
}

/// Check loss `(1{e ≥ 0} - m)·e` for the error `e = x - y`, consistent for
/// the `m`-quantile. Written in the realization-minus-forecast error
/// `u = -e` this is the familiar `(m - 1{u < 0})·u`.
#[inline]
pub fn lin_lin(e: f64, level: f64) -> f64 {
    let ind = if e >= 0.0 { 1.0 } else { 0.0 };
    (ind - level) * e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub name: String,
    pub mse: f64,
    pub mfll: f64,
    /// Divided by the column maximum.
    pub mse_rel: f64,
    pub mfll_rel: f64,
}

/// Scores several forecast series against the same realizations and levels,
/// normalizing each column so that its largest entry is 1.
pub fn score_table(series: &[(&str, &[f64])], y: &[f64], levels: &[f64]) -> Result<Vec<ScoreRow>> {
    let scores = series
        .iter()
        .map(|(_, x)| score_forecasts(x, y, levels))
        .collect::<Result<Vec<_>>>()?;
    let max_mse = scores.iter().map(|s| s.mse).fold(0.0, f64::max);
    let max_mfll = scores.iter().map(|s| s.mfll).fold(0.0, f64::max);
    let rel = |v: f64, max: f64| if max > 0.0 { v / max } else { 0.0 };
    Ok(series
        .iter()
        .zip(scores)
        .map(|((name, _), s)| ScoreRow {
            name: name.to_string(),
            mse: s.mse,
            mfll: s.mfll,
            mse_rel: rel(s.mse, max_mse),
            mfll_rel: rel(s.mfll, max_mfll),
        })
        .collect())
}
