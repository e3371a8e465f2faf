//! Data-generating processes, forecasters, and the Monte Carlo size/power
//! harness for rationality tests.
//!
//! Every replication draws from its own ChaCha8 stream seeded by
//! [`replication_seed`], so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{align, ForecastDataset, InstrumentRecipe};
use crate::error::{Error, Result};
use crate::functionals::{normal_expectile, Family};
use crate::gmm::{two_step_estimate, GmmOptions};
use crate::inference::{j_test, TestResult};
use crate::specmodels::SpecModel;

/// Default asymmetry of the quad-quad loss `L_a`.
pub const DEFAULT_ASYMMETRY: f64 = 1.85;
pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArGarchParams {
    pub ar: f64,
    pub omega: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl Default for ArGarchParams {
    fn default() -> Self {
        ArGarchParams {
            ar: 0.5,
            omega: 0.1,
            beta: 0.8,
            alpha: 0.1,
        }
    }
}

impl ArGarchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.omega > 0.0
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.alpha + self.beta < 1.0
            && self.ar.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "non-stationary AR-GARCH parameters {self:?} (need omega > 0, alpha + beta < 1)"
            )))
        }
    }

    /// `ω / (1 - α - β)`.
    pub fn stationary_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `rep` derived from `base`.
pub fn replication_seed(base: u64, rep: u64) -> u64 {
    mix64(mix64(base) ^ rep.wrapping_mul(0xd605_bbb5_8c8a_bbfd))
}

/// Pre-window values needed by forecasts at the first two periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Presample {
    /// `y_{-2}`, `y_{-1}`.
    pub y: [f64; 2],
    /// `σ²_{-1}`.
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub y: Vec<f64>,
    /// Conditional standard deviation.
    pub sigma: Vec<f64>,
    pub eps: Vec<f64>,
    pub seed: u64,
    pub params: ArGarchParams,
    pub presample: Presample,
}

impl SimPath {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn y_lag(&self, t: usize, lag: usize) -> f64 {
        if t >= lag {
            self.y[t - lag]
        } else {
            self.presample.y[2 + t - lag]
        }
    }

    fn sigma2_lag1(&self, t: usize) -> f64 {
        if t >= 1 {
            self.sigma[t - 1] * self.sigma[t - 1]
        } else {
            self.presample.sigma2
        }
    }

    /// First `n` periods.
    pub fn truncated(&self, n: usize) -> SimPath {
        let n = n.min(self.len());
        SimPath {
            y: self.y[..n].to_vec(),
            sigma: self.sigma[..n].to_vec(),
            eps: self.eps[..n].to_vec(),
            ..*self
        }
    }
}

/// `Y_t = ar·Y_{t-1} + σ_t ε_t`, `σ²_t = ω + β σ²_{t-1} + α σ²_{t-1} ε²_{t-1}`.
///
/// The recursion starts from `y = 0` and the stationary variance; the first
/// `burn_in` periods are discarded.
pub fn simulate_ar_garch(
    t: usize,
    params: &ArGarchParams,
    seed: u64,
    burn_in: usize,
) -> Result<SimPath> {
    params.validate()?;
    if t < 10 {
        return Err(Error::InvalidArgument(format!(
            "path length {t} is below the minimum of 10"
        )));
    }
    let total = burn_in + t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(total);
    let mut s2 = Vec::with_capacity(total);
    let mut eps = Vec::with_capacity(total);
    let stationary = params.stationary_variance();
    for i in 0..total {
        let e: f64 = rng.sample(StandardNormal);
        let var = if i == 0 {
            stationary
        } else {
            params.omega + params.beta * s2[i - 1] + params.alpha * s2[i - 1] * eps[i - 1] * eps[i - 1]
        };
        let prev = if i == 0 { 0.0 } else { y[i - 1] };
        y.push(params.ar * prev + var.sqrt() * e);
        s2.push(var);
        eps.push(e);
    }
    let at = |v: &Vec<f64>, back: usize, default: f64| {
        if burn_in >= back {
            v[burn_in - back]
        } else {
            default
        }
    };
    let presample = Presample {
        y: [at(&y, 2, 0.0), at(&y, 1, 0.0)],
        sigma2: at(&s2, 1, stationary),
    };
    Ok(SimPath {
        y: y.split_off(burn_in),
        sigma: s2.split_off(burn_in).into_iter().map(f64::sqrt).collect(),
        eps: eps.split_off(burn_in),
        seed,
        params: *params,
        presample,
    })
}

/// Level of the expectile that is optimal under `L_a`: `1 / (1 + a)`.
pub fn asymmetry_level(a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "asymmetry must be positive, got {a}"
        )));
    }
    Ok(1.0 / (1.0 + a))
}

/// Fully informed forecast `x_t = ar·y_{t-1} + σ_t·e_{1/(1+a)}(N(0,1))`.
pub fn full_info_forecast(path: &SimPath, a: f64) -> Result<Vec<f64>> {
    let shift = normal_expectile(asymmetry_level(a)?)?;
    Ok((0..path.len())
        .map(|t| path.params.ar * path.y_lag(t, 1) + path.sigma[t] * shift)
        .collect())
}

/// Two-step-ahead conditional variance
/// `ar²·σ²_{t-1} + ω + (α + β)·σ²_{t-1}` (1.15σ²_{t-1} + 0.1 for the
/// default parameters).
pub fn rigid_variance(path: &SimPath) -> Vec<f64> {
    let p = &path.params;
    (0..path.len())
        .map(|t| {
            let s2 = path.sigma2_lag1(t);
            p.ar * p.ar * s2 + (p.omega + (p.alpha + p.beta) * s2)
        })
        .collect()
}

/// Forecast of a forecaster who only observes `y_{t-2}, y_{t-3}, ...`:
/// `x_t = ar²·y_{t-2} + √v_t·e_{1/(1+a)}(N(0,1))` with `v_t` from
/// [`rigid_variance`], treating the two-step conditional as Gaussian.
pub fn rigid_info_forecast(path: &SimPath, a: f64) -> Result<Vec<f64>> {
    if path.len() < 3 {
        return Err(Error::InvalidArgument("path needs at least 3 periods".into()));
    }
    let shift = normal_expectile(asymmetry_level(a)?)?;
    let ar2 = path.params.ar * path.params.ar;
    Ok(rigid_variance(path)
        .into_iter()
        .enumerate()
        .map(|(t, v)| ar2 * path.y_lag(t, 2) + v.sqrt() * shift)
        .collect())
}

/// Rational forecast of the state-dependent functional
/// `α_{m(y_{t-1}, θ)}` of the one-step conditional `N(ar·y_{t-1}, σ_t²)`.
/// Returns the forecasts and the levels used.
pub fn state_dependent_forecast(
    path: &SimPath,
    family: Family,
    model: &SpecModel,
    theta: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    model.check_params(theta)?;
    let mut x = Vec::with_capacity(path.len());
    let mut levels = Vec::with_capacity(path.len());
    for t in 0..path.len() {
        let s = if model.uses_time() {
            (t + 1) as f64
        } else {
            path.y_lag(t, 1)
        };
        let m = model.level(s, theta)?;
        x.push(path.params.ar * path.y_lag(t, 1) + path.sigma[t] * family.normal_functional(m)?);
        levels.push(m);
    }
    Ok((x, levels))
}

/// Dataset `(t, y_t, x_t, z_t = y_{t-1})` with the conditional standard
/// deviation carried as column `sigma`.
pub fn path_dataset(path: &SimPath, x: &[f64]) -> Result<ForecastDataset> {
    if x.len() != path.len() {
        return Err(Error::Shape(format!(
            "{} forecasts for a path of length {}",
            x.len(),
            path.len()
        )));
    }
    let z = (0..path.len()).map(|t| path.y_lag(t, 1)).collect();
    ForecastDataset::from_series(path.y.clone(), x.to_vec(), z)?
        .with_column("sigma", path.sigma.clone())
}

/// Zero-mean continuous distributions for the asymmetric-information scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    Normal { sd: f64 },
    Logistic { scale: f64 },
}

impl Default for Noise {
    fn default() -> Self {
        Noise::Normal { sd: 1.0 }
    }
}

impl Noise {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Noise::Normal { sd } => sd * rng.sample::<f64, _>(StandardNormal),
            Noise::Logistic { scale } => {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                scale * (u / (1.0 - u)).ln()
            }
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        match *self {
            Noise::Normal { sd } => crate::special::norm_cdf(v / sd),
            Noise::Logistic { scale } => crate::specmodels::logistic(v / scale),
        }
    }

    fn validate(&self) -> Result<()> {
        let s = match *self {
            Noise::Normal { sd } => sd,
            Noise::Logistic { scale } => scale,
        };
        if s > 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid noise scale in {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymInfoScenario {
    /// `x = z_f`, `y = z_f + z_u + ε`, state `z = z_u`.
    pub dataset: ForecastDataset,
    /// `F(-z_u)`, the quantile level of `x` given the user's information.
    pub quoted_level: Vec<f64>,
}

/// Forecaster knows `z_f ~ N(0,1)`, the user knows `z_u ~ G`, and
/// `ε ~ F` is unknown to both. The mean forecast `x = z_f` is the
/// `F(-z_u)`-quantile given `(z_u, x)`.
pub fn asymmetric_info_scenario(
    t: usize,
    seed: u64,
    innovation: Noise,
    user_info: Noise,
) -> Result<AsymInfoScenario> {
    innovation.validate()?;
    user_info.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut y, mut x, mut z, mut level) = (
        Vec::with_capacity(t),
        Vec::with_capacity(t),
        Vec::with_capacity(t),
        Vec::with_capacity(t),
    );
    for _ in 0..t {
        let zf: f64 = rng.sample(StandardNormal);
        let zu = user_info.sample(&mut rng);
        let e = innovation.sample(&mut rng);
        y.push(zf + zu + e);
        x.push(zf);
        z.push(zu);
        level.push(innovation.cdf(-zu));
    }
    Ok(AsymInfoScenario {
        dataset: ForecastDataset::from_series(y, x, z)?,
        quoted_level: level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Forecaster {
    Full,
    Rigid,
}

impl std::str::FromStr for Forecaster {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Forecaster::Full),
            "rigid" => Ok(Forecaster::Rigid),
            _ => Err(Error::InvalidArgument(format!(
                "unknown forecaster `{s}` (expected full|rigid)"
            ))),
        }
    }
}

impl std::fmt::Display for Forecaster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Forecaster::Full => "full",
            Forecaster::Rigid => "rigid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrumentTiming {
    /// `w_{t-1}`: information available two periods before the target.
    Lagged,
    /// `w_t`: information available one period before the target.
    NonLagged,
}

impl std::str::FromStr for InstrumentTiming {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lagged" => Ok(InstrumentTiming::Lagged),
            "nonlagged" => Ok(InstrumentTiming::NonLagged),
            _ => Err(Error::InvalidArgument(format!(
                "unknown instrument timing `{s}` (expected lagged|nonlagged)"
            ))),
        }
    }
}

impl std::fmt::Display for InstrumentTiming {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InstrumentTiming::Lagged => "lagged",
            InstrumentTiming::NonLagged => "nonlagged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub t_grid: Vec<usize>,
    pub replications: usize,
    pub forecaster: Forecaster,
    pub families: Vec<Family>,
    pub timings: Vec<InstrumentTiming>,
    pub nominal: f64,
    pub base_seed: u64,
    pub asymmetry: f64,
    pub burn_in: usize,
    pub params: ArGarchParams,
    /// Level model fitted in every replication; its state is `y_{t-1}`.
    pub model: SpecModel,
    pub instruments: InstrumentRecipe,
    pub gmm: GmmOptions,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            t_grid: vec![50, 100, 250, 500, 1000, 2000],
            replications: 500,
            forecaster: Forecaster::Full,
            families: vec![Family::Quantile, Family::Expectile],
            timings: vec![InstrumentTiming::Lagged, InstrumentTiming::NonLagged],
            nominal: 0.05,
            base_seed: 20_240_601,
            asymmetry: DEFAULT_ASYMMETRY,
            burn_in: DEFAULT_BURN_IN,
            params: ArGarchParams::default(),
            model: SpecModel::LogisticLinear,
            instruments: InstrumentRecipe::simulation(),
            gmm: GmmOptions::default(),
            threads: None,
        }
    }
}

/// One J-test in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOutcome {
    pub replication: usize,
    pub t: usize,
    pub timing: InstrumentTiming,
    pub family: Family,
    pub result: std::result::Result<TestResult, String>,
}

/// Runs every (T, timing, family) cell of one replication.
pub fn mc_replicate(cfg: &McConfig, rep: usize) -> Vec<McOutcome> {
    let seed = replication_seed(cfg.base_seed, rep as u64);
    let t_max = cfg.t_grid.iter().copied().max().unwrap_or(0);
    let mut out = Vec::new();
    let path = simulate_ar_garch(t_max, &cfg.params, seed, cfg.burn_in);
    for &t in &cfg.t_grid {
        for &timing in &cfg.timings {
            for &family in &cfg.families {
                let result = path
                    .as_ref()
                    .map_err(|e| e.to_string())
                    .and_then(|p| run_cell(cfg, &p.truncated(t), timing, family).map_err(|e| e.to_string()));
                out.push(McOutcome {
                    replication: rep,
                    t,
                    timing,
                    family,
                    result,
                });
            }
        }
    }
    out
}

fn run_cell(
    cfg: &McConfig,
    path: &SimPath,
    timing: InstrumentTiming,
    family: Family,
) -> Result<TestResult> {
    let x = match cfg.forecaster {
        Forecaster::Full => full_info_forecast(path, cfg.asymmetry)?,
        Forecaster::Rigid => rigid_info_forecast(path, cfg.asymmetry)?,
    };
    let ds = path_dataset(path, &x)?;
    let recipe = match timing {
        InstrumentTiming::NonLagged => cfg.instruments.clone(),
        InstrumentTiming::Lagged => cfg.instruments.shifted(1),
    };
    let (aligned, w) = align(&ds, &recipe, family, 0.5)?;
    let fit = two_step_estimate(&aligned, &w, family, &cfg.model, &cfg.gmm)?;
    j_test(&fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    #[serde(rename = "T")]
    pub t: usize,
    pub setting: String,
    pub family: Family,
    pub rate: f64,
    pub reps: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub replications: usize,
    pub base_seed: u64,
    /// Per-replication seeds, in replication order.
    pub seeds: Vec<u64>,
    pub nominal: f64,
    pub warnings: Vec<String>,
    /// First error message per failing cell, for diagnosis.
    pub failure_examples: Vec<String>,
}

impl McReport {
    pub fn rate(&self, t: usize, setting: &str, family: Family) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.t == t && r.setting == setting && r.family == family)
            .map(|r| r.rate)
    }

    /// `T,setting,family,rate,reps,failures` with LF line endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("T,setting,family,rate,reps,failures\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.t,
                r.setting,
                r.family,
                crate::data::fmt17(r.rate),
                r.reps,
                r.failures
            ));
        }
        s
    }
}

/// Runs all replications (in parallel when the `parallel` feature is on).
pub fn mc_outcomes(cfg: &McConfig) -> Result<Vec<Vec<McOutcome>>> {
    if cfg.t_grid.is_empty() || cfg.families.is_empty() || cfg.timings.is_empty() {
        return Err(Error::InvalidArgument(
            "Monte Carlo grid, families and timings must be non-empty".into(),
        ));
    }
    if cfg.replications == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    cfg.params.validate()?;
    run_replications(cfg)
}

#[cfg(feature = "parallel")]
fn run_replications(cfg: &McConfig) -> Result<Vec<Vec<McOutcome>>> {
    use rayon::prelude::*;
    let work = || {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| mc_replicate(cfg, r))
            .collect()
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
            .map(|pool| pool.install(work)),
        None => Ok(work()),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_replications(cfg: &McConfig) -> Result<Vec<Vec<McOutcome>>> {
    Ok((0..cfg.replications).map(|r| mc_replicate(cfg, r)).collect())
}

/// Rejection rates of the J-test at `cfg.nominal` for every
/// (T, timing, family) cell. Failed fits are counted and excluded.
pub fn mc_size_power(cfg: &McConfig) -> Result<McReport> {
    let outcomes = mc_outcomes(cfg)?;
    Ok(summarize(cfg, &outcomes))
}

pub fn summarize(cfg: &McConfig, outcomes: &[Vec<McOutcome>]) -> McReport {
    let mut rows = Vec::new();
    let mut failure_examples = Vec::new();
    for &t in &cfg.t_grid {
        for &timing in &cfg.timings {
            for &family in &cfg.families {
                let cell = outcomes.iter().flatten().filter(|o| {
                    o.t == t && o.timing == timing && o.family == family
                });
                let (mut rejections, mut ok, mut failures) = (0usize, 0usize, 0usize);
                for o in cell {
                    match &o.result {
                        Ok(res) => {
                            ok += 1;
                            if res.rejects(cfg.nominal) {
                                rejections += 1;
                            }
                        }
                        Err(msg) => {
                            if failures == 0 {
                                failure_examples.push(format!(
                                    "T={t} {}/{timing} {family} rep {}: {msg}",
                                    cfg.forecaster, o.replication
                                ));
                            }
                            failures += 1;
                        }
                    }
                }
                rows.push(McRow {
                    t,
                    setting: format!("{}/{timing}", cfg.forecaster),
                    family,
                    rate: if ok > 0 {
                        rejections as f64 / ok as f64
                    } else {
                        f64::NAN
                    },
                    reps: outcomes.len(),
                    failures,
                });
            }
        }
    }
    let mut warnings = Vec::new();
    if outcomes.len() < 100 {
        warnings.push(format!(
            "only {} replications: rejection rates carry large binomial error",
            outcomes.len()
        ));
    }
    McReport {
        rows,
        replications: outcomes.len(),
        base_seed: cfg.base_seed,
        seeds: (0..outcomes.len())
            .map(|r| replication_seed(cfg.base_seed, r as u64))
            .collect(),
        nominal: cfg.nominal,
        warnings,
        failure_examples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_path() {
        let p = ArGarchParams::default();
        let a = simulate_ar_garch(200, &p, 7, 50).unwrap();
        let b = simulate_ar_garch(200, &p, 7, 50).unwrap();
        assert_eq!(a, b);
        let c = simulate_ar_garch(200, &p, 8, 50).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn recursion_holds() {
        let p = ArGarchParams::default();
        let path = simulate_ar_garch(500, &p, 3, 100).unwrap();
        for t in 1..path.len() {
            let s2 = path.sigma[t - 1].powi(2);
            let expect = p.omega + p.beta * s2 + p.alpha * s2 * path.eps[t - 1].powi(2);
            assert!((path.sigma[t].powi(2) - expect).abs() < 1e-12);
            let y = p.ar * path.y[t - 1] + path.sigma[t] * path.eps[t];
            assert_eq!(path.y[t], y);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad = ArGarchParams {
            alpha: 0.5,
            beta: 0.6,
            ..Default::default()
        };
        assert!(simulate_ar_garch(100, &bad, 1, 0).is_err());
        assert!(simulate_ar_garch(5, &ArGarchParams::default(), 1, 0).is_err());
    }

    #[test]
    fn symmetric_loss_gives_mean_forecasts() {
        let path = simulate_ar_garch(50, &ArGarchParams::default(), 11, 10).unwrap();
        let full = full_info_forecast(&path, 1.0).unwrap();
        let rigid = rigid_info_forecast(&path, 1.0).unwrap();
        for t in 2..path.len() {
            assert_eq!(full[t], 0.5 * path.y[t - 1]);
            assert_eq!(rigid[t], 0.25 * path.y[t - 2]);
        }
    }

    #[test]
    fn rigid_variance_chain() {
        let path = simulate_ar_garch(100, &ArGarchParams::default(), 5, 20).unwrap();
        let v = rigid_variance(&path);
        for t in 1..path.len() {
            let s2 = path.sigma[t - 1].powi(2);
            let stepwise = 0.25 * s2 + (0.1 + 0.9 * s2);
            assert!((v[t] - stepwise).abs() <= 1e-15 * stepwise);
            assert!((v[t] - (1.15 * s2 + 0.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_forecast_shift() {
        let path = simulate_ar_garch(30, &ArGarchParams::default(), 2, 10).unwrap();
        let x = full_info_forecast(&path, DEFAULT_ASYMMETRY).unwrap();
        for t in 1..path.len() {
            let shift = (x[t] - 0.5 * path.y[t - 1]) / path.sigma[t];
            assert!((shift + 0.25).abs() < 0.005);
        }
    }

    #[test]
    fn asym_info_zero_user_noise() {
        let sc = asymmetric_info_scenario(
            100,
            1,
            Noise::Normal { sd: 1.0 },
            Noise::Normal { sd: 1e-300 },
        )
        .unwrap();
        assert!(sc.quoted_level.iter().all(|&l| (l - 0.5).abs() < 1e-12));
    }

    #[test]
    fn seeds_differ_per_replication() {
        let s: Vec<u64> = (0..100).map(|r| replication_seed(42, r)).collect();
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 100);
    }
}
