//! Moment conditions, HAC covariance, two-step GMM, and the asymptotic
//! covariance of the estimator.
//!
//! The moment function is `g_t(θ) = V(x_t, y_t; m(s_t, θ))·w_t`, where `s_t`
//! is the state column or, for time-driven models, the time index.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{ForecastDataset, InstrumentMatrix};
use crate::error::{Error, Result};
use crate::functionals::Family;
use crate::optim::{nelder_mead_restarted, Minimum, SimplexConfig};
use crate::specmodels::{identifiability_warning, SpecModel};

/// Relative eigenvalue floor applied to HAC matrices.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Largest condition number accepted when inverting `S`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    /// `T × q`, row `t` is `g_t`.
    pub g: DMatrix<f64>,
    /// Column means `g_T`.
    pub mean: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Bartlett,
    Parzen,
    QuadraticSpectral,
}

impl Kernel {
    pub fn weight(self, u: f64) -> f64 {
        match self {
            Kernel::Bartlett => (1.0 - u).max(0.0),
            Kernel::Parzen => {
                if u <= 0.5 {
                    1.0 - 6.0 * u * u + 6.0 * u * u * u
                } else if u <= 1.0 {
                    2.0 * (1.0 - u).powi(3)
                } else {
                    0.0
                }
            }
            Kernel::QuadraticSpectral => {
                if u == 0.0 {
                    return 1.0;
                }
                let a = 6.0 * std::f64::consts::PI * u / 5.0;
                // sin(a)/a - cos(a) cancels badly near zero
                let core = if a < 1e-2 {
                    let a2 = a * a;
                    a2 / 3.0 - a2 * a2 / 30.0 + a2 * a2 * a2 / 840.0
                } else {
                    a.sin() / a - a.cos()
                };
                25.0 / (12.0 * std::f64::consts::PI.powi(2) * u * u) * core
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "BandwidthRepr", into = "BandwidthRepr")]
pub enum Bandwidth {
    /// `floor(4·(T/100)^(2/9))`.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthRepr {
    Fixed(usize),
    Text(String),
}

impl TryFrom<BandwidthRepr> for Bandwidth {
    type Error = Error;
    fn try_from(r: BandwidthRepr) -> Result<Self> {
        match r {
            BandwidthRepr::Fixed(h) => Ok(Bandwidth::Fixed(h)),
            BandwidthRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Bandwidth> for BandwidthRepr {
    fn from(b: Bandwidth) -> Self {
        match b {
            Bandwidth::Auto => BandwidthRepr::Text("auto".into()),
            Bandwidth::Fixed(h) => BandwidthRepr::Fixed(h),
        }
    }
}

impl std::str::FromStr for Bandwidth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        s.parse::<usize>().map(Bandwidth::Fixed).map_err(|_| {
            Error::InvalidArgument(format!("bandwidth `{s}` is neither `auto` nor an integer"))
        })
    }
}

impl Bandwidth {
    pub fn resolve(self, t: usize) -> usize {
        match self {
            Bandwidth::Auto => auto_bandwidth(t),
            Bandwidth::Fixed(h) => h,
        }
    }
}

/// Newey–West rule of thumb `floor(4·(T/100)^(2/9))`.
pub fn auto_bandwidth(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HacConfig {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmOptions {
    pub hac: HacConfig,
    pub simplex: SimplexConfig,
    /// Per-coordinate start values; the start lattice is their product
    /// (seasonal periods use a log-spaced grid instead).
    pub lattice: Vec<f64>,
    /// Number of best lattice points refined by the simplex method.
    pub starts: usize,
    /// Parameter box; `None` uses the model's default box.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            hac: HacConfig::default(),
            simplex: SimplexConfig::default(),
            lattice: vec![-3.0, 0.0, 3.0],
            starts: 2,
            bounds: None,
        }
    }
}

fn model_states(ds: &ForecastDataset, model: &SpecModel) -> Vec<f64> {
    if model.uses_time() {
        ds.t.iter().map(|&t| t as f64).collect()
    } else {
        ds.z.clone()
    }
}

fn check_shapes(ds: &ForecastDataset, w: &InstrumentMatrix) -> Result<()> {
    if ds.len() != w.rows() {
        return Err(Error::Shape(format!(
            "dataset has {} rows but instruments have {}",
            ds.len(),
            w.rows()
        )));
    }
    Ok(())
}

pub fn moment_series(
    ds: &ForecastDataset,
    w: &InstrumentMatrix,
    family: Family,
    model: &SpecModel,
    theta: &[f64],
) -> Result<MomentSeries> {
    check_shapes(ds, w)?;
    model.check_params(theta)?;
    let states = model_states(ds, model);
    let (n, q) = (ds.len(), w.q());
    let mut g = DMatrix::zeros(n, q);
    for t in 0..n {
        let tau = model.level_unchecked(states[t], theta);
        let v = family.identification_unchecked(ds.x[t], ds.y[t], tau);
        for j in 0..q {
            g[(t, j)] = v * w.w[(t, j)];
        }
    }
    let mean = column_means(&g);
    Ok(MomentSeries { g, mean })
}

// plain time-ordered sums, so results do not depend on SIMD reduction order
fn column_means(g: &DMatrix<f64>) -> DVector<f64> {
    let n = g.nrows() as f64;
    DVector::from_iterator(
        g.ncols(),
        g.column_iter().map(|c| c.iter().fold(0.0, |acc, v| acc + v) / n),
    )
}

/// `G_T = (1/T) Σ_t ∂V/∂τ · w_t ∇m(s_t, θ)'` (q × p).
pub fn moment_jacobian(
    ds: &ForecastDataset,
    w: &InstrumentMatrix,
    family: Family,
    model: &SpecModel,
    theta: &[f64],
) -> Result<DMatrix<f64>> {
    check_shapes(ds, w)?;
    model.check_params(theta)?;
    let states = model_states(ds, model);
    let (n, q, p) = (ds.len(), w.q(), model.n_params());
    let mut jac = DMatrix::zeros(q, p);
    for t in 0..n {
        let dv = -family.level_slope(ds.x[t], ds.y[t]);
        let grad = model.level_gradient_unchecked(states[t], theta);
        for j in 0..q {
            let wj = dv * w.w[(t, j)];
            for (k, gk) in grad.iter().enumerate() {
                jac[(j, k)] += wj * gk;
            }
        }
    }
    Ok(jac / n as f64)
}

/// HAC estimate of the long-run covariance of the moments.
///
/// Autocovariances are taken about the sample mean; Bartlett and Parzen use
/// weights `k(j/(h+1))` for `j ≤ h`, the quadratic-spectral kernel uses
/// `k(j/h)` over all lags. The result is symmetrized and its eigenvalues
/// floored at `1e-12·trace`.
pub fn hac_covariance(ms: &MomentSeries, cfg: &HacConfig) -> Result<DMatrix<f64>> {
    let n = ms.g.nrows();
    let h = cfg.bandwidth.resolve(n);
    if h >= n {
        return Err(Error::Bandwidth { bandwidth: h, t: n });
    }
    let q = ms.g.ncols();
    let mut centered = ms.g.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-ms.mean[j]);
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|t| centered.row(t).iter().copied().collect())
        .collect();
    let autocov = |lag: usize| {
        let mut gamma = DMatrix::zeros(q, q);
        for t in lag..n {
            let (a, b) = (&rows[t], &rows[t - lag]);
            for i in 0..q {
                for j in 0..q {
                    gamma[(i, j)] += a[i] * b[j];
                }
            }
        }
        gamma / n as f64
    };

    let mut s = autocov(0);
    let max_lag = match cfg.kernel {
        Kernel::QuadraticSpectral if h > 0 => n - 1,
        _ => h,
    };
    for lag in 1..=max_lag {
        let u = match cfg.kernel {
            Kernel::QuadraticSpectral => lag as f64 / h as f64,
            _ => lag as f64 / (h + 1) as f64,
        };
        let k = cfg.kernel.weight(u);
        if k == 0.0 {
            continue;
        }
        let gamma = autocov(lag);
        s += (&gamma + gamma.transpose()) * k;
    }
    let s = (&s + s.transpose()) * 0.5;
    Ok(floor_eigenvalues(s))
}

fn floor_eigenvalues(s: DMatrix<f64>) -> DMatrix<f64> {
    let floor = EIGEN_FLOOR * s.trace().max(0.0);
    let eig = SymmetricEigen::new(s.clone());
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return s;
    }
    let lambda = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&lambda) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Inverse of a symmetric positive semidefinite matrix through its
/// eigendecomposition, with its condition number.
pub fn inverse_psd(s: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let eig = SymmetricEigen::new(s.clone());
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(max > 0.0) || condition > MAX_CONDITION {
        return Err(Error::SingularCovariance { condition });
    }
    let inv_l = eig.eigenvalues.map(|l| 1.0 / l);
    let v = &eig.eigenvectors;
    let inv = v * DMatrix::from_diagonal(&inv_l) * v.transpose();
    Ok(((&inv + inv.transpose()) * 0.5, condition))
}

/// `(G' S⁻¹ G)⁻¹`, the asymptotic covariance of `√T(θ̂ - θ₀)`.
pub fn sandwich(s: &DMatrix<f64>, jac: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (s_inv, _) = inverse_psd(s)?;
    information_inverse(&s_inv, jac).map(|(sigma, _)| sigma)
}

fn information_inverse(s_inv: &DMatrix<f64>, jac: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let info = jac.transpose() * s_inv * jac;
    let info = (&info + info.transpose()) * 0.5;
    let eig = SymmetricEigen::new(info.clone());
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let chol = info
        .cholesky()
        .ok_or(Error::Singular("information matrix G'S⁻¹G"))?;
    let inv = chol.inverse();
    Ok(((&inv + inv.transpose()) * 0.5, max / min))
}

/// Column indices of `G` involved in its (numerical) null space.
fn rank_deficiency(jac: &DMatrix<f64>) -> Option<Vec<usize>> {
    let svd = jac.clone().svd(false, true);
    let sv = &svd.singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let p = jac.ncols();
    if max == 0.0 {
        return Some((0..p).collect());
    }
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut params = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if s <= 1e-10 * max {
            for k in 0..p {
                if v_t[(i, k)].abs() > 0.1 && !params.contains(&k) {
                    params.push(k);
                }
            }
        }
    }
    if sv.len() < p {
        // more parameters than moments
        return Some((0..p).collect());
    }
    if params.is_empty() {
        None
    } else {
        params.sort_unstable();
        Some(params)
    }
}

/// Moment mean as an affine function of the per-row levels:
/// `g_T(θ) = ā - (1/T) Σ_t m(s_t, θ)·B_t·w_t`.
struct Objective<'a> {
    model: &'a SpecModel,
    states: Vec<f64>,
    a_bar: Vec<f64>,
    /// Row-major `T × q` matrix of `B_t·w_t`.
    bw: Vec<f64>,
    q: usize,
    bounds: Vec<(f64, f64)>,
}

impl<'a> Objective<'a> {
    fn new(
        ds: &ForecastDataset,
        w: &InstrumentMatrix,
        family: Family,
        model: &'a SpecModel,
        bounds: Vec<(f64, f64)>,
    ) -> Self {
        let (n, q) = (ds.len(), w.q());
        let mut a_bar = vec![0.0; q];
        let mut bw = vec![0.0; n * q];
        for t in 0..n {
            let a = family.intercept(ds.x[t], ds.y[t]);
            let b = family.level_slope(ds.x[t], ds.y[t]);
            for j in 0..q {
                let wj = w.w[(t, j)];
                a_bar[j] += a * wj;
                bw[t * q + j] = b * wj;
            }
        }
        a_bar.iter_mut().for_each(|v| *v /= n as f64);
        Objective {
            model,
            states: model_states(ds, model),
            a_bar,
            bw,
            q,
            bounds,
        }
    }

    fn in_bounds(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(&self.bounds)
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    fn mean(&self, theta: &[f64]) -> Vec<f64> {
        let q = self.q;
        let mut acc = vec![0.0; q];
        for (t, &s) in self.states.iter().enumerate() {
            let m = self.model.level_unchecked(s, theta);
            let row = &self.bw[t * q..(t + 1) * q];
            for (a, b) in acc.iter_mut().zip(row) {
                *a += m * b;
            }
        }
        let n = self.states.len() as f64;
        self.a_bar
            .iter()
            .zip(&acc)
            .map(|(a, s)| a - s / n)
            .collect()
    }

    /// `g' W g`; `None` weight means the identity.
    fn value(&self, theta: &[f64], weight: Option<&DMatrix<f64>>) -> f64 {
        if !self.in_bounds(theta) {
            return f64::INFINITY;
        }
        let g = self.mean(theta);
        match weight {
            None => g.iter().map(|v| v * v).sum(),
            Some(wm) => {
                let mut total = 0.0;
                for i in 0..self.q {
                    let mut row = 0.0;
                    for j in 0..self.q {
                        row += wm[(i, j)] * g[j];
                    }
                    total += g[i] * row;
                }
                total
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartTrace {
    pub start: Vec<f64>,
    pub theta: Vec<f64>,
    pub objective: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub starts: Vec<StartTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub step1: StepTrace,
    pub step2: StepTrace,
    /// Step-2 objective evaluated at the step-1 solution.
    pub step2_at_step1: f64,
    pub bandwidth: usize,
    pub condition_s: f64,
    pub condition_information: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub family: Family,
    pub model: SpecModel,
    pub theta: Vec<f64>,
    /// HAC matrix at the final estimate (q × q).
    pub s: DMatrix<f64>,
    /// Moment Jacobian at the final estimate (q × p).
    pub jacobian: DMatrix<f64>,
    /// `(G'S⁻¹G)⁻¹` (p × p), without the `1/T` factor.
    pub sigma: DMatrix<f64>,
    /// `g_T` at the final estimate.
    pub moment_mean: DVector<f64>,
    /// Minimized step-2 objective.
    pub objective: f64,
    pub t_eff: usize,
    pub instrument_labels: Vec<String>,
    pub diagnostics: Diagnostics,
}

impl GmmFit {
    pub fn q(&self) -> usize {
        self.s.nrows()
    }

    pub fn p(&self) -> usize {
        self.theta.len()
    }

    /// `Σ / T_eff`.
    pub fn covariance(&self) -> DMatrix<f64> {
        asymptotic_covariance(self)
    }

    pub fn report(&self) -> FitReport {
        FitReport {
            family: self.family,
            model: self.model,
            param_labels: self.model.param_labels(),
            theta: self.theta.clone(),
            covariance: rows_of(&self.covariance()),
            std_errors: (0..self.p())
                .map(|i| self.covariance()[(i, i)].sqrt())
                .collect(),
            instrument_labels: self.instrument_labels.clone(),
            q: self.q(),
            p: self.p(),
            t_eff: self.t_eff,
            objective: self.objective,
            s: rows_of(&self.s),
            jacobian: rows_of(&self.jacobian),
            moment_mean: self.moment_mean.iter().copied().collect(),
            diagnostics: self.diagnostics.clone(),
        }
    }
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serializable summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub family: Family,
    pub model: SpecModel,
    pub param_labels: Vec<String>,
    pub theta: Vec<f64>,
    /// `Σ / T_eff`.
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub instrument_labels: Vec<String>,
    pub q: usize,
    pub p: usize,
    #[serde(rename = "T_eff")]
    pub t_eff: usize,
    pub objective: f64,
    pub s: Vec<Vec<f64>>,
    pub jacobian: Vec<Vec<f64>>,
    pub moment_mean: Vec<f64>,
    pub diagnostics: Diagnostics,
}

fn start_lattice(model: &SpecModel, opts: &GmmOptions, bounds: &[(f64, f64)], t_eff: usize) -> Vec<Vec<f64>> {
    let p = model.n_params();
    let axes: Vec<Vec<f64>> = (0..p)
        .map(|k| {
            if matches!(model, SpecModel::Seasonal { .. }) && k == 2 {
                let hi = (t_eff as f64 / 2.0).max(2.0);
                let n = 8;
                (0..n)
                    .map(|i| 2.0 * (hi / 2.0).powf(i as f64 / (n - 1) as f64))
                    .collect()
            } else {
                let (lo, hi) = bounds[k];
                opts.lattice.iter().map(|v| v.clamp(lo, hi)).collect()
            }
        })
        .collect();
    let mut points = vec![Vec::with_capacity(p)];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|pt| {
                axis.iter().map(move |&v| {
                    let mut next = pt.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    points
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Ordering used to break ties: objective, then smallest norm, then lexicographic.
fn candidate_order(a: (&[f64], f64), b: (&[f64], f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1)
        .then_with(|| norm(a.0).total_cmp(&norm(b.0)))
        .then_with(|| {
            a.0.iter()
                .zip(b.0)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

fn minimize(
    obj: &Objective<'_>,
    weight: Option<&DMatrix<f64>>,
    lattice: &[Vec<f64>],
    starts: usize,
    extra_start: Option<&[f64]>,
    cfg: &SimplexConfig,
) -> Result<StepTrace> {
    let mut scored: Vec<(Vec<f64>, f64)> = lattice
        .iter()
        .map(|pt| (pt.clone(), obj.value(pt, weight)))
        .collect();
    scored.sort_by(|a, b| candidate_order((&a.0, a.1), (&b.0, b.1)));
    let mut chosen: Vec<Vec<f64>> = scored
        .into_iter()
        .take(starts.max(1))
        .map(|(pt, _)| pt)
        .collect();
    if let Some(s) = extra_start {
        chosen.push(s.to_vec());
    }

    let runs: Vec<(Vec<f64>, Minimum)> = chosen
        .into_iter()
        .map(|start| {
            let m = nelder_mead_restarted(|th: &[f64]| obj.value(th, weight), &start, cfg);
            (start, m)
        })
        .collect();
    let best = runs
        .iter()
        .min_by(|a, b| candidate_order((&a.1.x, a.1.f), (&b.1.x, b.1.f)))
        .expect("at least one start");
    if !best.1.converged || !best.1.f.is_finite() {
        return Err(Error::NoConvergence {
            evaluations: best.1.evals,
            diameter: best.1.diameter,
        });
    }
    Ok(StepTrace {
        theta: best.1.x.clone(),
        objective: best.1.f,
        starts: runs
            .iter()
            .map(|(start, m)| StartTrace {
                start: start.clone(),
                theta: m.x.clone(),
                objective: m.f,
                evals: m.evals,
                converged: m.converged,
            })
            .collect(),
    })
}

/// Two-step GMM: identity-weighted fit, HAC at the first-step estimate,
/// then the `S⁻¹`-weighted fit. `S`, `G` and `Σ` are evaluated at the
/// second-step estimate.
pub fn two_step_estimate(
    ds: &ForecastDataset,
    w: &InstrumentMatrix,
    family: Family,
    model: &SpecModel,
    opts: &GmmOptions,
) -> Result<GmmFit> {
    check_shapes(ds, w)?;
    let (q, p, t_eff) = (w.q(), model.n_params(), ds.len());
    if q < p {
        return Err(Error::InvalidArgument(format!(
            "{q} instruments cannot identify {p} parameters"
        )));
    }
    let bandwidth = opts.hac.bandwidth.resolve(t_eff);
    if bandwidth >= t_eff {
        return Err(Error::Bandwidth {
            bandwidth,
            t: t_eff,
        });
    }
    let bounds = match &opts.bounds {
        Some(b) if b.len() == p => b.clone(),
        Some(b) => {
            return Err(Error::ParamLength {
                expected: p,
                found: b.len(),
            })
        }
        None => model.default_bounds(t_eff),
    };
    let mut warnings = Vec::new();
    if t_eff < 10 * p {
        warnings.push(format!(
            "effective sample size {t_eff} is below 10·p = {}",
            10 * p
        ));
    }
    warnings.extend(identifiability_warning(model, &ds.z));

    let obj = Objective::new(ds, w, family, model, bounds.clone());
    let lattice = start_lattice(model, opts, &bounds, t_eff);

    let step1 = minimize(&obj, None, &lattice, opts.starts, None, &opts.simplex)?;
    let hac = HacConfig {
        kernel: opts.hac.kernel,
        bandwidth: Bandwidth::Fixed(bandwidth),
    };
    let s1 = hac_covariance(&moment_series(ds, w, family, model, &step1.theta)?, &hac)?;
    let (weight, _) = inverse_psd(&s1)?;
    let step2 = minimize(
        &obj,
        Some(&weight),
        &lattice,
        opts.starts,
        Some(&step1.theta),
        &opts.simplex,
    )?;
    let step2_at_step1 = obj.value(&step1.theta, Some(&weight));

    let theta = step2.theta.clone();
    let ms = moment_series(ds, w, family, model, &theta)?;
    let s = hac_covariance(&ms, &hac)?;
    let (s_inv, condition_s) = inverse_psd(&s)?;
    let jacobian = moment_jacobian(ds, w, family, model, &theta)?;
    if let Some(params) = rank_deficiency(&jacobian) {
        return Err(Error::Unidentified { params });
    }
    let (sigma, condition_information) = information_inverse(&s_inv, &jacobian)?;

    Ok(GmmFit {
        family,
        model: *model,
        theta,
        s,
        jacobian,
        sigma,
        moment_mean: ms.mean,
        objective: step2.objective,
        t_eff,
        instrument_labels: w.labels.clone(),
        diagnostics: Diagnostics {
            step1,
            step2,
            step2_at_step1,
            bandwidth,
            condition_s,
            condition_information,
            warnings,
        },
    })
}

/// `(G'S⁻¹G)⁻¹ / T_eff`, the finite-sample covariance of `θ̂`.
pub fn asymptotic_covariance(fit: &GmmFit) -> DMatrix<f64> {
    &fit.sigma / fit.t_eff as f64
}

/// `(G'S⁻¹G)⁻¹ / T` from raw ingredients.
pub fn covariance_from_parts(
    s: &DMatrix<f64>,
    jac: &DMatrix<f64>,
    t_eff: usize,
) -> Result<DMatrix<f64>> {
    if rank_deficiency(jac).is_some() {
        return Err(Error::Unidentified {
            params: rank_deficiency(jac).unwrap_or_default(),
        });
    }
    Ok(sandwich(s, jac)? / t_eff as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specmodels::Link;

    const CONST: SpecModel = SpecModel::Constant {
        link: Link::Logistic,
    };

    fn ones(n: usize) -> InstrumentMatrix {
        InstrumentMatrix::from_matrix(DMatrix::from_element(n, 1, 1.0), vec!["const".into()])
            .unwrap()
    }

    fn two_point() -> ForecastDataset {
        ForecastDataset::from_series(vec![0.0, 2.0], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn moment_series_examples() {
        let ds = two_point();
        for family in [Family::Quantile, Family::Expectile] {
            let ms = moment_series(&ds, &ones(2), family, &CONST, &[0.0]).unwrap();
            assert_eq!(ms.g[(0, 0)], 0.5);
            assert_eq!(ms.g[(1, 0)], -0.5);
            assert_eq!(ms.mean[0], 0.0);
        }
    }

    #[test]
    fn jacobian_examples() {
        let ds = two_point();
        let gq = moment_jacobian(&ds, &ones(2), Family::Quantile, &CONST, &[0.0]).unwrap();
        assert_eq!(gq[(0, 0)], -0.25);
        let ds2 = ForecastDataset::from_series(vec![0.0, 3.0], vec![1.0, 0.0], vec![0.0; 2])
            .unwrap();
        let ge = moment_jacobian(&ds2, &ones(2), Family::Expectile, &CONST, &[0.0]).unwrap();
        assert_eq!(ge[(0, 0)], -0.5);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let ds = two_point();
        assert!(matches!(
            moment_series(&ds, &ones(3), Family::Quantile, &CONST, &[0.0]),
            Err(Error::Shape(_))
        ));
        assert!(moment_jacobian(&ds, &ones(2), Family::Quantile, &CONST, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn alternating_series_hac() {
        let n = 10;
        let g = DMatrix::from_fn(n, 1, |t, _| if t % 2 == 0 { 1.0 } else { -1.0 });
        let ms = MomentSeries {
            mean: column_means(&g),
            g,
        };
        let cfg = HacConfig {
            kernel: Kernel::Bartlett,
            bandwidth: Bandwidth::Fixed(1),
        };
        // mean 0, Γ₀ = 1, Γ₁ = -(n-1)/n, Bartlett weight 1/2
        let gamma1 = -((n - 1) as f64) / n as f64;
        let s = hac_covariance(&ms, &cfg).unwrap();
        assert!((s[(0, 0)] - (1.0 + 2.0 * 0.5 * gamma1)).abs() < 1e-15);
    }

    #[test]
    fn bandwidth_must_be_below_sample_size() {
        let ms = moment_series(&two_point(), &ones(2), Family::Quantile, &CONST, &[0.0]).unwrap();
        let cfg = HacConfig {
            kernel: Kernel::Bartlett,
            bandwidth: Bandwidth::Fixed(2),
        };
        assert!(matches!(hac_covariance(&ms, &cfg), Err(Error::Bandwidth { .. })));
    }

    #[test]
    fn auto_bandwidth_rule() {
        assert_eq!(auto_bandwidth(100), 4);
        assert_eq!(auto_bandwidth(2000), 7);
        assert_eq!(auto_bandwidth(125), 4);
    }

    #[test]
    fn kernels_start_at_one() {
        for k in [Kernel::Bartlett, Kernel::Parzen, Kernel::QuadraticSpectral] {
            assert!((k.weight(0.0) - 1.0).abs() < 1e-12);
            assert!((k.weight(1e-6) - 1.0).abs() < 1e-5);
        }
        assert_eq!(Kernel::Parzen.weight(1.0), 0.0);
    }

    #[test]
    fn scalar_covariance_reduces() {
        let s = DMatrix::from_element(1, 1, 0.3);
        let g = DMatrix::from_element(1, 1, -0.25);
        let cov = covariance_from_parts(&s, &g, 50).unwrap();
        assert!((cov[(0, 0)] - 0.3 / (0.0625 * 50.0)).abs() < 1e-15);
        let doubled = covariance_from_parts(&s, &g, 100).unwrap();
        assert!((doubled[(0, 0)] * 2.0 - cov[(0, 0)]).abs() < 1e-15);
    }

    #[test]
    fn singular_s_is_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(inverse_psd(&s), Err(Error::SingularCovariance { .. })));
    }

    #[test]
    fn rank_deficient_jacobian_names_parameters() {
        let jac = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let s = DMatrix::identity(3, 3);
        match covariance_from_parts(&s, &jac, 10) {
            Err(Error::Unidentified { params }) => assert_eq!(params, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
