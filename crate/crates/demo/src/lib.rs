//! Browser bindings. Every export takes and returns a JSON string so the
//! page needs no generated type glue; errors come back as `{"error": ...}`.

use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

use statedep::combine::{crps_gaussian, solve_combination, CombinationProblem};
use statedep::data::{align, InstrumentRecipe};
use statedep::gmm::{two_step_estimate, GmmOptions};
use statedep::inference::{j_test, level_confidence_band};
use statedep::sim::{
    full_info_forecast, path_dataset, rigid_info_forecast, simulate_ar_garch, ArGarchParams,
    Forecaster, DEFAULT_ASYMMETRY, DEFAULT_BURN_IN,
};
use statedep::special::norm_pdf;
use statedep::{Family, SpecModel};

fn respond(r: Result<serde_json::Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn parse<T: for<'a> Deserialize<'a>>(s: &str) -> Result<T, String> {
    serde_json::from_str(s).map_err(|e| format!("bad request: {e}"))
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitRequest {
    #[serde(rename = "T")]
    t: usize,
    seed: u64,
    forecaster: Forecaster,
    family: Family,
    instruments: String,
    confidence: f64,
    grid: Vec<f64>,
    params: ArGarchParams,
}

impl Default for FitRequest {
    fn default() -> Self {
        FitRequest {
            t: 500,
            seed: 1,
            forecaster: Forecaster::Full,
            family: Family::Quantile,
            instruments: "sim".into(),
            confidence: 0.8,
            grid: (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect(),
            params: ArGarchParams::default(),
        }
    }
}

fn simulate_and_fit(req: FitRequest) -> Result<serde_json::Value, String> {
    let e = |e: statedep::Error| e.to_string();
    if req.t < 50 || req.t > 20_000 {
        return Err("T must lie in [50, 20000]".into());
    }
    let path = simulate_ar_garch(req.t, &req.params, req.seed, DEFAULT_BURN_IN).map_err(e)?;
    let x = match req.forecaster {
        Forecaster::Full => full_info_forecast(&path, DEFAULT_ASYMMETRY),
        Forecaster::Rigid => rigid_info_forecast(&path, DEFAULT_ASYMMETRY),
    }
    .map_err(e)?;
    let ds = path_dataset(&path, &x).map_err(e)?;
    let recipe: InstrumentRecipe = req.instruments.parse().map_err(e)?;
    let (aligned, w) = align(&ds, &recipe, req.family, 0.5).map_err(e)?;
    let model = SpecModel::LogisticLinear;
    let fit = two_step_estimate(&aligned, &w, req.family, &model, &GmmOptions::default()).map_err(e)?;
    let j = j_test(&fit).map_err(e)?;
    let band = level_confidence_band(&fit, &req.grid, req.confidence).map_err(e)?;
    let report = fit.report();
    let shown = ds.len().min(300);
    Ok(json!({
        "theta": report.theta,
        "std_errors": report.std_errors,
        "labels": report.param_labels,
        "j": { "statistic": j.statistic, "df": j.df, "p_value": j.p_value },
        "band": band,
        "series": { "y": &ds.y[..shown], "x": &ds.x[..shown] },
    }))
}

/// Simulates an AR(1)-GARCH(1,1) path with a forecast, fits the
/// logistic-linear level model, runs the J-test and returns a level band.
#[wasm_bindgen]
pub fn simulate_and_estimate(request: &str) -> String {
    respond(parse(request).and_then(simulate_and_fit))
}

#[derive(Deserialize)]
struct CombineRequest {
    #[serde(flatten)]
    problem: CombinationProblem,
    sigma: f64,
    y: Option<f64>,
}

#[derive(Serialize)]
struct CombineResponse {
    mu: f64,
    sigma: f64,
    crps: Option<f64>,
    curve_x: Vec<f64>,
    curve_pdf: Vec<f64>,
}

fn combine_inner(req: CombineRequest) -> Result<serde_json::Value, String> {
    let d = solve_combination(&req.problem, req.sigma, 0).map_err(|e| e.to_string())?;
    let crps = match req.y {
        Some(y) => Some(crps_gaussian(d.mu, d.sigma, y).map_err(|e| e.to_string())?),
        None => None,
    };
    let n = 201;
    let curve_x: Vec<f64> = (0..n)
        .map(|i| d.mu - 4.0 * d.sigma + 8.0 * d.sigma * i as f64 / (n - 1) as f64)
        .collect();
    let curve_pdf = curve_x
        .iter()
        .map(|x| norm_pdf((x - d.mu) / d.sigma) / d.sigma)
        .collect();
    serde_json::to_value(CombineResponse {
        mu: d.mu,
        sigma: d.sigma,
        crps,
        curve_x,
        curve_pdf,
    })
    .map_err(|e| e.to_string())
}

/// Combines point forecasts with their estimated levels into one Gaussian
/// density and scores it against an optional realization.
#[wasm_bindgen]
pub fn combine_density(request: &str) -> String {
    respond(parse(request).and_then(combine_inner))
}
