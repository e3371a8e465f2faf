//! `statedep` command-line interface.
//!
//! Every subcommand reads an optional JSON config (`--config`), applies flag
//! overrides, writes the resolved config to `<out>/config.effective.json`,
//! and writes its machine-readable outputs to `<out>/`.
//!
//! Exit codes: 0 success, 2 invalid input or config, 3 numerical failure
//! (details in `<out>/error.json`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use statedep::combine::{score_table, SigmaRecipe};
use statedep::data::{align, fmt17, load_csv, ColumnMap, InstrumentRecipe, StateSource};
use statedep::gmm::{two_step_estimate, Bandwidth, GmmFit, GmmOptions, Kernel};
use statedep::inference::{j_test, level_confidence_band, wald_test, LinearRestriction};
use statedep::sim::{
    asymmetric_info_scenario, full_info_forecast, mc_size_power, path_dataset, rigid_info_forecast,
    simulate_ar_garch, ArGarchParams, Forecaster, InstrumentTiming, McConfig, Noise,
};
use statedep::specmodels::identifiability_warning;
use statedep::{Family, SpecModel};

#[derive(Parser)]
#[command(name = "statedep", version, about = "State-dependent quantile and expectile forecast analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the level model by two-step GMM.
    Estimate(FitArgs),
    /// Test forecast rationality with the J statistic.
    Jtest(FitArgs),
    /// Wald test of a built-in restriction.
    Wald {
        #[command(flatten)]
        fit: FitArgs,
        /// zero_slope | no_break
        #[arg(long)]
        restrict: Option<String>,
    },
    /// Pointwise confidence band for the level over a state grid.
    Band {
        #[command(flatten)]
        fit: FitArgs,
        /// lo:hi:n
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long)]
        confidence: Option<f64>,
    },
    /// Gaussian predictive densities from the forecasts and the fitted level.
    Combine {
        #[command(flatten)]
        fit: FitArgs,
        /// diff2 | column:<name>
        #[arg(long = "sigma-recipe")]
        sigma_recipe: Option<String>,
    },
    /// Simulate a dataset.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// ar_garch | asym_info
        #[arg(long)]
        dgp: Option<String>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// full | rigid
        #[arg(long)]
        forecaster: Option<String>,
    },
    /// Monte Carlo size and power of the J-test.
    Mc {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated sample sizes.
        #[arg(long = "T-grid")]
        t_grid: Option<String>,
        /// full | rigid
        #[arg(long)]
        forecaster: Option<String>,
        /// lagged | nonlagged | both
        #[arg(long = "instrument-timing")]
        instrument_timing: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    data: Option<PathBuf>,
    /// quantile | expectile
    #[arg(long)]
    family: Option<String>,
    /// constant | logistic_linear | break:<t_b> | seasonal, optionally +probit
    #[arg(long)]
    model: Option<String>,
    /// Recipe such as `const,x,-e@1,v@1`, or a preset (gdp, sim).
    #[arg(long)]
    instruments: Option<String>,
    /// auto | <int>
    #[arg(long = "hac-bandwidth")]
    hac_bandwidth: Option<String>,
    /// bartlett | parzen | quadratic_spectral
    #[arg(long = "hac-kernel")]
    hac_kernel: Option<String>,
    /// column:<name> | lag_y | time
    #[arg(long)]
    state: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct McSection {
    replications: usize,
    t_grid: Vec<usize>,
    families: Vec<Family>,
    timings: Vec<InstrumentTiming>,
    nominal: f64,
    model: String,
    instruments: InstrumentRecipe,
    threads: Option<usize>,
}

impl Default for McSection {
    fn default() -> Self {
        let d = McConfig::default();
        McSection {
            replications: d.replications,
            t_grid: d.t_grid,
            families: d.families,
            timings: d.timings,
            nominal: d.nominal,
            model: "logistic_linear".into(),
            instruments: d.instruments,
            threads: None,
        }
    }
}

/// Declarative run configuration; see the README for every key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    command: Option<String>,
    data: Option<PathBuf>,
    columns: ColumnMap,
    family: Family,
    model: String,
    instruments: InstrumentRecipe,
    /// Level at which `v` instrument terms evaluate the identification function.
    identification_level: f64,
    gmm: GmmOptions,
    restrict: String,
    grid: String,
    confidence: f64,
    sigma_recipe: SigmaRecipe,
    dgp: String,
    #[serde(rename = "T")]
    t: usize,
    seed: u64,
    burn_in: usize,
    garch: ArGarchParams,
    forecaster: Forecaster,
    asymmetry: f64,
    mc: McSection,
    out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            data: None,
            columns: ColumnMap::default(),
            family: Family::Quantile,
            model: "logistic_linear".into(),
            instruments: InstrumentRecipe::gdp(),
            identification_level: 0.5,
            gmm: GmmOptions::default(),
            restrict: "zero_slope".into(),
            grid: "-2:2:41".into(),
            confidence: 0.8,
            sigma_recipe: SigmaRecipe::Diff2,
            dgp: "ar_garch".into(),
            t: 500,
            seed: 1,
            burn_in: statedep::sim::DEFAULT_BURN_IN,
            garch: ArGarchParams::default(),
            forecaster: Forecaster::Full,
            asymmetry: statedep::sim::DEFAULT_ASYMMETRY,
            mc: McSection::default(),
            out: PathBuf::from("out"),
        }
    }
}

enum Failure {
    /// Bad input, config or usage: exit 2.
    Invalid(String),
    /// Numerical breakdown: exit 3.
    Numerical(String),
}

impl From<statedep::Error> for Failure {
    fn from(e: statedep::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn invalid(key: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Invalid(format!("config key `{key}`: {msg}"))
}

fn parse_key<T: std::str::FromStr>(key: &str, s: &str) -> Res<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| invalid(key, e))
}

fn load_config(path: Option<&Path>) -> Res<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Invalid(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Invalid(format!("config {}: {e}", p.display())))
        }
    }
}

fn apply_common(cfg: &mut RunConfig, c: &CommonArgs) {
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
}

fn apply_fit(cfg: &mut RunConfig, a: &FitArgs) -> Res<()> {
    apply_common(cfg, &a.common);
    if let Some(d) = &a.data {
        cfg.data = Some(d.clone());
    }
    if let Some(f) = &a.family {
        cfg.family = parse_key("family", f)?;
    }
    if let Some(m) = &a.model {
        cfg.model = m.clone();
    }
    if let Some(i) = &a.instruments {
        cfg.instruments = parse_key("instruments", i)?;
    }
    if let Some(b) = &a.hac_bandwidth {
        cfg.gmm.hac.bandwidth = parse_key::<Bandwidth>("gmm.hac.bandwidth", b)?;
    }
    if let Some(k) = &a.hac_kernel {
        cfg.gmm.hac.kernel = serde_json::from_value::<Kernel>(Value::String(k.clone()))
            .map_err(|e| invalid("gmm.hac.kernel", e))?;
    }
    if let Some(s) = &a.state {
        cfg.columns.state = parse_key::<StateSource>("columns.state", s)?;
    }
    Ok(())
}

/// JSON with every float printed to 17 significant digits.
fn json17(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().unwrap();
                out.push_str(&fmt17(f));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, x, indent + 1);
                if i + 1 < a.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                let _ = write!(out, "{}{}: ", pad(indent + 1), Value::String(k.clone()));
                write_value(out, x, indent + 1);
                if i + 1 < m.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Serializes through `serde_json::Value`; non-finite floats become `null`.
fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Res<()> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", path.display())))
}

fn prepare_out(cfg: &RunConfig) -> Res<()> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| invalid("out", format!("cannot create {}: {e}", cfg.out.display())))?;
    write_file(&cfg.out, "config.effective.json", &json17(&to_value(cfg)))
}

struct Prepared {
    fit: GmmFit,
    data: statedep::ForecastDataset,
    model: SpecModel,
    warnings: Vec<String>,
}

fn fit_from_config(cfg: &RunConfig) -> Res<Prepared> {
    let data_path = cfg
        .data
        .as_ref()
        .ok_or_else(|| invalid("data", "a data file is required (--data)"))?;
    let model: SpecModel = parse_key("model", &cfg.model)?;
    if !(cfg.identification_level > 0.0 && cfg.identification_level < 1.0) {
        return Err(invalid("identification_level", "must lie in (0, 1)"));
    }
    let data = load_csv(data_path, &cfg.columns)
        .map_err(|e| Failure::Invalid(format!("data {}: {e}", data_path.display())))?;
    let (aligned, w) = align(&data, &cfg.instruments, cfg.family, cfg.identification_level)
        .map_err(|e| invalid("instruments", e))?;
    let mut warnings = Vec::new();
    if !model.uses_time() {
        warnings.extend(identifiability_warning(&model, &aligned.z));
    }
    let fit = two_step_estimate(&aligned, &w, cfg.family, &model, &cfg.gmm)?;
    warnings.extend(fit.diagnostics.warnings.iter().cloned());
    Ok(Prepared {
        fit,
        data: aligned,
        model,
        warnings,
    })
}

fn print_warnings(w: &[String]) {
    for msg in w {
        eprintln!("warning: {msg}");
    }
}

fn run_estimate(cfg: &RunConfig) -> Res<()> {
    let p = fit_from_config(cfg)?;
    let report = p.fit.report();
    write_file(&cfg.out, "estimate.json", &json17(&to_value(&report)))?;
    print_warnings(&p.warnings);
    println!(
        "{} {} fit, T_eff = {}, q = {}",
        p.fit.family,
        p.model.name(),
        p.fit.t_eff,
        p.fit.q()
    );
    for (i, label) in report.param_labels.iter().enumerate() {
        println!("  {label} = {:.6} (se {:.6})", report.theta[i], report.std_errors[i]);
    }
    Ok(())
}

fn run_jtest(cfg: &RunConfig) -> Res<()> {
    let p = fit_from_config(cfg)?;
    let res = j_test(&p.fit).map_err(|e| invalid("instruments", e))?;
    write_file(&cfg.out, "estimate.json", &json17(&to_value(&p.fit.report())))?;
    write_file(&cfg.out, "jtest.json", &json17(&to_value(&res)))?;
    print_warnings(&p.warnings);
    print_warnings(&res.warnings);
    println!(
        "J = {:.4}, df = {}, p-value = {:.4}",
        res.statistic, res.df, res.p_value
    );
    Ok(())
}

fn run_wald(cfg: &RunConfig) -> Res<()> {
    let p = fit_from_config(cfg)?;
    let r = LinearRestriction::named(&cfg.restrict, &p.model).map_err(|e| invalid("restrict", e))?;
    let res = wald_test(&p.fit, &r)?;
    write_file(&cfg.out, "estimate.json", &json17(&to_value(&p.fit.report())))?;
    let mut v = to_value(&res);
    v["restriction"] = json!(cfg.restrict);
    write_file(&cfg.out, "wald.json", &json17(&v))?;
    print_warnings(&p.warnings);
    println!(
        "Wald ({}) = {:.4}, df = {}, p-value = {:.4}",
        cfg.restrict, res.statistic, res.df, res.p_value
    );
    Ok(())
}

fn parse_grid(s: &str) -> Res<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || invalid("grid", format!("expected lo:hi:n, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || (n > 1 && hi < lo) {
        return Err(bad());
    }
    Ok(if n == 1 {
        vec![lo]
    } else {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    })
}

fn run_band(cfg: &RunConfig) -> Res<()> {
    let grid = parse_grid(&cfg.grid)?;
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(invalid("confidence", "must lie in (0, 1)"));
    }
    let p = fit_from_config(cfg)?;
    let band = level_confidence_band(&p.fit, &grid, cfg.confidence)?;
    let mut csv = String::from("z,level,lower,upper\n");
    for i in 0..grid.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt17(band.z_grid[i]),
            fmt17(band.level_hat[i]),
            fmt17(band.lower[i]),
            fmt17(band.upper[i])
        );
    }
    write_file(&cfg.out, "estimate.json", &json17(&to_value(&p.fit.report())))?;
    write_file(&cfg.out, "band.csv", &csv)?;
    print_warnings(&p.warnings);
    println!(
        "{} pointwise band over {} grid points written to {}",
        cfg.confidence,
        grid.len(),
        cfg.out.join("band.csv").display()
    );
    Ok(())
}

fn run_combine(cfg: &RunConfig) -> Res<()> {
    let mut cfg = cfg.clone();
    if let SigmaRecipe::Column(c) = &cfg.sigma_recipe {
        if !cfg.columns.extra.contains(c) {
            cfg.columns.extra.push(c.clone());
        }
    }
    let p = fit_from_config(&cfg)?;
    let ds = &p.data;
    let sigma: Vec<Option<f64>> = match &cfg.sigma_recipe {
        SigmaRecipe::Diff2 => statedep::combine::diff2_sigma(&ds.y),
        SigmaRecipe::Column(c) => ds
            .column(c)
            .map_err(|e| invalid("sigma_recipe", e))?
            .iter()
            .map(|&s| Some(s))
            .collect(),
    };
    let mut csv = String::from("t,y,x,level,mu,sigma\n");
    let (mut xs, mut mus, mut ys, mut levels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..ds.len() {
        let Some(s) = sigma[i] else { continue };
        let state = if p.model.uses_time() { ds.t[i] as f64 } else { ds.z[i] };
        let m = p.model.level(state, &p.fit.theta)?;
        let problem = statedep::combine::CombinationProblem {
            forecasts: vec![ds.x[i]],
            levels: vec![m],
            p_values: vec![1.0],
            families: vec![p.fit.family],
            weight_fn: Default::default(),
            distance: Default::default(),
        };
        let dens = statedep::combine::solve_combination(&problem, s, ds.t[i])
            .map_err(|e| invalid("sigma_recipe", format!("row t = {}: {e}", ds.t[i])))?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            ds.t[i],
            fmt17(ds.y[i]),
            fmt17(ds.x[i]),
            fmt17(m),
            fmt17(dens.mu),
            fmt17(dens.sigma)
        );
        xs.push(ds.x[i]);
        mus.push(dens.mu);
        ys.push(ds.y[i]);
        levels.push(m);
    }
    if xs.is_empty() {
        return Err(invalid("sigma_recipe", "no rows with a usable scale"));
    }
    let table = score_table(&[("forecast", &xs), ("mean", &mus)], &ys, &levels)?;
    write_file(&cfg.out, "estimate.json", &json17(&to_value(&p.fit.report())))?;
    write_file(&cfg.out, "combine.csv", &csv)?;
    write_file(&cfg.out, "scores.json", &json17(&to_value(&table)))?;
    print_warnings(&p.warnings);
    println!("{:10} {:>10} {:>10}", "", "MSE", "MFLL");
    for r in &table {
        println!("{:10} {:>10.4} {:>10.4}", r.name, r.mse_rel, r.mfll_rel);
    }
    Ok(())
}

fn run_simulate(cfg: &RunConfig) -> Res<()> {
    if cfg.t < 10 {
        return Err(invalid("T", "must be at least 10"));
    }
    let text = match cfg.dgp.as_str() {
        "ar_garch" => {
            let path = simulate_ar_garch(cfg.t, &cfg.garch, cfg.seed, cfg.burn_in)
                .map_err(|e| invalid("garch", e))?;
            let x = match cfg.forecaster {
                Forecaster::Full => full_info_forecast(&path, cfg.asymmetry),
                Forecaster::Rigid => rigid_info_forecast(&path, cfg.asymmetry),
            }
            .map_err(|e| invalid("asymmetry", e))?;
            let ds = path_dataset(&path, &x)?;
            let mut buf = Vec::new();
            ds.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("ascii")
        }
        "asym_info" => {
            let sc = asymmetric_info_scenario(cfg.t, cfg.seed, Noise::default(), Noise::default())?;
            let ds = sc.dataset.with_column("level", sc.quoted_level)?;
            let mut buf = Vec::new();
            ds.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("ascii")
        }
        other => return Err(invalid("dgp", format!("unknown dgp `{other}` (expected ar_garch|asym_info)"))),
    };
    write_file(&cfg.out, "simulated.csv", &text)?;
    println!(
        "{} path of length {} (seed {}) written to {}",
        cfg.dgp,
        cfg.t,
        cfg.seed,
        cfg.out.join("simulated.csv").display()
    );
    Ok(())
}

fn run_mc(cfg: &RunConfig) -> Res<()> {
    let model: SpecModel = parse_key("mc.model", &cfg.mc.model)?;
    if model.uses_time() {
        return Err(invalid("mc.model", "the Monte Carlo uses y_{t-1} as the state"));
    }
    let mc = McConfig {
        t_grid: cfg.mc.t_grid.clone(),
        replications: cfg.mc.replications,
        forecaster: cfg.forecaster,
        families: cfg.mc.families.clone(),
        timings: cfg.mc.timings.clone(),
        nominal: cfg.mc.nominal,
        base_seed: cfg.seed,
        asymmetry: cfg.asymmetry,
        burn_in: cfg.burn_in,
        params: cfg.garch,
        model,
        instruments: cfg.mc.instruments.clone(),
        gmm: cfg.gmm.clone(),
        threads: cfg.mc.threads,
    };
    if mc.t_grid.iter().any(|&t| t < 10) {
        return Err(invalid("mc.t_grid", "sample sizes must be at least 10"));
    }
    if !(mc.nominal > 0.0 && mc.nominal < 1.0) {
        return Err(invalid("mc.nominal", "must lie in (0, 1)"));
    }
    let report = mc_size_power(&mc).map_err(|e| invalid("mc", e))?;
    write_file(&cfg.out, "mc.csv", &report.to_csv())?;
    write_file(&cfg.out, "mc.json", &json17(&to_value(&report)))?;
    print_warnings(&report.warnings);
    for f in &report.failure_examples {
        eprintln!("failed fit: {f}");
    }
    print!("{}", report.to_csv());
    Ok(())
}

fn resolve(cli: &Cli) -> Res<(RunConfig, &'static str)> {
    let (name, config) = match &cli.command {
        Command::Estimate(a) | Command::Jtest(a) => (
            if matches!(cli.command, Command::Estimate(_)) { "estimate" } else { "jtest" },
            a.common.config.as_deref(),
        ),
        Command::Wald { fit, .. } | Command::Band { fit, .. } | Command::Combine { fit, .. } => (
            match cli.command {
                Command::Wald { .. } => "wald",
                Command::Band { .. } => "band",
                _ => "combine",
            },
            fit.common.config.as_deref(),
        ),
        Command::Simulate { common, .. } => ("simulate", common.config.as_deref()),
        Command::Mc { common, .. } => ("mc", common.config.as_deref()),
    };
    let mut cfg = load_config(config)?;
    cfg.command = Some(name.to_string());
    match &cli.command {
        Command::Estimate(a) | Command::Jtest(a) => apply_fit(&mut cfg, a)?,
        Command::Wald { fit, restrict } => {
            apply_fit(&mut cfg, fit)?;
            if let Some(r) = restrict {
                cfg.restrict = r.clone();
            }
        }
        Command::Band { fit, grid, confidence } => {
            apply_fit(&mut cfg, fit)?;
            if let Some(g) = grid {
                cfg.grid = g.clone();
            }
            if let Some(c) = confidence {
                cfg.confidence = *c;
            }
        }
        Command::Combine { fit, sigma_recipe } => {
            apply_fit(&mut cfg, fit)?;
            if let Some(s) = sigma_recipe {
                cfg.sigma_recipe = parse_key("sigma_recipe", s)?;
            }
        }
        Command::Simulate { common, dgp, t, seed, forecaster } => {
            apply_common(&mut cfg, common);
            if let Some(d) = dgp {
                cfg.dgp = d.clone();
            }
            if let Some(t) = t {
                cfg.t = *t;
            }
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            if let Some(f) = forecaster {
                cfg.forecaster = parse_key("forecaster", f)?;
            }
        }
        Command::Mc { common, reps, t_grid, forecaster, instrument_timing, seed, threads } => {
            apply_common(&mut cfg, common);
            if let Some(r) = reps {
                cfg.mc.replications = *r;
            }
            if let Some(g) = t_grid {
                cfg.mc.t_grid = g
                    .split(',')
                    .map(|s| parse_key::<usize>("mc.t_grid", s.trim()))
                    .collect::<Res<_>>()?;
            }
            if let Some(f) = forecaster {
                cfg.forecaster = parse_key("forecaster", f)?;
            }
            if let Some(t) = instrument_timing {
                cfg.mc.timings = match t.as_str() {
                    "both" => vec![InstrumentTiming::Lagged, InstrumentTiming::NonLagged],
                    other => vec![parse_key("mc.timings", other)?],
                };
            }
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            if let Some(n) = threads {
                cfg.mc.threads = Some(*n);
            }
        }
    }
    Ok((cfg, name))
}

fn run(cli: &Cli) -> (Res<()>, Option<PathBuf>) {
    let (cfg, name) = match resolve(cli) {
        Ok(v) => v,
        Err(e) => return (Err(e), None),
    };
    if let Err(e) = prepare_out(&cfg) {
        return (Err(e), None);
    }
    let res = match name {
        "estimate" => run_estimate(&cfg),
        "jtest" => run_jtest(&cfg),
        "wald" => run_wald(&cfg),
        "band" => run_band(&cfg),
        "combine" => run_combine(&cfg),
        "simulate" => run_simulate(&cfg),
        _ => run_mc(&cfg),
    };
    (res, Some(cfg.out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (res, out) = run(&cli);
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            if let Some(dir) = out {
                let body = json17(&json!({ "kind": "numerical", "message": msg }));
                let _ = fs::write(dir.join("error.json"), body);
            }
            ExitCode::from(3)
        }
    }
}
