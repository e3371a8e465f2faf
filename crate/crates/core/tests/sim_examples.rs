use statedep::data::{align, InstrumentRecipe};
use statedep::functionals::Family;
use statedep::gmm::{two_step_estimate, GmmOptions};
use statedep::sim::*;
use statedep::specmodels::{Link, SpecModel};

#[test]
fn stationary_variance_is_one() {
    let path = simulate_ar_garch(1_000_000, &ArGarchParams::default(), 2024, 500).unwrap();
    let mean = path.sigma.iter().map(|s| s * s).sum::<f64>() / path.len() as f64;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn degenerate_params_give_iid_normals() {
    let p = ArGarchParams {
        ar: 0.0,
        omega: 1.0,
        beta: 0.0,
        alpha: 0.0,
    };
    let n = 100_000;
    let path = simulate_ar_garch(n, &p, 9, 0).unwrap();
    let mean = path.y.iter().sum::<f64>() / n as f64;
    let var = path.y.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // sd of the sample variance of N(0,1) is √(2/(n-1))
    assert!((var - 1.0).abs() < 3.0 * (2.0 / (n - 1) as f64).sqrt(), "{var}");
}

#[test]
fn full_info_expectile_level_is_recovered() {
    let path = simulate_ar_garch(2000, &ArGarchParams::default(), 31, 500).unwrap();
    let x = full_info_forecast(&path, DEFAULT_ASYMMETRY).unwrap();
    let ds = path_dataset(&path, &x).unwrap();
    let recipe = InstrumentRecipe::simulation();
    let (ds, w) = align(&ds, &recipe, Family::Expectile, 0.5).unwrap();
    let model = SpecModel::Constant { link: Link::Logistic };
    let fit = two_step_estimate(&ds, &w, Family::Expectile, &model, &GmmOptions::default()).unwrap();
    let level = model.level(0.0, &fit.theta).unwrap();
    assert!((level - 1.0 / 2.85).abs() < 0.03, "{level}");
}

#[test]
fn single_replication_report() {
    let cfg = McConfig {
        t_grid: vec![250],
        replications: 1,
        families: vec![Family::Quantile],
        timings: vec![InstrumentTiming::NonLagged],
        ..Default::default()
    };
    let rep = mc_size_power(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 1);
    assert!(rep.rows[0].rate == 0.0 || rep.rows[0].rate == 1.0);
    assert_eq!(rep.seeds.len(), 1);
    assert!(!rep.warnings.is_empty());
}

#[test]
fn report_is_independent_of_thread_count() {
    let base = McConfig {
        t_grid: vec![100, 250],
        replications: 24,
        forecaster: Forecaster::Rigid,
        ..Default::default()
    };
    let one = mc_size_power(&McConfig {
        threads: Some(1),
        ..base.clone()
    })
    .unwrap();
    let four = mc_size_power(&McConfig {
        threads: Some(4),
        ..base
    })
    .unwrap();
    assert_eq!(one.to_csv(), four.to_csv());
    assert_eq!(
        serde_json::to_string(&one).unwrap(),
        serde_json::to_string(&four).unwrap()
    );
    assert!(one.rows.iter().all(|r| (0.0..=1.0).contains(&r.rate)));
}

#[test]
fn asymmetric_info_scenario_levels() {
    let sc = asymmetric_info_scenario(1000, 5, Noise::default(), Noise::default()).unwrap();
    for i in 0..sc.dataset.len() {
        let expect = statedep::special::norm_cdf(-sc.dataset.z[i]);
        assert_eq!(sc.quoted_level[i], expect);
        let d = &sc.dataset;
        assert!((d.y[i] - d.x[i] - d.z[i]).is_finite());
    }
}
