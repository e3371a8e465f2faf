//! Derivative-free Nelder–Mead simplex minimizer.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplexConfig {
    /// Budget of objective evaluations per run.
    pub max_evals: usize,
    /// Converged once the simplex diameter (max-norm) drops below this.
    pub tol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig {
            max_evals: 10_000,
            tol: 1e-9,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub diameter: f64,
    pub converged: bool,
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

fn sort(simplex: &mut Vec<Vec<f64>>, values: &mut Vec<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    *simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
    *values = idx.iter().map(|&i| values[i]).collect();
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], cfg: &SimplexConfig) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += cfg.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();
    sort(&mut simplex, &mut values);

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals < cfg.max_evals && diameter(&simplex) >= cfg.tol {
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(alpha);
        let fr = eval(&reflected, &mut evals);
        if fr < values[0] {
            let expanded = along(gamma);
            let fe = eval(&expanded, &mut evals);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            // outside contraction when the reflection beat the worst vertex
            let contracted = if fr < values[n] { along(rho) } else { along(-rho) };
            let fc = eval(&contracted, &mut evals);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    for (x, b) in simplex[i].iter_mut().zip(&best) {
                        *x = b + sigma * (*x - b);
                    }
                    values[i] = eval(&simplex[i], &mut evals);
                }
            }
        }
        sort(&mut simplex, &mut values);
    }

    let d = diameter(&simplex);
    Minimum {
        x: simplex.swap_remove(0),
        f: values[0],
        evals,
        diameter: d,
        converged: d < cfg.tol,
    }
}

/// Nelder–Mead followed by one restart from the best point, which guards
/// against premature collapse of the simplex.
pub fn nelder_mead_restarted<F>(mut f: F, x0: &[f64], cfg: &SimplexConfig) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let first = nelder_mead(&mut f, x0, cfg);
    let remaining = cfg.max_evals.saturating_sub(first.evals);
    if remaining <= x0.len() + 1 || !first.f.is_finite() {
        return first;
    }
    let restart_cfg = SimplexConfig {
        max_evals: remaining,
        initial_step: (cfg.initial_step * 0.1).max(100.0 * cfg.tol),
        ..*cfg
    };
    let second = nelder_mead(&mut f, &first.x, &restart_cfg);
    let evals = first.evals + second.evals;
    let mut best = if second.f <= first.f { second } else { first };
    best.evals = evals;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead_restarted(rosen, &[-1.2, 1.0], &SimplexConfig::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn respects_infinite_walls() {
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                f64::INFINITY
            } else {
                (x[0] - 2.0).powi(2)
            }
        };
        let m = nelder_mead(f, &[1.0], &SimplexConfig::default());
        assert!((m.x[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn stops_at_budget() {
        let cfg = SimplexConfig {
            max_evals: 20,
            ..SimplexConfig::default()
        };
        let m = nelder_mead(|x: &[f64]| x.iter().map(|v| v * v).sum(), &[5.0, 5.0, 5.0], &cfg);
        assert!(!m.converged);
        assert!(m.evals <= 20 + 4);
    }
}
