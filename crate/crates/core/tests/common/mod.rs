//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerical code.
#![allow(dead_code)]

use nalgebra::DMatrix;
use statedep::data::InstrumentMatrix;
use statedep::ForecastDataset;

pub fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// 20-row fixture with a state column and three instruments.
pub fn fixture20() -> (ForecastDataset, InstrumentMatrix) {
    let n = 20;
    let y: Vec<f64> = (0..n).map(|i| (0.9 * i as f64).sin() + 0.1 * i as f64).collect();
    let x: Vec<f64> = (0..n).map(|i| (0.4 * i as f64).cos() + 0.05 * i as f64).collect();
    let z: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0).collect();
    let mut w = DMatrix::zeros(n, 3);
    for i in 0..n {
        w[(i, 0)] = 1.0;
        w[(i, 1)] = x[i];
        w[(i, 2)] = z[i] * z[i] - 0.3;
    }
    let ds = ForecastDataset::from_series(y, x, z).unwrap();
    let wm = InstrumentMatrix::from_matrix(w, vec!["const".into(), "x".into(), "z2".into()]).unwrap();
    (ds, wm)
}

/// `V_τ(x, y)` written out from the definitions.
pub fn ident(expectile: bool, x: f64, y: f64, tau: f64) -> f64 {
    let below = if y <= x { 1.0 } else { 0.0 };
    if expectile {
        (below - tau) * (x - y).abs()
    } else {
        below - tau
    }
}

/// Moment rows `V(x_t, y_t; Ψ(θ₁ + θ₂ z_t))·w_t` for the logistic-linear model.
pub fn brute_moments(expectile: bool, x: &[f64], y: &[f64], z: &[f64], w: &DMatrix<f64>, th: &[f64]) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|t| {
            let tau = logistic(th[0] + th[1] * z[t]);
            let v = ident(expectile, x[t], y[t], tau);
            (0..w.ncols()).map(|j| v * w[(t, j)]).collect()
        })
        .collect()
}

pub fn brute_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let q = rows[0].len();
    let mut m = vec![0.0; q];
    for r in rows {
        for j in 0..q {
            m[j] += r[j];
        }
    }
    m.iter().map(|v| v / n as f64).collect()
}

/// `(1/T) Σ ∂V/∂τ · w_t · ∇Ψ(θ₁ + θ₂ z_t)'` with the derivative taken by hand.
pub fn brute_jacobian(expectile: bool, x: &[f64], y: &[f64], z: &[f64], w: &DMatrix<f64>, th: &[f64]) -> Vec<Vec<f64>> {
    let (n, q) = (x.len(), w.ncols());
    let mut g = vec![vec![0.0; 2]; q];
    for t in 0..n {
        let p = logistic(th[0] + th[1] * z[t]);
        let dm = [p * (1.0 - p), p * (1.0 - p) * z[t]];
        let dv = if expectile { -(x[t] - y[t]).abs() } else { -1.0 };
        for j in 0..q {
            for k in 0..2 {
                g[j][k] += dv * w[(t, j)] * dm[k] / n as f64;
            }
        }
    }
    g
}

/// Bartlett HAC with weights `1 - j/(h+1)` on demeaned autocovariances.
pub fn brute_bartlett(rows: &[Vec<f64>], h: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    let q = rows[0].len();
    let mean = brute_mean(rows);
    let c: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let mut s = vec![vec![0.0; q]; q];
    for lag in 0..=h {
        let k = 1.0 - lag as f64 / (h + 1) as f64;
        for i in 0..q {
            for j in 0..q {
                let mut gij = 0.0;
                let mut gji = 0.0;
                for t in lag..n {
                    gij += c[t][i] * c[t - lag][j];
                    gji += c[t][j] * c[t - lag][i];
                }
                if lag == 0 {
                    s[i][j] += gij / n as f64;
                } else {
                    s[i][j] += k * (gij + gji) / n as f64;
                }
            }
        }
    }
    s
}

/// `(1/T) Σ (g_t - ḡ)(g_t - ḡ)'`, accumulated in time order.
pub fn outer_product_cov(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let q = rows[0].len();
    let mean = brute_mean(rows);
    let mut s = vec![vec![0.0; q]; q];
    for r in rows {
        for i in 0..q {
            for j in 0..q {
                s[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in &mut s {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }
    s
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            d = d.max((a[(i, j)] - b[i][j]).abs());
        }
    }
    d
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Chi-square CDF by Simpson integration of the density, independent of the
/// incomplete-gamma code.
pub fn chi2_cdf_quadrature(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = df as f64 / 2.0;
    let log_norm = -(k * 2f64.ln() + ln_gamma_stirling(k));
    // substitute u = sqrt(t) to tame the t^(k-1) singularity at 0 for df = 1
    let f = |u: f64| {
        if u == 0.0 {
            return if df == 1 { 2.0 * (log_norm).exp() } else { 0.0 };
        }
        let t = u * u;
        2.0 * u * (log_norm + (k - 1.0) * t.ln() - t / 2.0).exp()
    };
    let n = 20_000;
    let b = x.sqrt();
    let h = b / n as f64;
    let mut s = f(0.0) + f(b);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `ln Γ(k)` for half-integers via the recursion from `Γ(1/2) = √π`, `Γ(1) = 1`.
pub fn ln_gamma_stirling(k: f64) -> f64 {
    let (mut v, mut a) = if (k.fract() - 0.5).abs() < 1e-12 {
        (std::f64::consts::PI.sqrt().ln(), 0.5)
    } else {
        (0.0, 1.0)
    };
    while a < k - 1e-12 {
        v += a.ln();
        a += 1.0;
    }
    v
}

/// Standard normal CDF by composite Simpson integration of the density.
pub fn normal_cdf_quadrature(x: f64) -> f64 {
    let lo = -12.0;
    if x <= lo {
        return 0.0;
    }
    let n = 2_000;
    let h = (x - lo) / n as f64;
    let pdf = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(lo) + pdf(x);
    for i in 1..n {
        s += pdf(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Root of a monotone function by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
