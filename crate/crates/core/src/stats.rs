//! Slope fits, sample moments and Kolmogorov–Smirnov tests.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Least-squares fit of `log value = intercept + slope * log scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares on `(ln δ, ln value)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return input("need at least three points for a slope fit");
    }
    if points.iter().any(|&(s, v)| !(s > 0.0) || !(v > 0.0)) {
        return input("scales and values must be positive");
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return input("all scales are equal");
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(SlopeFit {
        scales: points.iter().map(|p| p.0).collect(),
        values: points.iter().map(|p| p.1).collect(),
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Kolmogorov–Smirnov statistic with its asymptotic p-value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn p_value(stat: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_q((root + 0.12 + 0.11 / root) * stat)
}

/// One-sample test against the uniform law on `[a, b]`.
pub fn ks_uniform(samples: &[f64], a: f64, b: f64) -> Result<KsResult> {
    if samples.is_empty() || !(b > a) {
        return input("need samples and a non-degenerate interval");
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut stat = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let f = ((x - a) / (b - a)).clamp(0.0, 1.0);
        stat = stat.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: stat,
        p_value: p_value(stat, n),
    })
}

/// Two-sample test.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult> {
    if x.is_empty() || y.is_empty() {
        return input("both samples must be non-empty");
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut stat = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        stat = stat.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: stat,
        p_value: p_value(stat, na * nb / (na + nb)),
    })
}
