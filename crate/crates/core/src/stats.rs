//! Summary statistics and a Kolmogorov–Smirnov test against the standard
//! normal law.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased variance; absent for a single observation.
    pub variance: Option<f64>,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl SummaryStats {
    /// Standard error of the mean.
    pub fn standard_error(&self) -> Option<f64> {
        self.variance.map(|v| (v / self.n as f64).sqrt())
    }
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Two-pass moments of `samples`.
pub fn summarize(samples: &[f64]) -> Result<SummaryStats> {
    if samples.is_empty() {
        return invalid("cannot summarize an empty sample");
    }
    let n = samples.len();
    let m = mean(samples);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let nf = n as f64;
    let variance = (n >= 2).then(|| m2 / (nf - 1.0));
    // Moment-ratio skewness and excess kurtosis (population moments).
    let shape = (n >= 2 && m2 > 0.0).then(|| {
        let (c2, c3, c4) = (m2 / nf, m3 / nf, m4 / nf);
        (c3 / c2.powf(1.5), c4 / (c2 * c2) - 3.0)
    });
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(SummaryStats {
        n,
        mean: m,
        variance,
        skewness: shape.map(|s| s.0),
        excess_kurtosis: shape.map(|s| s.1),
        min,
        max,
    })
}

/// Unbiased sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return invalid(format!("length mismatch ({} vs {})", x.len(), y.len()));
    }
    if x.len() < 2 {
        return invalid("covariance needs at least two observations");
    }
    let (mx, my) = (mean(x), mean(y));
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(s / (x.len() as f64 - 1.0))
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> Result<f64> {
    covariance(x, x)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return invalid("quantile of an empty sample");
    }
    if !(0.0..=1.0).contains(&q) {
        return invalid(format!("quantile level {q} outside [0, 1]"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(s[lo] + (s[hi] - s[lo]) * (pos - lo as f64))
}

pub fn interquartile_range(samples: &[f64]) -> Result<f64> {
    Ok(quantile(samples, 0.75)? - quantile(samples, 0.25)?)
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Survival function `P(K > lambda)` of the Kolmogorov distribution.
///
/// Uses `2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)` for large `lambda` and the
/// Jacobi-theta form `1 - sqrt(2 pi)/lambda sum exp(-(2k-1)^2 pi^2 / (8
/// lambda^2))` for small `lambda`; both series stop once a term drops below
/// `1e-12`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        let mut sum = 0.0;
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        for k in 1.. {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * c).exp();
            sum += term;
            if term < 1e-12 {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1.. {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against N(0, 1) with the asymptotic
/// p-value `P(K > sqrt(n) D)`.
pub fn ks_normality(samples: &[f64]) -> Result<KsResult> {
    if samples.is_empty() {
        return invalid("KS test needs at least one sample");
    }
    if samples.iter().any(|x| x.is_nan()) {
        return invalid("KS test sample contains NaN");
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let statistic = s.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = standard_normal_cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    });
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_survival(n.sqrt() * statistic),
    })
}
