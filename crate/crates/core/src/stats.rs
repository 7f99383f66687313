//! Sample statistics, regression, Kolmogorov–Smirnov and block bootstrap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    /// `|value − target| ≤ k·se`, with equality allowed for exact values.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (zero for fewer than two samples).
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Mean with its standard error `sd/√n`.
pub fn mean_estimate(x: &[f64]) -> Estimate {
    Estimate { value: mean(x), se: std_dev(x) / (x.len().max(1) as f64).sqrt() }
}

pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1) as f64
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let d = (variance(x) * variance(y)).sqrt();
    if d == 0.0 {
        0.0
    } else {
        covariance(x, y) / d
    }
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len();
    assert!(n >= 2 && y.len() == n);
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    LineFit { slope, slope_se, intercept }
}

/// Intercept at `x = 0` of the weighted line through `(x, y ± se)`.
///
/// Weights are `1/se²`; with any zero SE the fit is unweighted and the
/// intercept SE comes from the residuals alone.
pub fn extrapolate_to_zero(x: &[f64], y: &[Estimate]) -> Estimate {
    assert!(x.len() >= 2 && x.len() == y.len());
    let weighted = y.iter().all(|e| e.se > 0.0);
    let w: Vec<f64> = y.iter().map(|e| if weighted { 1.0 / (e.se * e.se) } else { 1.0 }).collect();
    let sw: f64 = w.iter().sum();
    let swx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let swxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let swy: f64 = w.iter().zip(y).map(|(w, e)| w * e.value).sum();
    let swxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), e)| w * x * e.value).sum();
    let det = sw * swxx - swx * swx;
    let intercept = (swxx * swy - swx * swxy) / det;
    let se = if weighted {
        (swxx / det).sqrt()
    } else if x.len() > 2 {
        let slope = (sw * swxy - swx * swy) / det;
        let rss: f64 = x.iter().zip(y).map(|(x, e)| (e.value - intercept - slope * x).powi(2)).sum();
        (rss / (x.len() - 2) as f64 * swxx / det).sqrt()
    } else {
        0.0
    };
    Estimate { value: intercept, se }
}

/// Log-log regression slope of `y` against `x`.
///
/// `y_se` are standard errors of the `y` values; they are propagated into
/// the slope SE (delta method) and combined with the residual scatter.
pub fn log_log_slope(x: &[f64], y: &[f64], y_se: &[f64]) -> LineFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let mut fit = linear_fit(&lx, &ly);
    let mx = mean(&lx);
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let propagated: f64 = lx
        .iter()
        .zip(y.iter().zip(y_se))
        .map(|(a, (v, s))| {
            let rel = if *v != 0.0 { s / v.abs() } else { 0.0 };
            ((a - mx) / sxx * rel).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    fit.slope_se = fit.slope_se.hypot(propagated);
    fit
}

/// One-sample Kolmogorov–Smirnov statistic against `Normal(0, variance)`.
pub fn ks_normal(sample: &[f64], variance: f64) -> f64 {
    let normal = Normal::new(0.0, variance.sqrt()).expect("positive variance");
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = normal.cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `c(α)/√n` with `c(α) = √(−ln(α/2)/2)`
/// (`c(0.05) ≈ 1.358`).
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Non-overlapping block bootstrap of the mean of several per-point series.
///
/// `series[s][i]` is statistic `s` at point `i`. Points are grouped into
/// consecutive blocks of `block` points; blocks are resampled with
/// replacement `reps` times. Returns the full-sample mean and bootstrap SE
/// of each statistic.
pub fn block_bootstrap(series: &[Vec<f64>], block: usize, reps: usize, seed: u64) -> Vec<Estimate> {
    let n = series.first().map_or(0, |s| s.len());
    let block = block.max(1).min(n.max(1));
    let nb = (n / block).max(1);
    let block_means: Vec<Vec<f64>> = series
        .iter()
        .map(|s| (0..nb).map(|b| mean(&s[b * block..((b + 1) * block).min(n)])).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); series.len()];
    let mut picks = vec![0usize; nb];
    for _ in 0..reps {
        for p in picks.iter_mut() {
            *p = rng.gen_range(0..nb);
        }
        for (s, bm) in block_means.iter().enumerate() {
            boot[s].push(picks.iter().map(|&p| bm[p]).sum::<f64>() / nb as f64);
        }
    }
    series
        .iter()
        .zip(&boot)
        .map(|(s, b)| Estimate { value: mean(s), se: std_dev(b) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope + 2.0).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-13);
        assert!(f.slope_se < 1e-12);
    }

    #[test]
    fn ks_critical_value_classical() {
        assert!((ks_critical(2000, 0.05) - 1.358 / 2000f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn bootstrap_se_of_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..20000).map(|_| rng.gen::<f64>() - 0.5).collect();
        let e = block_bootstrap(&[x], 50, 400, 9)[0];
        let expected = (1.0f64 / 12.0 / 20000.0).sqrt();
        assert!((e.se / expected - 1.0).abs() < 0.2, "{} vs {}", e.se, expected);
    }
}
