//! Small summary statistics used by the studies and diagnostics.

use crate::rng::stream;
use rand::Rng;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares fit `y = intercept + slope * x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// OLS fit with the classical standard error of the slope.
pub fn ols_fit(x: &[f64], y: &[f64]) -> SlopeFit {
    let (slope, intercept) = ols(x, y);
    let n = x.len() as f64;
    let mx = mean(x);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    SlopeFit { slope, intercept, stderr }
}

/// Log-log slope of the median of `groups[k]` against `xs[k]`, with a
/// bootstrap standard error that resamples replicates within each group.
pub fn log_median_slope(xs: &[f64], groups: &[Vec<f64>], resamples: usize, seed: u64) -> SlopeFit {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let fit = |meds: &[f64]| ols(&lx, &meds.iter().map(|m| m.ln()).collect::<Vec<_>>());
    let meds: Vec<f64> = groups.iter().map(|g| median(g)).collect();
    let (slope, intercept) = fit(&meds);
    let mut rng = stream(seed, 0xB007);
    let mut slopes = Vec::with_capacity(resamples);
    let mut buf = Vec::new();
    for _ in 0..resamples {
        let meds: Vec<f64> = groups
            .iter()
            .map(|g| {
                buf.clear();
                for _ in 0..g.len() {
                    buf.push(g[(rng.next_u64() % g.len() as u64) as usize]);
                }
                median(&buf)
            })
            .collect();
        slopes.push(fit(&meds).0);
    }
    let stderr = if resamples > 1 { variance(&slopes).sqrt() } else { f64::NAN };
    SlopeFit { slope, intercept, stderr }
}

/// Standard error of the mean of an autocorrelated series by batch means.
pub fn batch_means_stderr(x: &[f64], batches: usize) -> f64 {
    let b = x.len() / batches;
    let means: Vec<f64> = (0..batches).map(|k| mean(&x[k * b..(k + 1) * b])).collect();
    (variance(&means) / batches as f64).sqrt()
}

/// Effective sample size from the batch-means variance ratio.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    if x.len() < 40 {
        return x.len() as f64;
    }
    let batches = ((x.len() as f64).sqrt() as usize).max(10);
    let se = batch_means_stderr(&x[..(x.len() / batches) * batches], batches);
    let v = variance(x);
    if se == 0.0 {
        return x.len() as f64;
    }
    (v / (se * se)).min(x.len() as f64)
}
