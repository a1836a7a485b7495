//! Statistical diagnostics used by the validation suites: Kolmogorov-Smirnov
//! statistics with asymptotic p-values, the standard normal c.d.f., and a
//! least-squares slope fit for convergence-rate checks.

use crate::error::{GmsError, Result};

/// Standard normal c.d.f. via erfc.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

// Complementary error function, W. J. Cody-style rational approximation
// (|error| < 1.2e-7, plenty for KS p-values).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// One-sample KS statistic against a continuous c.d.f.
pub fn ks_statistic(data: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if data.is_empty() {
        return Err(GmsError::InvalidArgument("empty sample".into()));
    }
    let mut xs = data.to_vec();
    if xs.iter().any(|v| v.is_nan()) {
        return Err(GmsError::InvalidArgument("NaN in sample".into()));
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((i as f64 / n - f).abs());
    }
    Ok(d)
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(GmsError::InvalidArgument("empty sample".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov p-value for the statistic `d` at effective sample
/// size `n_eff` (n for one sample, n*m/(n+m) for two samples).
pub fn kolmogorov_pvalue(d: f64, n_eff: f64) -> f64 {
    let t = d * n_eff.sqrt();
    if t <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        s += (-1.0f64).powi(k - 1) * (-2.0 * kf * kf * t * t).exp();
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Least-squares slope and intercept of y on x.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(GmsError::InvalidArgument("need two equal-length samples".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(GmsError::InvalidArgument("degenerate x values".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
