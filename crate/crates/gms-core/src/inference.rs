//! Asymptotic inference: Hajek projections, the 4x4 covariance matrix of
//! Theorem-1 type, delta-method variance and confidence intervals, plus a
//! bootstrap fallback.
//!
//! Gamma(i,j) = M(i) M(j) Cov(E[phi_i^s | Z_1], E[phi_j^s | Z_1]) is
//! estimated from per-row projection estimates; sigma^2 = g' Gamma g with
//! g the gradient of Psi at the estimated components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{GmsError, Result};
use crate::family::{FamilyKind, TestFamily};
use crate::kahan::KahanSum;
use crate::kernels::{kernel_order, symmetrize_refs};
use crate::metric::{MetricSpace, Point};
use crate::sampling::PairedSample;
use crate::ustat::{estimate_gms_index, IndexEstimate, UStatConfig};

/// Estimated Gamma matrix together with the per-row projections it came from.
#[derive(Debug, Clone)]
pub struct GammaEstimate {
    pub gamma: [[f64; 4]; 4],
    /// Row i holds (h_1(i), h_2(i), h_3(i), h_4(i)).
    pub projections: Vec<[f64; 4]>,
}

/// Estimated conditional expectation E[phi_j^s | Z_i]: the average of
/// phi_j^s over tuples whose first slot is row i and whose remaining
/// M(j)-1 slots come from other rows — exhaustive when there are at most
/// `l` such tuples, otherwise over `l` sampled tuples.
pub fn hajek_projection(
    j: u8,
    sample: &PairedSample,
    family: &TestFamily,
    i: usize,
    l: usize,
    seed: u64,
) -> Result<f64> {
    crate::kernels::check_kernel_index(j)?;
    if l == 0 {
        return Err(GmsError::InvalidArgument("L must be >= 1".into()));
    }
    let n = sample.n();
    let order = kernel_order(j, family.m());
    if n < order + 1 {
        return Err(GmsError::InvalidArgument(format!(
            "N={n} too small for projections of order {order}"
        )));
    }
    if i >= n {
        return Err(GmsError::InvalidArgument(format!("row {i} out of range 0..{n}")));
    }
    let partners = order - 1;
    if partners == 0 {
        let tuple = [&sample.rows[i]];
        return symmetrize_refs(j, family, &tuple);
    }
    let mut acc = KahanSum::new();
    let mut count = 0usize;
    let combos = binomial_usize(n - 1, partners);
    if combos.map(|c| c <= l).unwrap_or(false) {
        // exhaustive enumeration over (M-1)-subsets of the other rows
        let others: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let mut idx: Vec<usize> = (0..partners).collect();
        loop {
            let mut tuple: Vec<&(Point, Point)> = Vec::with_capacity(order);
            tuple.push(&sample.rows[i]);
            tuple.extend(idx.iter().map(|&k| &sample.rows[others[k]]));
            acc.add(symmetrize_refs(j, family, &tuple)?);
            count += 1;
            let mut k = partners;
            loop {
                if k == 0 {
                    return Ok(acc.value() / count as f64);
                }
                k -= 1;
                if idx[k] != k + others.len() - partners {
                    break;
                }
            }
            idx[k] += 1;
            for t in k + 1..partners {
                idx[t] = idx[t - 1] + 1;
            }
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((i as u64) * 4 + (j as u64 - 1));
    let mut slots = vec![0usize; partners];
    for _ in 0..l {
        // partners drawn without replacement from rows != i
        let mut filled = 0;
        while filled < partners {
            let raw = rng.gen_range(0..n - 1);
            let cand = if raw >= i { raw + 1 } else { raw };
            if !slots[..filled].contains(&cand) {
                slots[filled] = cand;
                filled += 1;
            }
        }
        let mut tuple: Vec<&(Point, Point)> = Vec::with_capacity(order);
        tuple.push(&sample.rows[i]);
        tuple.extend(slots.iter().map(|&k| &sample.rows[k]));
        acc.add(symmetrize_refs(j, family, &tuple)?);
        count += 1;
    }
    Ok(acc.value() / count as f64)
}

fn binomial_usize(n: usize, k: usize) -> Option<usize> {
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return None;
        }
    }
    usize::try_from(c).ok()
}

/// Estimate Gamma from the sample. SobolValue and scalar half-space
/// families use exact factorized projections (O(N) and O(N log N)); other
/// families fall back to the sampled projections with `l` tuples per row.
pub fn estimate_gamma(
    sample: &PairedSample,
    family: &TestFamily,
    l: usize,
    seed: u64,
) -> Result<GammaEstimate> {
    let n = sample.n();
    let m = family.m();
    if n < m + 3 {
        return Err(GmsError::InvalidArgument(format!(
            "N={n} too small to estimate Gamma for m={m}"
        )));
    }
    let projections: Vec<[f64; 4]> = match family.kind {
        FamilyKind::SobolValue => {
            let (z, w) = sample.scalar_columns()?;
            sobol_projections(&z, &w)
        }
        FamilyKind::HalfSpaceCvm if matches!(family.space, MetricSpace::Scalar) => {
            let (z, w) = sample.scalar_columns()?;
            cvm_projections(&z, &w)
        }
        _ => {
            let rows: Vec<usize> = (0..n).collect();
            let per_row: Vec<Result<[f64; 4]>> = rows
                .par_chunks(16)
                .map(|chunk| {
                    let mut out = Vec::with_capacity(chunk.len());
                    for &i in chunk {
                        let mut h = [0.0; 4];
                        for j in 1..=4u8 {
                            h[(j - 1) as usize] =
                                hajek_projection(j, sample, family, i, l, seed)?;
                        }
                        out.push(h);
                    }
                    Ok(out)
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flat_map(|r| match r {
                    Ok(v) => v.into_iter().map(Ok).collect::<Vec<_>>(),
                    Err(e) => vec![Err(e)],
                })
                .collect();
            per_row.into_iter().collect::<Result<Vec<_>>>()?
        }
    };
    let gamma = gamma_from_projections(&projections, m);
    Ok(GammaEstimate { gamma, projections })
}

/// Exact projections for SobolValue (m = 0):
/// h1 = z w, h3 = z^2, h2 = (z (Sw - w) + w (Sz - z)) / (2(N-1)),
/// h4 = z (Sz - z) / (N-1).
fn sobol_projections(z: &[f64], w: &[f64]) -> Vec<[f64; 4]> {
    let n = z.len() as f64;
    let sz: f64 = crate::kahan::kahan_sum(z.iter().copied());
    let sw: f64 = crate::kahan::kahan_sum(w.iter().copied());
    z.iter()
        .zip(w.iter())
        .map(|(&a, &b)| {
            [
                a * b,
                (a * (sw - b) + b * (sz - a)) / (2.0 * (n - 1.0)),
                a * a,
                a * (sz - a) / (n - 1.0),
            ]
        })
        .collect()
}

/// Exact projections for the scalar half-space family via dominance counts
/// and suffix sums over the z-order (O(N log N) overall).
fn cvm_projections(z: &[f64], w: &[f64]) -> Vec<[f64; 4]> {
    let n = z.len();
    let nf = n as f64;
    let c = crate::ustat::cvm_counts(z, w);
    let count_lt = |t: f64| c.sorted_z.partition_point(|&x| x < t) as f64;
    // suffix sums over rows ordered by z: suf_q(t) = sum_{z_r >= t} (Q_r - q_r),
    // suf_p(t) = sum_{z_r >= t} (P_r - 1)
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    let mut suf_q = vec![0.0; n + 1];
    let mut suf_p = vec![0.0; n + 1];
    for k in (0..n).rev() {
        let r = order[k];
        suf_q[k] = suf_q[k + 1] + (c.q[r] - c.qd[r]);
        suf_p[k] = suf_p[k + 1] + (c.p[r] - 1.0);
    }
    let suffix_at = |suf: &[f64], t: f64| suf[c.sorted_z.partition_point(|&x| x < t)];
    (0..n)
        .map(|i| {
            let (p, q, r, qd) = (c.p[i], c.q[i], c.r[i], c.qd[i]);
            let g = nf - count_lt(z[i].max(w[i])); // #{r: z_r >= max(z_i, w_i)}
            let pp = nf - count_lt(z[i]); // #{r: z_r >= z_i}
            let h1 = (r - qd + g - qd) / (2.0 * (nf - 1.0));
            let h3 = (p - 1.0 + pp - 1.0) / (2.0 * (nf - 1.0));
            let a2 = (p - 1.0) * (q - qd) - (r - qd);
            let b2 = suffix_at(&suf_q, z[i]) - (q - qd) - g + qd;
            let c2 = suffix_at(&suf_p, w[i]) - qd * (p - 1.0) - g + qd;
            let h2 = (a2 + b2 + c2) / (3.0 * (nf - 1.0) * (nf - 2.0));
            let a4 = (p - 1.0) * (p - 2.0);
            let b4 = suffix_at(&suf_p, z[i]) - (p - 1.0) - pp + 1.0;
            let h4 = (a4 + 2.0 * b4) / (3.0 * (nf - 1.0) * (nf - 2.0));
            [h1, h2, h3, h4]
        })
        .collect()
}

/// Gamma(i,j) = M(i) M(j) * empirical covariance of the projection columns.
fn gamma_from_projections(projections: &[[f64; 4]], m: usize) -> [[f64; 4]; 4] {
    let n = projections.len() as f64;
    let orders = [
        kernel_order(1, m) as f64,
        kernel_order(2, m) as f64,
        kernel_order(3, m) as f64,
        kernel_order(4, m) as f64,
    ];
    let mut means = [0.0; 4];
    for (a, mean) in means.iter_mut().enumerate() {
        let mut s = KahanSum::new();
        for row in projections {
            s.add(row[a]);
        }
        *mean = s.value() / n;
    }
    let mut gamma = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in a..4 {
            let mut s = KahanSum::new();
            for row in projections {
                s.add((row[a] - means[a]) * (row[b] - means[b]));
            }
            let cov = s.value() / (n - 1.0);
            gamma[a][b] = orders[a] * orders[b] * cov;
            gamma[b][a] = gamma[a][b];
        }
    }
    gamma
}

/// Delta-method asymptotic variance sigma^2 = g' Gamma g with
/// g = grad Psi = (z-t)^{-2} (z-t, -(z-t), -(x-y), x-y) at the components.
/// Sampling noise can push the quadratic form slightly negative; the result
/// is floored at zero with a warning.
pub fn delta_variance(gamma: &GammaEstimate, components: [f64; 4]) -> Result<f64> {
    let [u1, u2, u3, u4] = components;
    let den = u3 - u4;
    let threshold = 1e-12 * u3.abs().max(u4.abs()).max(1.0);
    if den.abs() <= threshold {
        return Err(GmsError::DegenerateVariance { denominator: den.abs(), threshold });
    }
    let num = u1 - u2;
    let g = [1.0 / den, -1.0 / den, -num / (den * den), num / (den * den)];
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += g[a] * gamma.gamma[a][b] * g[b];
        }
    }
    if s < 0.0 {
        log::warn!("delta variance {s:.3e} negative from sampling noise; floored at 0");
    }
    Ok(s.max(0.0))
}

/// Asymptotic normal confidence interval:
/// value ± q_{(1+level)/2} * sigma / sqrt(N).
pub fn confidence_interval(value: f64, sigma: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if !(0.0 < level && level < 1.0) {
        return Err(GmsError::InvalidArgument(format!("level {level} outside (0,1)")));
    }
    if sigma < 0.0 {
        return Err(GmsError::InvalidArgument("sigma must be >= 0".into()));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let q = normal.inverse_cdf(0.5 * (1.0 + level));
    let half = q * sigma / (n as f64).sqrt();
    Ok((value - half, value + half))
}

/// Attach a delta-method sigma and CI to an estimate.
pub fn with_delta_ci(
    mut estimate: IndexEstimate,
    gamma: &GammaEstimate,
    level: f64,
) -> Result<IndexEstimate> {
    let var = delta_variance(gamma, estimate.components)?;
    let sigma = var.sqrt();
    estimate.ci = Some(confidence_interval(estimate.value, sigma, estimate.n, level)?);
    estimate.sigma = Some(sigma);
    estimate.method.ci_method = Some("delta".into());
    estimate.method.level = Some(level);
    Ok(estimate)
}

/// Percentile bootstrap interval over `b` re-estimates on row-resampled
/// samples. Replicates with a degenerate denominator are dropped and
/// counted; more than 20% drops is an error. Deterministic given the seed.
pub fn bootstrap_ci(
    sample: &PairedSample,
    family: &TestFamily,
    b: usize,
    level: f64,
    config: &UStatConfig,
    seed: u64,
) -> Result<(f64, f64)> {
    bootstrap_ci_of(sample, b, level, seed, |resampled, rep_seed| {
        let mut cfg = *config;
        cfg.seed = rep_seed;
        estimate_gms_index(resampled, family, &cfg).map(|e| e.value)
    })
}

/// Bootstrap over an arbitrary estimator of the paired sample; shared by the
/// GMS estimator and the classical baselines.
pub fn bootstrap_ci_of(
    sample: &PairedSample,
    b: usize,
    level: f64,
    seed: u64,
    estimator: impl Fn(&PairedSample, u64) -> Result<f64> + Sync,
) -> Result<(f64, f64)> {
    if b < 50 {
        return Err(GmsError::InvalidArgument("bootstrap needs B >= 50".into()));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(GmsError::InvalidArgument(format!("level {level} outside (0,1)")));
    }
    let n = sample.n();
    let reps: Vec<usize> = (0..b).collect();
    let outcomes: Vec<Result<Option<f64>>> = reps
        .par_iter()
        .map(|&rep| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let rows: Vec<(Point, Point)> =
                (0..n).map(|_| sample.rows[rng.gen_range(0..n)].clone()).collect();
            let resampled = PairedSample { rows, design: sample.design.clone() };
            let rep_seed = seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(rep as u64 + 1));
            match estimator(&resampled, rep_seed) {
                Ok(v) => Ok(Some(v)),
                Err(GmsError::DegenerateVariance { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut estimates = Vec::with_capacity(b);
    let mut dropped = 0usize;
    for o in outcomes {
        match o? {
            Some(v) => estimates.push(v),
            None => dropped += 1,
        }
    }
    if 5 * dropped > b {
        return Err(GmsError::BootstrapDegenerate { dropped, total: b });
    }
    estimates.sort_by(f64::total_cmp);
    let k = estimates.len();
    let alpha = 1.0 - level;
    // nearest-rank percentiles keep the endpoints inside the attained set
    let rank = |q: f64| ((q * k as f64).ceil() as usize).clamp(1, k) - 1;
    Ok((estimates[rank(alpha / 2.0)], estimates[rank(1.0 - alpha / 2.0)]))
}
