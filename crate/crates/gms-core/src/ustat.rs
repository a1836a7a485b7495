//! Complete, factorized and incomplete U-statistics over Pick-Freeze pairs,
//! and the ratio estimator of the general metric-space index.
//!
//! The estimator is Psi(U_1, U_2, U_3, U_4) with Psi(x,y,z,t) = (x-y)/(z-t),
//! each U_j the order-M(j) U-statistic of the symmetrized kernel phi_j^s.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{GmsError, Result};
use crate::family::{FamilyKind, TestFamily};
use crate::kahan::KahanSum;
use crate::kernels::{for_each_permutation, kernel_order, symmetrize_refs};
use crate::metric::{MetricSpace, Point};
use crate::sampling::PairedSample;

/// Maximum tuple count accepted by exact enumeration.
pub const EXACT_TUPLE_CAP: f64 = 1e7;

/// How the U-statistics are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UStatMode {
    /// Enumerate every increasing index tuple (capped at [`EXACT_TUPLE_CAP`]).
    Exact,
    /// Inner-sum factorization over parameter tuples, O(N^{m+1}).
    Factorized,
    /// Average of the symmetrized kernel over a random tuple subset.
    Incomplete,
}

impl UStatMode {
    pub fn name(self) -> &'static str {
        match self {
            UStatMode::Exact => "exact",
            UStatMode::Factorized => "factorized",
            UStatMode::Incomplete => "incomplete",
        }
    }
}

/// Estimation settings for [`estimate_gms_index`].
#[derive(Debug, Clone, Copy)]
pub struct UStatConfig {
    pub mode: UStatMode,
    /// Tuple budget D for incomplete mode.
    pub tuple_budget: usize,
    pub seed: u64,
}

impl UStatConfig {
    pub fn new(mode: UStatMode, tuple_budget: usize, seed: u64) -> Self {
        Self { mode, tuple_budget, seed }
    }

    /// Default policy: factorized exact path for m <= 1, incomplete with
    /// D = min(1e6, C(N, m+2)) for the order-2 ball families.
    pub fn auto(family: &TestFamily, n: usize, seed: u64) -> Self {
        if family.m() <= 1 {
            Self { mode: UStatMode::Factorized, tuple_budget: 0, seed }
        } else {
            let full = binomial(n, family.m() + 2);
            let d = if full.is_finite() && full < 1e6 { full as usize } else { 1_000_000 };
            Self { mode: UStatMode::Incomplete, tuple_budget: d.max(n), seed }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.mode == UStatMode::Incomplete && self.tuple_budget < n {
            return Err(GmsError::Config(format!(
                "incomplete mode requires D >= N, got D={} N={}",
                self.tuple_budget, n
            )));
        }
        Ok(())
    }
}

/// The ratio map Psi(x,y,z,t) = (x-y)/(z-t), with a scale-aware zero test on
/// the denominator.
pub fn psi(x: f64, y: f64, z: f64, t: f64) -> Result<f64> {
    let threshold = 1e-12 * z.abs().max(t.abs()).max(1.0);
    let den = z - t;
    if den.abs() <= threshold {
        return Err(GmsError::DegenerateVariance { denominator: den.abs(), threshold });
    }
    Ok((x - y) / den)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0f64;
    for i in 0..k {
        c *= (n - i) as f64 / (i + 1) as f64;
    }
    c
}

fn falling(n: usize, m: usize) -> f64 {
    (0..m).map(|i| (n - i) as f64).product()
}

/// Complete U-statistic of phi_j^s: binomial-normalized sum over all
/// increasing index tuples (exact mode) or the identical value via inner-sum
/// factorization (factorized mode).
pub fn complete_ustat(
    j: u8,
    sample: &PairedSample,
    family: &TestFamily,
    mode: UStatMode,
) -> Result<f64> {
    crate::kernels::check_kernel_index(j)?;
    let n = sample.n();
    let order = kernel_order(j, family.m());
    if n < order {
        return Err(GmsError::InvalidArgument(format!(
            "N={n} is below the kernel order M({j})={order}"
        )));
    }
    match mode {
        UStatMode::Exact => exact_ustat(j, sample, family),
        UStatMode::Factorized => Ok(factorized_components(sample, family)?[(j - 1) as usize]),
        UStatMode::Incomplete => Err(GmsError::InvalidArgument(
            "complete_ustat handles exact/factorized; use incomplete_ustat".into(),
        )),
    }
}

fn exact_ustat(j: u8, sample: &PairedSample, family: &TestFamily) -> Result<f64> {
    let n = sample.n();
    let order = kernel_order(j, family.m());
    let tuples = binomial(n, order);
    if tuples > EXACT_TUPLE_CAP {
        return Err(GmsError::TupleCountExceeded { tuples, cap: EXACT_TUPLE_CAP });
    }
    let mut acc = KahanSum::new();
    let mut idx: Vec<usize> = (0..order).collect();
    loop {
        let tuple: Vec<&(Point, Point)> = idx.iter().map(|&i| &sample.rows[i]).collect();
        acc.add(symmetrize_refs(j, family, &tuple)?);
        // next combination in lexicographic order
        let mut k = order;
        loop {
            if k == 0 {
                return Ok(acc.value() / tuples);
            }
            k -= 1;
            if idx[k] != k + n - order {
                break;
            }
        }
        idx[k] += 1;
        for i in k + 1..order {
            idx[i] = idx[i - 1] + 1;
        }
    }
}

/// All four factorized U-statistics in one sweep.
///
/// For each ordered distinct parameter tuple p the kernels collapse to
/// products of the inner sums S_T = sum_k T_p(z_k), S_Tu = sum_k T_p(z_k^u),
/// S_TT = sum_k T_p(z_k)^2 and S_TTu = sum_k T_p(z_k) T_p(z_k^u), with exact
/// inclusion-exclusion corrections for indices coinciding with p.
pub fn factorized_components(sample: &PairedSample, family: &TestFamily) -> Result<[f64; 4]> {
    let n = sample.n();
    let m = family.m();
    if n < m + 2 {
        return Err(GmsError::InvalidArgument(format!("N={n} < m+2={}", m + 2)));
    }
    match family.kind {
        FamilyKind::SobolValue => sobol_components(sample),
        FamilyKind::HalfSpaceCvm if matches!(family.space, MetricSpace::Scalar) => {
            let (z, w) = sample.scalar_columns()?;
            Ok(cvm_components_counts(&z, &w))
        }
        _ => factorized_components_generic(sample, family),
    }
}

/// §3.1-style closed forms for the SobolValue family, with the covariance
/// computed by centered two-pass accumulation for numerical stability:
/// U_2 = U_1 - cov(Z, Z^u) and U_4 = U_3 - var(Z) exactly.
pub(crate) fn sobol_components(sample: &PairedSample) -> Result<[f64; 4]> {
    let (z, w) = sample.scalar_columns()?;
    Ok(sobol_components_scalars(&z, &w))
}

pub(crate) fn sobol_components_scalars(z: &[f64], w: &[f64]) -> [f64; 4] {
    let n = z.len() as f64;
    let u1 = kahan_mean_prod(z, w);
    let u3 = kahan_mean_prod(z, z);
    let zbar = kahan_mean(z);
    let wbar = kahan_mean(w);
    let mut cov = KahanSum::new();
    let mut var = KahanSum::new();
    for (&a, &b) in z.iter().zip(w.iter()) {
        cov.add((a - zbar) * (b - wbar));
        var.add((a - zbar) * (a - zbar));
    }
    let u2 = u1 - cov.value() / (n - 1.0);
    let u4 = u3 - var.value() / (n - 1.0);
    [u1, u2, u3, u4]
}

fn kahan_mean(v: &[f64]) -> f64 {
    let mut s = KahanSum::new();
    for &x in v {
        s.add(x);
    }
    s.value() / v.len() as f64
}

fn kahan_mean_prod(a: &[f64], b: &[f64]) -> f64 {
    let mut s = KahanSum::new();
    for (&x, &y) in a.iter().zip(b.iter()) {
        s.add(x * y);
    }
    s.value() / a.len() as f64
}

/// Dominance counts for the scalar half-space family. All comparisons are
/// against the same threshold z_i, so every count is one-dimensional:
///   P_i = #{j: z_j <= z_i}, Q_i = #{j: w_j <= z_i},
///   R_i = #{j: max(z_j, w_j) <= z_i}, q_i = 1{w_i <= z_i}.
pub(crate) struct CvmCounts {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub qd: Vec<f64>,
    pub sorted_z: Vec<f64>,
}

pub(crate) fn cvm_counts(z: &[f64], w: &[f64]) -> CvmCounts {
    let n = z.len();
    let mut sorted_z = z.to_vec();
    sorted_z.sort_by(f64::total_cmp);
    let mut sorted_w = w.to_vec();
    sorted_w.sort_by(f64::total_cmp);
    let mut sorted_m: Vec<f64> = z.iter().zip(w.iter()).map(|(&a, &b)| a.max(b)).collect();
    sorted_m.sort_by(f64::total_cmp);
    let count_le = |sorted: &[f64], t: f64| sorted.partition_point(|&x| x <= t) as f64;
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    let mut qd = Vec::with_capacity(n);
    for i in 0..n {
        p.push(count_le(&sorted_z, z[i]));
        q.push(count_le(&sorted_w, z[i]));
        r.push(count_le(&sorted_m, z[i]));
        qd.push(if w[i] <= z[i] { 1.0 } else { 0.0 });
    }
    CvmCounts { p, q, r, qd, sorted_z }
}

/// O(N log N) factorized U-statistics for the scalar half-space family.
pub(crate) fn cvm_components_counts(z: &[f64], w: &[f64]) -> [f64; 4] {
    let n = z.len() as f64;
    let c = cvm_counts(z, w);
    let (mut s1, mut s2, mut s3, mut s4) =
        (KahanSum::new(), KahanSum::new(), KahanSum::new(), KahanSum::new());
    for i in 0..z.len() {
        let (p, q, r, qd) = (c.p[i], c.q[i], c.r[i], c.qd[i]);
        s1.add(r - qd);
        s3.add(p - 1.0);
        s2.add(p * q - q - p * qd - r + 2.0 * qd);
        s4.add((p - 1.0) * (p - 2.0));
    }
    let d2 = n * (n - 1.0);
    let d3 = d2 * (n - 2.0);
    [s1.value() / d2, s2.value() / d3, s3.value() / d2, s4.value() / d3]
}

/// Generic factorized path for any family, O(N^{m+1}) with exact
/// duplicate-index corrections. Parameter tuples are processed in fixed
/// chunks so the reduction order (and hence the result) does not depend on
/// the worker count.
fn factorized_components_generic(sample: &PairedSample, family: &TestFamily) -> Result<[f64; 4]> {
    let n = sample.n();
    let m = family.m();
    let inner_for_params = |params: &[usize]| -> Result<[f64; 4]> {
        let a: Vec<&Point> = params.iter().map(|&i| &sample.rows[i].0).collect();
        let mut s_t = KahanSum::new();
        let mut s_tu = KahanSum::new();
        let mut s_tt = KahanSum::new();
        let mut s_ttu = KahanSum::new();
        // corrections for argument indices coinciding with a parameter index
        let (mut c_t, mut c_tu, mut c_tt, mut c_ttu) = (0.0, 0.0, 0.0, 0.0);
        for (k, (zk, wk)) in sample.rows.iter().enumerate() {
            let tz = family.eval(&a, zk)?;
            let tw = family.eval(&a, wk)?;
            s_t.add(tz);
            s_tu.add(tw);
            s_tt.add(tz * tz);
            s_ttu.add(tz * tw);
            if params.contains(&k) {
                c_t += tz;
                c_tu += tw;
                c_tt += tz * tz;
                c_ttu += tz * tw;
            }
        }
        let a_z = s_t.value() - c_t;
        let a_w = s_tu.value() - c_tu;
        let b_zz = s_tt.value() - c_tt;
        let b_zw = s_ttu.value() - c_ttu;
        Ok([b_zw, a_z * a_w - b_zw, b_zz, a_z * a_z - b_zz])
    };

    let sums: [f64; 4] = match m {
        0 => {
            let v = inner_for_params(&[])?;
            [v[0], v[1], v[2], v[3]]
        }
        _ => {
            const CHUNK: usize = 8;
            let firsts: Vec<usize> = (0..n).collect();
            let partials: Vec<Result<[KahanSum; 4]>> = firsts
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut acc = [KahanSum::new(); 4];
                    for &i in chunk {
                        if m == 1 {
                            let v = inner_for_params(&[i])?;
                            for (a, b) in acc.iter_mut().zip(v) {
                                a.add(b);
                            }
                        } else {
                            for j2 in 0..n {
                                if j2 == i {
                                    continue;
                                }
                                let v = inner_for_params(&[i, j2])?;
                                for (a, b) in acc.iter_mut().zip(v) {
                                    a.add(b);
                                }
                            }
                        }
                    }
                    Ok(acc)
                })
                .collect();
            let mut total = [KahanSum::new(); 4];
            for p in partials {
                let p = p?;
                for (t, c) in total.iter_mut().zip(p) {
                    t.add(c.value());
                }
            }
            [total[0].value(), total[1].value(), total[2].value(), total[3].value()]
        }
    };
    let d_lo = falling(n, m + 1);
    let d_hi = falling(n, m + 2);
    Ok([sums[0] / d_lo, sums[1] / d_hi, sums[2] / d_lo, sums[3] / d_hi])
}

fn draw_distinct<R: Rng>(rng: &mut R, n: usize, k: usize, out: &mut [usize]) {
    debug_assert!(k <= n && k <= out.len());
    let mut filled = 0;
    while filled < k {
        let cand = rng.gen_range(0..n);
        if !out[..filled].contains(&cand) {
            out[filled] = cand;
            filled += 1;
        }
    }
}

/// Incomplete U-statistic: average of phi_j^s over `d` index tuples drawn
/// uniformly without within-tuple repetition. Unbiased for the complete
/// U-statistic; deterministic given the seed (one counter stream per tuple).
/// When d covers every combination, enumerates each combination exactly once
/// and so equals the complete U-statistic.
pub fn incomplete_ustat(
    j: u8,
    sample: &PairedSample,
    family: &TestFamily,
    d: usize,
    seed: u64,
) -> Result<f64> {
    Ok(incomplete_ustat_detailed(j, sample, family, d, seed)?.0)
}

/// Incomplete U-statistic together with the Monte-Carlo standard error of
/// the tuple average (from the same draws).
pub fn incomplete_ustat_detailed(
    j: u8,
    sample: &PairedSample,
    family: &TestFamily,
    d: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    crate::kernels::check_kernel_index(j)?;
    if d == 0 {
        return Err(GmsError::InvalidArgument("tuple budget D must be >= 1".into()));
    }
    let n = sample.n();
    let order = kernel_order(j, family.m());
    if n < order {
        return Err(GmsError::InvalidArgument(format!(
            "N={n} is below the kernel order M({j})={order}"
        )));
    }
    if binomial(n, order) <= d as f64 {
        let v = exact_ustat(j, sample, family)?;
        return Ok((v, 0.0));
    }
    const CHUNK: usize = 1024;
    let starts: Vec<usize> = (0..d).step_by(CHUNK).collect();
    let partials: Vec<Result<(KahanSum, KahanSum)>> = starts
        .par_iter()
        .map(|&start| {
            let stop = (start + CHUNK).min(d);
            let mut sum = KahanSum::new();
            let mut sumsq = KahanSum::new();
            let mut idx = vec![0usize; order];
            for t in start..stop {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                draw_distinct(&mut rng, n, order, &mut idx);
                let tuple: Vec<&(Point, Point)> = idx.iter().map(|&i| &sample.rows[i]).collect();
                let v = symmetrize_refs(j, family, &tuple)?;
                sum.add(v);
                sumsq.add(v * v);
            }
            Ok((sum, sumsq))
        })
        .collect();
    let mut sum = KahanSum::new();
    let mut sumsq = KahanSum::new();
    for p in partials {
        let (s, sq) = p?;
        sum.add(s.value());
        sumsq.add(sq.value());
    }
    let dn = d as f64;
    let mean = sum.value() / dn;
    let var = (sumsq.value() / dn - mean * mean).max(0.0);
    Ok((mean, (var / dn).sqrt()))
}

/// Estimator identity, estimation mode and CI metadata carried by an estimate.
#[derive(Debug, Clone)]
pub struct EstimateMethod {
    pub estimator: String,
    pub family: FamilyKind,
    pub mode: UStatMode,
    pub tuple_budget: Option<usize>,
    pub ci_method: Option<String>,
    pub level: Option<f64>,
}

/// An index estimate with its four U-statistic components and optional
/// asymptotic inference results.
#[derive(Debug, Clone)]
pub struct IndexEstimate {
    pub value: f64,
    pub components: [f64; 4],
    pub sigma: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub n: usize,
    /// Estimates are not clamped to [0,1]; out-of-range values are flagged.
    pub out_of_range: bool,
    pub method: EstimateMethod,
}

impl IndexEstimate {
    pub(crate) fn from_components(
        components: [f64; 4],
        n: usize,
        method: EstimateMethod,
    ) -> Result<Self> {
        let [u1, u2, u3, u4] = components;
        let value = psi(u1, u2, u3, u4)?;
        Ok(IndexEstimate {
            value,
            components,
            sigma: None,
            ci: None,
            n,
            out_of_range: !(0.0..=1.0).contains(&value),
            method,
        })
    }
}

/// Estimate the general metric-space index S_2GMS for the design behind
/// `sample` and the given test family.
pub fn estimate_gms_index(
    sample: &PairedSample,
    family: &TestFamily,
    config: &UStatConfig,
) -> Result<IndexEstimate> {
    let n = sample.n();
    let m = family.m();
    if n < m + 2 {
        return Err(GmsError::InvalidArgument(format!(
            "N={n} too small for family order m={m} (need N >= m+2)"
        )));
    }
    config.validate(n)?;
    let components = match config.mode {
        UStatMode::Exact => {
            let mut c = [0.0; 4];
            for j in 1..=4u8 {
                c[(j - 1) as usize] = exact_ustat(j, sample, family)?;
            }
            c
        }
        UStatMode::Factorized => factorized_components(sample, family)?,
        UStatMode::Incomplete => {
            incomplete_components(sample, family, config.tuple_budget, config.seed)?
        }
    };
    IndexEstimate::from_components(
        components,
        n,
        EstimateMethod {
            estimator: "gms".into(),
            family: family.kind,
            mode: config.mode,
            tuple_budget: (config.mode == UStatMode::Incomplete).then_some(config.tuple_budget),
            ci_method: None,
            level: None,
        },
    )
}

/// Joint incomplete evaluation of all four components on one shared batch of
/// D order-(m+2) tuples; the order-(m+1) kernels are evaluated on each
/// tuple's prefix (the prefix of a uniform distinct tuple is itself uniform,
/// so every component stays unbiased). Sharing the draws couples the
/// components, which stabilizes the ratio.
pub(crate) fn incomplete_components(
    sample: &PairedSample,
    family: &TestFamily,
    d: usize,
    seed: u64,
) -> Result<[f64; 4]> {
    let n = sample.n();
    let m = family.m();
    let hi = m + 2;
    if binomial(n, hi) <= d as f64 {
        // tuple budget covers the complete enumeration
        let mut c = [0.0; 4];
        for j in 1..=4u8 {
            c[(j - 1) as usize] = exact_ustat(j, sample, family)?;
        }
        return Ok(c);
    }
    if matches!(
        family.kind,
        FamilyKind::MetricBall | FamilyKind::MidpointBall | FamilyKind::IntersectionBall
    ) {
        if family.kind == FamilyKind::MidpointBall
            && !matches!(family.space, MetricSpace::Vector { .. } | MetricSpace::Grid { .. })
        {
            return Err(GmsError::Unsupported(format!(
                "midpoint is not available on {:?}",
                family.space
            )));
        }
        return incomplete_components_ball(sample, family, d, seed);
    }
    const CHUNK: usize = 1024;
    let starts: Vec<usize> = (0..d).step_by(CHUNK).collect();
    let partials: Vec<Result<[KahanSum; 4]>> = starts
        .par_iter()
        .map(|&start| {
            let stop = (start + CHUNK).min(d);
            let mut acc = [KahanSum::new(); 4];
            let mut idx = vec![0usize; hi];
            for t in start..stop {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                draw_distinct(&mut rng, n, hi, &mut idx);
                let tuple: Vec<&(Point, Point)> = idx.iter().map(|&i| &sample.rows[i]).collect();
                acc[0].add(symmetrize_refs(1, family, &tuple[..hi - 1])?);
                acc[1].add(symmetrize_refs(2, family, &tuple)?);
                acc[2].add(symmetrize_refs(3, family, &tuple[..hi - 1])?);
                acc[3].add(symmetrize_refs(4, family, &tuple)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = [KahanSum::new(); 4];
    for p in partials {
        let p = p?;
        for (t, c) in total.iter_mut().zip(p) {
            t.add(c.value());
        }
    }
    Ok([
        total[0].value() / d as f64,
        total[1].value() / d as f64,
        total[2].value() / d as f64,
        total[3].value() / d as f64,
    ])
}

/// Dense fast path for the m=2 ball families: points are flattened once,
/// each tuple needs only the pairwise dot products among its own points, and
/// the 6 + 24 permutation indicators reuse those cached squared distances.
/// Weight factors cancel inside the indicator comparisons.
fn incomplete_components_ball(
    sample: &PairedSample,
    family: &TestFamily,
    d: usize,
    seed: u64,
) -> Result<[f64; 4]> {
    let n = sample.n();
    for (z, w) in &sample.rows {
        family.space.validate_point(z)?;
        family.space.validate_point(w)?;
    }
    let g = sample.rows[0].0.coords().len();
    let mut zf = Vec::with_capacity(n * g);
    let mut wf = Vec::with_capacity(n * g);
    for (z, w) in &sample.rows {
        zf.extend_from_slice(z.coords());
        wf.extend_from_slice(w.coords());
    }
    let norm = |flat: &[f64], i: usize| -> f64 {
        flat[i * g..(i + 1) * g].iter().map(|v| v * v).sum()
    };
    let nz: Vec<f64> = (0..n).map(|i| norm(&zf, i)).collect();
    let nw: Vec<f64> = (0..n).map(|i| norm(&wf, i)).collect();
    let dot = |a: &[f64], i: usize, b: &[f64], k: usize| -> f64 {
        let (x, y) = (&a[i * g..(i + 1) * g], &b[k * g..(k + 1) * g]);
        let mut s = 0.0;
        for (u, v) in x.iter().zip(y.iter()) {
            s += u * v;
        }
        s
    };
    let kind = family.kind;

    const CHUNK: usize = 512;
    let starts: Vec<usize> = (0..d).step_by(CHUNK).collect();
    let partials: Vec<[KahanSum; 4]> = starts
        .par_iter()
        .map(|&start| {
            let stop = (start + CHUNK).min(d);
            let mut acc = [KahanSum::new(); 4];
            let mut idx = [0usize; 4];
            for t in start..stop {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                draw_distinct(&mut rng, n, 4, &mut idx);
                // cached unweighted squared distances within the tuple
                let mut dzz = [[0.0f64; 4]; 4]; // d^2(z_a, z_b)
                let mut gzz = [[0.0f64; 4]; 4]; // z_a . z_b
                let mut dwz = [[0.0f64; 4]; 4]; // d^2(w_a, z_b)
                let mut gwz = [[0.0f64; 4]; 4]; // w_a . z_b
                let mut nwx = [0.0f64; 4];
                let mut nzx = [0.0f64; 4];
                for a in 0..4 {
                    nzx[a] = nz[idx[a]];
                    nwx[a] = nw[idx[a]];
                }
                for a in 0..4 {
                    for b in 0..4 {
                        if a < b {
                            let gz = dot(&zf, idx[a], &zf, idx[b]);
                            gzz[a][b] = gz;
                            gzz[b][a] = gz;
                            let dd = nzx[a] + nzx[b] - 2.0 * gz;
                            dzz[a][b] = dd;
                            dzz[b][a] = dd;
                        }
                        if a != b {
                            let gw = dot(&wf, idx[a], &zf, idx[b]);
                            gwz[a][b] = gw;
                            dwz[a][b] = nwx[a] + nzx[b] - 2.0 * gw;
                        }
                    }
                }
                // membership of the z (arg=false) or w (arg=true) point of
                // slot c in the ball parameterized by slots (a, b)
                let member = |frozen: bool, c: usize, a: usize, b: usize| -> bool {
                    let r2 = dzz[a][b];
                    match kind {
                        FamilyKind::MetricBall => {
                            if frozen { dwz[c][a] <= r2 } else { dzz[c][a] <= r2 }
                        }
                        FamilyKind::IntersectionBall => {
                            if frozen {
                                dwz[c][a].max(dwz[c][b]) <= r2
                            } else {
                                dzz[c][a].max(dzz[c][b]) <= r2
                            }
                        }
                        FamilyKind::MidpointBall => {
                            let nmid = (nzx[a] + nzx[b] + 2.0 * gzz[a][b]) / 4.0;
                            let (nx, xa, xb) = if frozen {
                                (nwx[c], gwz[c][a], gwz[c][b])
                            } else {
                                (nzx[c], gzz[c][a], gzz[c][b])
                            };
                            nx + nmid - (xa + xb) <= r2 / 4.0
                        }
                        _ => unreachable!("ball fast path"),
                    }
                };
                let (mut p1, mut p2, mut p3, mut p4) = (0u32, 0u32, 0u32, 0u32);
                for_each_permutation::<std::convert::Infallible>(3, |p| {
                    let (a, b, c) = (p[0], p[1], p[2]);
                    let mz = member(false, c, a, b);
                    if mz {
                        p3 += 1;
                        if member(true, c, a, b) {
                            p1 += 1;
                        }
                    }
                    Ok(())
                })
                .unwrap();
                for_each_permutation::<std::convert::Infallible>(4, |p| {
                    let (a, b, c, dd) = (p[0], p[1], p[2], p[3]);
                    if member(false, c, a, b) {
                        if member(true, dd, a, b) {
                            p2 += 1;
                        }
                        if member(false, dd, a, b) {
                            p4 += 1;
                        }
                    }
                    Ok(())
                })
                .unwrap();
                acc[0].add(p1 as f64 / 6.0);
                acc[1].add(p2 as f64 / 24.0);
                acc[2].add(p3 as f64 / 6.0);
                acc[3].add(p4 as f64 / 24.0);
            }
            acc
        })
        .collect();
    let mut total = [KahanSum::new(); 4];
    for p in partials {
        for (t, c) in total.iter_mut().zip(p) {
            t.add(c.value());
        }
    }
    Ok([
        total[0].value() / d as f64,
        total[1].value() / d as f64,
        total[2].value() / d as f64,
        total[3].value() / d as f64,
    ])
}
