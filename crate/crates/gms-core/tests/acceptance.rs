//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Criteria 1, 3 and 6 encode targets that the underlying model/reference
//! combination cannot meet (heavy-tailed toy Sobol asymptotics; source-table
//! orderings that are not properties of the pinned estimator). They are
//! implemented exactly as stated and report their honest counts.

mod common;

use std::sync::Arc;

use common::*;
use gms_core::baselines::{sobol_pf_efficient_with_sigma, sobol_pf_with_sigma};
use gms_core::diagnostics::{fit_line, kolmogorov_pvalue, ks_statistic, normal_cdf};
use gms_core::family::{FamilyKind, TestFamily};
use gms_core::inference::{confidence_interval, estimate_gamma, with_delta_ci};
use gms_core::metric::{GridSpec, MetricSpace, Point};
use gms_core::models::{builtin_model, lognormal_true_sobol, ubiquitous_maps_shared, EstimatorKind};
use gms_core::sampling::{pick_freeze, InputDist, InputModel, SubsetU};
use gms_core::ustat::{
    complete_ustat, estimate_gms_index, incomplete_ustat_detailed, UStatConfig, UStatMode,
};

fn toy() -> InputModel {
    builtin_model("lognormal_toy", None, None).unwrap().model
}

fn sobol_family() -> TestFamily {
    TestFamily::new(FamilyKind::SobolValue, MetricSpace::Scalar).unwrap()
}

fn cvm_family() -> TestFamily {
    TestFamily::new(FamilyKind::HalfSpaceCvm, MetricSpace::Scalar).unwrap()
}

struct Verdict {
    criterion: u8,
    pass: bool,
    detail: String,
}

impl Verdict {
    fn report(self) {
        println!(
            "criterion {}: {} — {}",
            self.criterion,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail
        );
        assert!(self.pass, "criterion {} failed: {}", self.criterion, self.detail);
    }
}

/// Criterion 1: toy-model Sobol recovery and CI coverage at N = 1e5 for the
/// GMS estimator and both classical baselines, 100 seeded replications.
#[test]
fn criterion_1_toy_sobol_recovery() {
    let model = toy();
    let fam = sobol_family();
    let n = 100_000;
    let reps = 100u64;
    let level = 0.95;
    let cases = [(1usize, 0.011794, 0.01), (2usize, 0.373824, 0.02)];
    // success counts per (subset, estimator)
    let mut counts = [[0u32; 3]; 2];
    for rep in 0..reps {
        for (ci_case, &(idx, reference, tol)) in cases.iter().enumerate() {
            let u = SubsetU::new(&[idx], 2).unwrap();
            let seed = 0xA100 + 7 * rep + idx as u64;
            let sample = pick_freeze(&model, &u, n, seed).unwrap();
            let cfg = UStatConfig::new(UStatMode::Factorized, 0, seed);
            let est = estimate_gms_index(&sample, &fam, &cfg).unwrap();
            let gamma = estimate_gamma(&sample, &fam, 200, seed).unwrap();
            let est = with_delta_ci(est, &gamma, level).unwrap();
            let (lo, hi) = est.ci.unwrap();
            let ok_gms = (est.value - reference).abs() <= tol && lo <= reference && reference <= hi;
            let (pf, pf_sigma) = sobol_pf_with_sigma(&sample).unwrap();
            let (plo, phi_) = confidence_interval(pf, pf_sigma, n, level).unwrap();
            let ok_pf = (pf - reference).abs() <= tol && plo <= reference && reference <= phi_;
            let (pfe, pfe_sigma) = sobol_pf_efficient_with_sigma(&sample).unwrap();
            let (elo, ehi) = confidence_interval(pfe, pfe_sigma, n, level).unwrap();
            let ok_pfe = (pfe - reference).abs() <= tol && elo <= reference && reference <= ehi;
            for (k, ok) in [ok_gms, ok_pf, ok_pfe].into_iter().enumerate() {
                if ok {
                    counts[ci_case][k] += 1;
                }
            }
        }
    }
    let names = ["gms", "pf", "pf_efficient"];
    let mut detail = String::new();
    let mut pass = true;
    for (ci_case, &(idx, ..)) in cases.iter().enumerate() {
        for (k, name) in names.iter().enumerate() {
            detail.push_str(&format!("S{idx}/{name}={}/100 ", counts[ci_case][k]));
            pass &= counts[ci_case][k] >= 90;
        }
    }
    Verdict { criterion: 1, pass, detail }.report();
}

/// Criterion 2: toy-model Cramér–von-Mises indices at N = 1e4, factorized
/// exact mode; estimates within ±0.03 and delta-CI coverage in [0.90, 0.99].
#[test]
fn criterion_2_toy_cvm_recovery() {
    let model = toy();
    let fam = cvm_family();
    let n = 10_000;
    let reps = 100u64;
    let cases = [(1usize, 0.114508), (2usize, 0.569296)];
    let mut within = [0u32; 2];
    let mut cover = [0u32; 2];
    for rep in 0..reps {
        for (k, &(idx, reference)) in cases.iter().enumerate() {
            let u = SubsetU::new(&[idx], 2).unwrap();
            let seed = 0xB200 + 11 * rep + idx as u64;
            let sample = pick_freeze(&model, &u, n, seed).unwrap();
            let cfg = UStatConfig::new(UStatMode::Factorized, 0, seed);
            let est = estimate_gms_index(&sample, &fam, &cfg).unwrap();
            let gamma = estimate_gamma(&sample, &fam, 200, seed).unwrap();
            let est = with_delta_ci(est, &gamma, 0.95).unwrap();
            if (est.value - reference).abs() <= 0.03 {
                within[k] += 1;
            }
            let (lo, hi) = est.ci.unwrap();
            if lo <= reference && reference <= hi {
                cover[k] += 1;
            }
        }
    }
    let pass = within.iter().all(|&w| w == reps as u32)
        && cover.iter().all(|&c| (90..=99).contains(&c));
    let detail = format!(
        "within ±0.03: S1_CvM {}/100, S2_CvM {}/100; coverage {}/100, {}/100",
        within[0], within[1], cover[0], cover[1]
    );
    Verdict { criterion: 2, pass, detail }.report();
}

/// Criterion 3: CLT property for the Sobol u={2} toy estimate — KS test of
/// the standardized errors at N = 2000 over 200 replications, and the
/// log-error regression slope over budgets 1e3..1e6.
#[test]
fn criterion_3_clt_property() {
    let model = toy();
    let fam = sobol_family();
    let u = SubsetU::new(&[2], 2).unwrap();
    let (_, true_s2) = lognormal_true_sobol();

    // standardized errors
    let n = 2000;
    let mut std_errors = Vec::with_capacity(200);
    for rep in 0..200u64 {
        let seed = 0xC300 + rep;
        let sample = pick_freeze(&model, &u, n, seed).unwrap();
        let cfg = UStatConfig::new(UStatMode::Factorized, 0, seed);
        let est = estimate_gms_index(&sample, &fam, &cfg).unwrap();
        let gamma = estimate_gamma(&sample, &fam, 200, seed).unwrap();
        let est = with_delta_ci(est, &gamma, 0.95).unwrap();
        let sigma = est.sigma.unwrap();
        if sigma > 0.0 {
            std_errors.push((n as f64).sqrt() * (est.value - true_s2) / sigma);
        }
    }
    let d = ks_statistic(&std_errors, normal_cdf).unwrap();
    let p = kolmogorov_pvalue(d, std_errors.len() as f64);
    let ks_ok = p >= 0.01;

    // convergence slope: budgets n, shared-design sizes N = n/(p+1)
    let budgets = [1_000usize, 10_000, 100_000, 1_000_000];
    let reps = 100u64;
    let mut log_n = Vec::new();
    let mut log_err = Vec::new();
    for &budget in &budgets {
        let nn = budget / 3;
        let mut acc = 0.0;
        for rep in 0..reps {
            let seed = 0xD400 + 13 * rep + budget as u64;
            let sample = pick_freeze(&model, &u, nn, seed).unwrap();
            let cfg = UStatConfig::new(UStatMode::Factorized, 0, seed);
            let est = estimate_gms_index(&sample, &fam, &cfg).unwrap();
            acc += (est.value - true_s2).abs();
        }
        log_n.push((nn as f64).ln());
        log_err.push((acc / reps as f64).ln());
    }
    let (slope, _) = fit_line(&log_n, &log_err).unwrap();
    let slope_ok = (-0.6..=-0.4).contains(&slope);

    let pass = ks_ok && slope_ok;
    let detail = format!(
        "KS D={d:.4} p={p:.3e} (need p>=0.01); slope={slope:.3} (need -0.5±0.1)"
    );
    Verdict { criterion: 3, pass, detail }.report();
}

/// Criterion 4: oracle equivalence for N in 5..8 and m in {0,1,2}: exact,
/// factorized and brute force agree to 1e-12; incomplete within 3 SE.
#[test]
fn criterion_4_oracle_equivalence() {
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for case in oracle_cases() {
        for n in 5..=8usize {
            let rows = synthetic_rows(n, case.dim, 0.21 * n as f64);
            let sample = to_sample(&rows, case.scalar);
            for j in 1..=4u8 {
                let oracle = brute_force_ustat(j, case.m, &*case.t, &rows);
                let exact = complete_ustat(j, &sample, &case.family, UStatMode::Exact).unwrap();
                let fac =
                    complete_ustat(j, &sample, &case.family, UStatMode::Factorized).unwrap();
                worst = worst.max((oracle - exact).abs()).max((fac - exact).abs());
                pass &= (oracle - exact).abs() <= 1e-12 && (fac - exact).abs() <= 1e-12;
                if n == 8 {
                    let d = 24usize;
                    let (inc, _) =
                        incomplete_ustat_detailed(j, &sample, &case.family, d, 99).unwrap();
                    let (_, tuple_var) = brute_force_tuple_moments(j, case.m, &*case.t, &rows);
                    let se = (tuple_var / d as f64).sqrt();
                    pass &= (inc - exact).abs() <= 3.0 * se + 1e-12;
                }
            }
        }
    }
    let detail = format!("max |exact - oracle| and |factorized - exact| = {worst:.2e}");
    Verdict { criterion: 4, pass, detail }.report();
}

/// Criterion 5: algebraic identities — §3.1 closed-form components,
/// column-swap symmetry of the efficient baseline, frozen-everything design.
#[test]
fn criterion_5_algebraic_identities() {
    let mut pass = true;
    let mut notes = Vec::new();

    // GMS-Sobol components vs directly-summed closed forms (plain arithmetic)
    let model = toy();
    let u = SubsetU::new(&[1], 2).unwrap();
    let sample = pick_freeze(&model, &u, 4000, 0xE501).unwrap();
    let (z, w) = sample.scalar_columns().unwrap();
    // tame the magnitudes so that 1e-12 relative comparisons are meaningful
    let (z, w): (Vec<f64>, Vec<f64>) =
        (z.iter().map(|v| v.ln()).collect(), w.iter().map(|v| v.ln()).collect());
    let tamed = gms_core::sampling::PairedSample::from_scalar_pairs(
        &z.iter().copied().zip(w.iter().copied()).collect::<Vec<_>>(),
        0,
    );
    let est = estimate_gms_index(
        &tamed,
        &sobol_family(),
        &UStatConfig::new(UStatMode::Factorized, 0, 0),
    )
    .unwrap();
    let nf = z.len() as f64;
    let sz: f64 = z.iter().sum();
    let sw: f64 = w.iter().sum();
    let szw: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
    let szz: f64 = z.iter().map(|a| a * a).sum();
    let closed = [
        szw / nf,
        (sz * sw - szw) / (nf * (nf - 1.0)),
        szz / nf,
        (sz * sz - szz) / (nf * (nf - 1.0)),
    ];
    let mut worst: f64 = 0.0;
    for (got, want) in est.components.iter().zip(closed.iter()) {
        let rel = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(rel);
        pass &= rel <= 1e-12;
    }
    notes.push(format!("components vs closed forms: rel {worst:.2e}"));

    // column-swap symmetry of the efficient baseline
    let swapped = gms_core::sampling::PairedSample::from_scalar_pairs(
        &w.iter().copied().zip(z.iter().copied()).collect::<Vec<_>>(),
        0,
    );
    let (v1, _) = sobol_pf_efficient_with_sigma(&tamed).unwrap();
    let (v2, _) = sobol_pf_efficient_with_sigma(&swapped).unwrap();
    pass &= (v1 - v2).abs() <= 1e-12;
    notes.push(format!("column swap |Δ| = {:.2e}", (v1 - v2).abs()));

    // frozen-everything design: Z_i = Z_i^u bitwise and index exactly 1
    let full = SubsetU::full(2).unwrap();
    let fs = pick_freeze(&model, &full, 500, 0xE502).unwrap();
    let bitwise = fs.rows.iter().all(|(a, b)| a == b);
    let est_full = estimate_gms_index(
        &fs,
        &sobol_family(),
        &UStatConfig::new(UStatMode::Factorized, 0, 0),
    )
    .unwrap();
    pass &= bitwise && est_full.value == 1.0;
    notes.push(format!("frozen-everything bitwise={bitwise} index={}", est_full.value));

    Verdict { criterion: 5, pass, detail: notes.join("; ") }.report();
}

/// Criterion 6: plume qualitative replication at H in {1, 20}, N = 5000,
/// MetricBall family, D = 1e6 incomplete tuples (grid 8x16; the criterion
/// pins family, N, D and H but not the grid — the estimates agree with the
/// 16x32 and 64x128 grids to ~1e-3 and the orderings are grid-insensitive).
/// Early exit once the >= 80/100 bound is decided.
#[test]
fn criterion_6_plume_qualitative() {
    let grid = GridSpec::new(0.1, 10.0, -10.0, 10.0, 8, 16).unwrap();
    let n = 5000;
    let d = 1_000_000;
    let reps = 100u64;
    let need = 80u32;
    let names = ["K", "Q", "u"]; // subset {2} is K, {1} is Q, {3} is u_wind
    let subsets = [2usize, 1, 3];
    let mut successes = 0u32;
    let mut done = 0u32;
    let mut first_fail = String::new();
    for rep in 0..reps {
        let mut idx_h: [[f64; 3]; 2] = [[0.0; 3]; 2];
        for (hi, h) in [1.0f64, 20.0].into_iter().enumerate() {
            let am = builtin_model("plume_h", Some(h), Some(grid)).unwrap();
            let fam = TestFamily::new(FamilyKind::MetricBall, MetricSpace::Grid { spec: grid })
                .unwrap();
            for (k, &su) in subsets.iter().enumerate() {
                let u = SubsetU::new(&[su], 3).unwrap();
                let seed = 0xF600 + 1000 * rep + 10 * hi as u64 + su as u64;
                let sample = pick_freeze(&am.model, &u, n, seed).unwrap();
                let cfg = UStatConfig::new(UStatMode::Incomplete, d, seed);
                let est = estimate_gms_index(&sample, &fam, &cfg).unwrap();
                idx_h[hi][k] = est.value;
            }
        }
        let k_largest = idx_h[1][0] > idx_h[1][1] && idx_h[1][0] > idx_h[1][2];
        let monotone = (0..3).all(|k| idx_h[1][k] < idx_h[0][k]);
        if k_largest && monotone {
            successes += 1;
        } else if first_fail.is_empty() {
            first_fail = format!(
                "rep {rep}: H=1 ({names:?}) = {:?}, H=20 = {:?}, K-largest={k_largest}, monotone={monotone}",
                idx_h[0], idx_h[1]
            );
        }
        done += 1;
        // mathematically decided either way?
        if successes >= need || successes + (reps as u32 - done) < need {
            break;
        }
    }
    let decided_pass = successes >= need;
    let detail = format!(
        "{successes}/{done} replications satisfied the orderings (need >= {need}/100). {first_fail}"
    );
    Verdict { criterion: 6, pass: decided_pass, detail }.report();
}

/// Criterion 7: the 2N call-count contract per (u, gms) design, and that
/// estimation itself never calls the evaluator.
#[test]
fn criterion_7_call_count_contract() {
    let model = toy();
    model.reset_call_count();
    let n = 777;
    let mut pass = true;
    let mut total = 0u64;
    for idx in [1usize, 2] {
        let u = SubsetU::new(&[idx], 2).unwrap();
        let before = model.call_count();
        let sample = pick_freeze(&model, &u, n, 3 + idx as u64).unwrap();
        let after_design = model.call_count();
        pass &= after_design - before == 2 * n as u64;
        pass &= sample.design.calls == 2 * n as u64;
        // estimation consumes no further model evaluations
        let fam = sobol_family();
        let est =
            estimate_gms_index(&sample, &fam, &UStatConfig::new(UStatMode::Factorized, 0, 0))
                .unwrap();
        let gamma = estimate_gamma(&sample, &fam, 200, 0).unwrap();
        let _ = with_delta_ci(est, &gamma, 0.95).unwrap();
        let _ = sobol_pf_with_sigma(&sample).unwrap();
        pass &= model.call_count() == after_design;
        total = model.call_count();
    }
    let detail = format!("2 designs, N={n}: {total} calls total (expected {})", 4 * n);
    pass &= total == 4 * n as u64;
    Verdict { criterion: 7, pass, detail }.report();
}

/// Criterion 8: every emitted number is bit-identical across worker counts
/// 1, 4 and 8.
#[test]
fn criterion_8_determinism_across_workers() {
    fn pipeline(seed: u64) -> Vec<u64> {
        let mut out: Vec<f64> = Vec::new();
        let model = toy();
        // Sobol estimate with delta CI
        let u2 = SubsetU::new(&[2], 2).unwrap();
        let s = pick_freeze(&model, &u2, 3000, seed).unwrap();
        let fam = sobol_family();
        let est = estimate_gms_index(&s, &fam, &UStatConfig::new(UStatMode::Factorized, 0, seed))
            .unwrap();
        let gamma = estimate_gamma(&s, &fam, 200, seed).unwrap();
        let est = with_delta_ci(est, &gamma, 0.95).unwrap();
        out.push(est.value);
        out.extend(est.components);
        out.push(est.sigma.unwrap());
        let (lo, hi) = est.ci.unwrap();
        out.extend([lo, hi]);
        // CvM estimate
        let u1 = SubsetU::new(&[1], 2).unwrap();
        let s = pick_freeze(&model, &u1, 1500, seed).unwrap();
        let fam = cvm_family();
        let est = estimate_gms_index(&s, &fam, &UStatConfig::new(UStatMode::Factorized, 0, seed))
            .unwrap();
        out.push(est.value);
        out.extend(est.components);
        // ball family on plume fields, incomplete mode
        let grid = GridSpec::new(0.1, 10.0, -10.0, 10.0, 8, 16).unwrap();
        let am = builtin_model("plume_h", Some(2.0), Some(grid)).unwrap();
        let u3 = SubsetU::new(&[3], 3).unwrap();
        let s = pick_freeze(&am.model, &u3, 120, seed).unwrap();
        let fam =
            TestFamily::new(FamilyKind::MetricBall, MetricSpace::Grid { spec: grid }).unwrap();
        let est =
            estimate_gms_index(&s, &fam, &UStatConfig::new(UStatMode::Incomplete, 2000, seed))
                .unwrap();
        out.push(est.value);
        out.extend(est.components);
        // shared-design sensitivity maps
        let am = builtin_model("plume_qkuh", None, Some(grid)).unwrap();
        let subsets = vec![SubsetU::new(&[1], 4).unwrap(), SubsetU::new(&[4], 4).unwrap()];
        let maps =
            ubiquitous_maps_shared(&am.model, &subsets, &grid, 60, EstimatorKind::GmsSobol, seed)
                .unwrap();
        for m in maps {
            for v in m.values.into_iter().flatten() {
                out.push(v);
            }
        }
        // bootstrap CI on a light-tailed model
        let lin = InputModel::new(
            "linear",
            vec![InputDist::StdNormal, InputDist::StdNormal],
            Arc::new(|row: &[f64]| Ok(Point::Scalar(row[0] + 2.0 * row[1]))),
        )
        .unwrap();
        let s = pick_freeze(&lin, &u2, 300, seed).unwrap();
        let ci = gms_core::inference::bootstrap_ci(
            &s,
            &sobol_family(),
            60,
            0.95,
            &UStatConfig::new(UStatMode::Factorized, 0, seed),
            seed,
        )
        .unwrap();
        out.extend([ci.0, ci.1]);
        out.into_iter().map(f64::to_bits).collect()
    }

    let seed = 0x8D00;
    let mut results = Vec::new();
    for workers in [1usize, 4, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        results.push(pool.install(|| pipeline(seed)));
    }
    let pass = results[0] == results[1] && results[1] == results[2];
    let detail = format!(
        "{} numbers compared bit-for-bit across worker counts 1/4/8",
        results[0].len()
    );
    Verdict { criterion: 8, pass, detail }.report();
}
