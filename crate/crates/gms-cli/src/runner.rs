//! Orchestration of the estimate / converge / map subcommands.

use std::fs;
use std::path::Path;
use std::time::Instant;

use gms_core::baselines::{
    sobol_pf, sobol_pf_efficient, sobol_pf_efficient_with_sigma, sobol_pf_with_sigma,
};
use gms_core::error::{GmsError, Result};
use gms_core::inference::{
    bootstrap_ci, bootstrap_ci_of, confidence_interval, estimate_gamma, with_delta_ci,
};
use gms_core::models::EstimatorKind;
use gms_core::sampling::{pick_freeze, shared_pick_freeze, PairedSample, SubsetU};
use gms_core::ustat::{estimate_gms_index, UStatConfig, UStatMode};

use crate::config::{ResolvedRun, RunConfig};
use crate::report::{config_hash, subset_csv_label, ReportRow, RunReport, Timing};

fn config_value(config: &RunConfig) -> Result<serde_json::Value> {
    serde_json::to_value(config).map_err(|e| GmsError::Config(format!("config encode: {e}")))
}

fn ustat_config(run: &ResolvedRun, n: usize, seed: u64) -> Result<UStatConfig> {
    let spec = &run.config.ustat;
    Ok(match spec.mode.as_str() {
        "auto" => {
            let mut cfg = UStatConfig::auto(&run.family, n, seed);
            if cfg.mode == UStatMode::Incomplete {
                cfg.tuple_budget = cfg.tuple_budget.min(spec.tuple_budget).max(n);
            }
            cfg
        }
        "exact" => UStatConfig::new(UStatMode::Exact, 0, seed),
        "factorized" => UStatConfig::new(UStatMode::Factorized, 0, seed),
        "incomplete" => UStatConfig::new(UStatMode::Incomplete, spec.tuple_budget, seed),
        other => return Err(GmsError::Config(format!("ustat.mode: {other}"))),
    })
}

/// Sample size per design for a total evaluation budget n over k subsets:
/// shared designs cost N(k+1) calls, independent designs 2N each.
pub fn budget_to_n(total: usize, k: usize, shared: bool) -> usize {
    if shared {
        total / (k + 1)
    } else {
        total / (2 * k)
    }
}

fn design_n(run: &ResolvedRun) -> Result<(usize, bool)> {
    let k = run.config.subsets.len();
    if let Some(n) = run.config.n {
        return Ok((n, false));
    }
    if let Some(b) = run.config.budget {
        let n = budget_to_n(b.n, k, b.shared_design);
        if n < run.family.m() + 2 {
            return Err(GmsError::Config(format!(
                "budget {} gives N={n}, below m+2={}",
                b.n,
                run.family.m() + 2
            )));
        }
        return Ok((n, b.shared_design));
    }
    Err(GmsError::Config("no n or budget in config".into()))
}

fn build_designs(run: &ResolvedRun, n: usize, shared: bool, seed: u64) -> Result<Vec<PairedSample>> {
    let subsets: Vec<SubsetU> = run
        .config
        .subsets
        .iter()
        .map(|u| SubsetU::new(u, run.model.p()))
        .collect::<Result<_>>()?;
    if shared {
        shared_pick_freeze(&run.model, &subsets, n, seed)
    } else {
        subsets.iter().map(|u| pick_freeze(&run.model, u, n, seed)).collect()
    }
}

fn estimate_row(
    run: &ResolvedRun,
    sample: &PairedSample,
    estimator: EstimatorKind,
    seed: u64,
) -> Result<ReportRow> {
    let ci_spec = &run.config.ci;
    let n = sample.n();
    let (value, sigma, ci, out_of_range, ci_method, components) = match estimator {
        EstimatorKind::GmsSobol => {
            let cfg = ustat_config(run, n, seed)?;
            let est = estimate_gms_index(sample, &run.family, &cfg)?;
            match ci_spec.method.as_str() {
                "delta" => {
                    let gamma =
                        estimate_gamma(sample, &run.family, ci_spec.projection_tuples, seed)?;
                    let est = with_delta_ci(est, &gamma, ci_spec.level)?;
                    (
                        est.value,
                        est.sigma,
                        est.ci,
                        est.out_of_range,
                        Some("delta".to_string()),
                        Some(est.components),
                    )
                }
                "bootstrap" => {
                    let ci = bootstrap_ci(
                        sample,
                        &run.family,
                        ci_spec.bootstrap_b,
                        ci_spec.level,
                        &cfg,
                        seed,
                    )?;
                    (
                        est.value,
                        None,
                        Some(ci),
                        est.out_of_range,
                        Some("bootstrap".to_string()),
                        Some(est.components),
                    )
                }
                _ => (est.value, None, None, est.out_of_range, None, Some(est.components)),
            }
        }
        EstimatorKind::Pf | EstimatorKind::PfEfficient => {
            let plain = |s: &PairedSample| match estimator {
                EstimatorKind::Pf => sobol_pf(s),
                _ => sobol_pf_efficient(s),
            };
            match ci_spec.method.as_str() {
                "delta" => {
                    let (value, sigma) = match estimator {
                        EstimatorKind::Pf => sobol_pf_with_sigma(sample)?,
                        _ => sobol_pf_efficient_with_sigma(sample)?,
                    };
                    let ci = confidence_interval(value, sigma, n, ci_spec.level)?;
                    (
                        value,
                        Some(sigma),
                        Some(ci),
                        !(0.0..=1.0).contains(&value),
                        Some("delta".to_string()),
                        None,
                    )
                }
                "bootstrap" => {
                    let value = plain(sample)?;
                    let ci = bootstrap_ci_of(
                        sample,
                        ci_spec.bootstrap_b,
                        ci_spec.level,
                        seed,
                        |resampled, _| plain(resampled),
                    )?;
                    (
                        value,
                        None,
                        Some(ci),
                        !(0.0..=1.0).contains(&value),
                        Some("bootstrap".to_string()),
                        None,
                    )
                }
                _ => {
                    let value = plain(sample)?;
                    (value, None, None, !(0.0..=1.0).contains(&value), None, None)
                }
            }
        }
    };
    Ok(ReportRow {
        subset: subset_csv_label(sample.design.subset.indices()),
        family: run.family.kind.name().to_string(),
        estimator: estimator.name().to_string(),
        n,
        value,
        sigma,
        ci_lo: ci.map(|c| c.0),
        ci_hi: ci.map(|c| c.1),
        calls: sample.design.calls,
        seed,
        out_of_range,
        ci_method,
        components,
    })
}

pub struct RunOutput {
    pub report: RunReport,
    pub csv_path: std::path::PathBuf,
    pub json_path: std::path::PathBuf,
}

fn write_outputs(
    out_dir: &Path,
    command: &str,
    report: &RunReport,
    csv_text: &str,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    fs::create_dir_all(out_dir)
        .map_err(|e| GmsError::Config(format!("creating {}: {e}", out_dir.display())))?;
    let csv_path = out_dir.join(format!("{command}.csv"));
    let json_path = out_dir.join(format!("{command}_report.json"));
    fs::write(&csv_path, csv_text)
        .map_err(|e| GmsError::Config(format!("writing {}: {e}", csv_path.display())))?;
    fs::write(&json_path, report.to_json()?)
        .map_err(|e| GmsError::Config(format!("writing {}: {e}", json_path.display())))?;
    Ok((csv_path, json_path))
}

/// `estimate`: one row per (seed, subset, estimator).
pub fn run_estimate(run: &ResolvedRun, out_dir: &Path, workers: usize) -> Result<RunOutput> {
    let start = Instant::now();
    run.model.reset_call_count();
    let (n, shared) = design_n(run)?;
    let mut rows = Vec::new();
    for &seed in &run.config.seeds {
        let designs = build_designs(run, n, shared, seed)?;
        for sample in &designs {
            for &estimator in &run.estimators {
                rows.push(estimate_row(run, sample, estimator, seed)?);
            }
        }
    }
    let config = config_value(&run.config)?;
    let report = RunReport {
        schema_version: crate::config::SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "estimate".into(),
        config_sha256: config_hash(&config)?,
        config,
        total_calls: run.model.call_count(),
        rows,
        timing: Timing { seconds: start.elapsed().as_secs_f64(), workers },
    };
    let csv = report.to_csv();
    let (csv_path, json_path) = write_outputs(out_dir, "estimate", &report, &csv)?;
    Ok(RunOutput { report, csv_path, json_path })
}

/// `converge`: a budget-grid study. One row per (budget, replicate, subset,
/// estimator); replicate r uses seed base+r with the first configured seed
/// as base, so a single-budget study with one replicate reproduces the
/// corresponding `estimate` run exactly.
pub fn run_converge(run: &ResolvedRun, out_dir: &Path, workers: usize) -> Result<RunOutput> {
    let spec = run
        .config
        .converge
        .as_ref()
        .ok_or_else(|| GmsError::Config("converge: section required".into()))?;
    if spec.budget_grid.is_empty() {
        return Err(GmsError::Config("converge.budget_grid: must not be empty".into()));
    }
    let start = Instant::now();
    run.model.reset_call_count();
    let base_seed = run.config.seeds[0];
    let k = run.config.subsets.len();
    let mut csv = String::from("n,N,estimator,subset,replicate,seed,value,sigma\n");
    let mut rows = Vec::new();
    for &budget in &spec.budget_grid {
        let n = budget_to_n(budget, k, spec.shared_design);
        if n < run.family.m() + 2 {
            return Err(GmsError::Config(format!(
                "converge: budget {budget} gives N={n}, below m+2={}",
                run.family.m() + 2
            )));
        }
        for rep in 0..spec.replicates {
            let seed = base_seed + rep as u64;
            let designs = build_designs(run, n, spec.shared_design, seed)?;
            for sample in &designs {
                for &estimator in &run.estimators {
                    let row = estimate_row(run, sample, estimator, seed)?;
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        budget,
                        n,
                        row.estimator,
                        row.subset,
                        rep,
                        seed,
                        row.value,
                        row.sigma.map(|s| s.to_string()).unwrap_or_default()
                    ));
                    rows.push(row);
                }
            }
        }
    }
    let config = config_value(&run.config)?;
    let report = RunReport {
        schema_version: crate::config::SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "converge".into(),
        config_sha256: config_hash(&config)?,
        config,
        total_calls: run.model.call_count(),
        rows,
        timing: Timing { seconds: start.elapsed().as_secs_f64(), workers },
    };
    let (csv_path, json_path) = write_outputs(out_dir, "converge", &report, &csv)?;
    Ok(RunOutput { report, csv_path, json_path })
}

/// `map`: per-location sensitivity maps on a shared design, one CSV per
/// (seed, subset).
pub fn run_map(run: &ResolvedRun, out_dir: &Path, workers: usize) -> Result<RunOutput> {
    let spec = run
        .config
        .map
        .as_ref()
        .ok_or_else(|| GmsError::Config("map: section required".into()))?;
    let grid = spec.grid.to_spec()?;
    let estimator = EstimatorKind::parse(&spec.estimator)?;
    let start = Instant::now();
    run.model.reset_call_count();
    fs::create_dir_all(out_dir)
        .map_err(|e| GmsError::Config(format!("creating {}: {e}", out_dir.display())))?;
    let subsets: Vec<SubsetU> = run
        .config
        .subsets
        .iter()
        .map(|u| SubsetU::new(u, run.model.p()))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &seed in &run.config.seeds {
        let maps = gms_core::models::ubiquitous_maps_shared(
            &run.model,
            &subsets,
            &grid,
            spec.n,
            estimator,
            seed,
        )?;
        for map in &maps {
            let label = subset_csv_label(map.subset.indices());
            let path = out_dir.join(format!("map_{}_u{}_{}.csv", estimator.name(), label, seed));
            let mut buf = Vec::new();
            map.write_csv(&mut buf)
                .map_err(|e| GmsError::Config(format!("writing map: {e}")))?;
            fs::write(&path, buf)
                .map_err(|e| GmsError::Config(format!("writing {}: {e}", path.display())))?;
            let present: Vec<f64> = map.values.iter().flatten().copied().collect();
            let missing = map.values.len() - present.len();
            let mean = present.iter().sum::<f64>() / present.len().max(1) as f64;
            rows.push(ReportRow {
                subset: label,
                family: "sobol_value".into(),
                estimator: estimator.name().into(),
                n: spec.n,
                value: mean,
                sigma: None,
                ci_lo: None,
                ci_hi: None,
                calls: missing as u64, // see JSON field note below
                seed,
                out_of_range: false,
                ci_method: None,
                components: None,
            });
        }
    }
    // map rows reuse ReportRow for the JSON summary; the calls column is not
    // meaningful per map (the shared design is charged once), so rebuild it
    for row in &mut rows {
        row.calls = 0;
    }
    let config = config_value(&run.config)?;
    let report = RunReport {
        schema_version: crate::config::SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "map".into(),
        config_sha256: config_hash(&config)?,
        config,
        total_calls: run.model.call_count(),
        rows,
        timing: Timing { seconds: start.elapsed().as_secs_f64(), workers },
    };
    let csv = report.to_csv();
    let (csv_path, json_path) = write_outputs(out_dir, "map", &report, &csv)?;
    Ok(RunOutput { report, csv_path, json_path })
}
