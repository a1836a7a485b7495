//! Run configuration: a versioned, human-editable JSON file.

use std::path::PathBuf;
use std::sync::Arc;

use gms_core::error::{GmsError, Result};
use gms_core::family::{FamilyKind, TestFamily};
use gms_core::metric::{GridSpec, MetricSpace};
use gms_core::models::{builtin_model, EstimatorKind};
use gms_core::sampling::{InputDist, InputModel};
use serde::{Deserialize, Serialize};

use crate::external::{ExternalModel, OutputSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default = "default_family")]
    pub family: String,
    pub subsets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetSpec>,
    pub estimators: Vec<String>,
    #[serde(default)]
    pub ci: CiSpec,
    #[serde(default)]
    pub ustat: UStatSpec,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
}

fn default_family() -> String {
    "sobol_value".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Built-in model name: lognormal_toy | plume_h | plume_qkuh.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Fixed plume altitude (plume_h only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Field grid for field-valued models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    /// External model command (line protocol over stdin/stdout).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Vec<String>>,
    /// Input distributions for an external model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<DistSpec>>,
    /// Output shape declaration for an external model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridConfig {
    pub fn to_spec(self) -> Result<GridSpec> {
        GridSpec::new(self.x_min, self.x_max, self.y_min, self.y_max, self.nx, self.ny)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Uniform { a: f64, b: f64 },
    StdNormal,
    ScaledUniform { scale: f64, a: f64, b: f64 },
}

impl DistSpec {
    pub fn to_dist(&self) -> InputDist {
        match *self {
            DistSpec::Uniform { a, b } => InputDist::Uniform { a, b },
            DistSpec::StdNormal => InputDist::StdNormal,
            DistSpec::ScaledUniform { scale, a, b } => InputDist::ScaledUniform { scale, a, b },
        }
    }
}

/// Budget accounting: either shared-design (one X matrix plus one frozen
/// matrix per subset, N = n/(k+1)) or independent designs (N = n/(2k)).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    pub n: usize,
    #[serde(default)]
    pub shared_design: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiSpec {
    /// delta | bootstrap | none
    #[serde(default = "default_ci_method")]
    pub method: String,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_bootstrap_b")]
    pub bootstrap_b: usize,
    /// Tuples per row for sampled Hajek projections.
    #[serde(default = "default_projection_tuples")]
    pub projection_tuples: usize,
}

fn default_ci_method() -> String {
    "delta".into()
}
fn default_level() -> f64 {
    0.95
}
fn default_bootstrap_b() -> usize {
    500
}
fn default_projection_tuples() -> usize {
    200
}

impl Default for CiSpec {
    fn default() -> Self {
        CiSpec {
            method: default_ci_method(),
            level: default_level(),
            bootstrap_b: default_bootstrap_b(),
            projection_tuples: default_projection_tuples(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UStatSpec {
    /// auto | exact | factorized | incomplete
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_tuple_budget")]
    pub tuple_budget: usize,
}

fn default_mode() -> String {
    "auto".into()
}
fn default_tuple_budget() -> usize {
    1_000_000
}

impl Default for UStatSpec {
    fn default() -> Self {
        UStatSpec { mode: default_mode(), tuple_budget: default_tuple_budget() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSpec {
    pub budget_grid: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub shared_design: bool,
}

fn default_replicates() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub grid: GridConfig,
    #[serde(default = "default_map_estimator")]
    pub estimator: String,
    pub n: usize,
}

fn default_map_estimator() -> String {
    "gms".into()
}

/// A fully-resolved run: model with counter, family, subsets, estimators.
pub struct ResolvedRun {
    pub config: RunConfig,
    pub model: InputModel,
    pub family: TestFamily,
    pub estimators: Vec<EstimatorKind>,
}

pub fn parse_family(name: &str) -> Result<FamilyKind> {
    match name {
        "sobol_value" => Ok(FamilyKind::SobolValue),
        "half_space_cvm" => Ok(FamilyKind::HalfSpaceCvm),
        "metric_ball" => Ok(FamilyKind::MetricBall),
        "midpoint_ball" => Ok(FamilyKind::MidpointBall),
        "intersection_ball" => Ok(FamilyKind::IntersectionBall),
        other => Err(GmsError::Config(format!(
            "family: unknown kind '{other}' (expected sobol_value, half_space_cvm, metric_ball, midpoint_ball or intersection_ball)"
        ))),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| GmsError::Config(format!("config parse error: {e}")))
    }

    /// Validate and resolve the configuration into a runnable model/family.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(GmsError::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.estimators.is_empty() {
            return Err(GmsError::Config("estimators: list must not be empty".into()));
        }
        let estimators: Vec<EstimatorKind> = self
            .estimators
            .iter()
            .map(|s| EstimatorKind::parse(s))
            .collect::<Result<_>>()
            .map_err(|e| GmsError::Config(format!("estimators: {e}")))?;
        if self.seeds.is_empty() {
            return Err(GmsError::Config("seeds: list must not be empty".into()));
        }
        if self.subsets.is_empty() {
            return Err(GmsError::Config("subsets: list must not be empty".into()));
        }
        if self.n.is_none() && self.budget.is_none() && self.converge.is_none() {
            return Err(GmsError::Config("one of n, budget or converge is required".into()));
        }
        if self.n.is_some() && self.budget.is_some() {
            return Err(GmsError::Config("n and budget are mutually exclusive".into()));
        }
        match self.ci.method.as_str() {
            "delta" | "bootstrap" | "none" => {}
            other => {
                return Err(GmsError::Config(format!(
                    "ci.method: unknown method '{other}' (expected delta, bootstrap or none)"
                )))
            }
        }
        if !(0.0 < self.ci.level && self.ci.level < 1.0) {
            return Err(GmsError::Config(format!(
                "ci.level: {} outside (0,1)",
                self.ci.level
            )));
        }
        match self.ustat.mode.as_str() {
            "auto" | "exact" | "factorized" | "incomplete" => {}
            other => {
                return Err(GmsError::Config(format!(
                    "ustat.mode: unknown mode '{other}' (expected auto, exact, factorized or incomplete)"
                )))
            }
        }
        let kind = parse_family(&self.family)?;
        let (model, space) = self.build_model()?;
        for u in &self.subsets {
            gms_core::sampling::SubsetU::new(u, model.p())
                .map_err(|e| GmsError::Config(format!("subsets: {e}")))?;
        }
        let family = TestFamily::new(kind, space)
            .map_err(|e| GmsError::Config(format!("family: {e}")))?;
        let non_sobol = kind != FamilyKind::SobolValue;
        if non_sobol
            && estimators
                .iter()
                .any(|e| matches!(e, EstimatorKind::Pf | EstimatorKind::PfEfficient))
        {
            return Err(GmsError::Config(
                "estimators: pf and pf_efficient are Sobol estimators and require family sobol_value"
                    .into(),
            ));
        }
        Ok(ResolvedRun { config: self.clone(), model, family, estimators })
    }

    fn build_model(&self) -> Result<(InputModel, MetricSpace)> {
        let spec = &self.model;
        match (&spec.builtin, &spec.command) {
            (Some(name), None) => {
                let grid = spec.grid.map(|g| g.to_spec()).transpose()?;
                let am = builtin_model(name, spec.h, grid)
                    .map_err(|e| GmsError::Config(format!("model: {e}")))?;
                let space = match name.as_str() {
                    "lognormal_toy" => MetricSpace::Scalar,
                    _ => MetricSpace::Grid {
                        spec: grid.unwrap_or_else(gms_core::models::default_plume_grid),
                    },
                };
                Ok((am.model, space))
            }
            (None, Some(command)) => {
                if command.is_empty() {
                    return Err(GmsError::Config("model.command: must not be empty".into()));
                }
                let inputs = spec.inputs.as_ref().ok_or_else(|| {
                    GmsError::Config("model.inputs: required for external models".into())
                })?;
                let output = spec.output.clone().ok_or_else(|| {
                    GmsError::Config("model.output: required for external models".into())
                })?;
                let space = output.space()?;
                let dists: Vec<InputDist> = inputs.iter().map(DistSpec::to_dist).collect();
                let external = ExternalModel::new(command.clone(), output);
                let model = InputModel::new(
                    format!("external:{}", command.join(" ")),
                    dists,
                    Arc::new(external),
                )?;
                Ok((model, space))
            }
            (Some(_), Some(_)) => Err(GmsError::Config(
                "model: builtin and command are mutually exclusive".into(),
            )),
            (None, None) => Err(GmsError::Config(
                "model: one of builtin or command is required".into(),
            )),
        }
    }
}
