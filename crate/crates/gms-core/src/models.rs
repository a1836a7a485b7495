//! Built-in analytic benchmark models: the lognormal toy model with its
//! closed-form reference indices, and the ground-level Gaussian plume field
//! model, plus per-location ("ubiquitous") sensitivity maps.

use std::io::Write;
use std::sync::Arc;

use crate::baselines;
use crate::error::{GmsError, Result};
use crate::family::FamilyKind;
use crate::kahan::KahanSum;
use crate::metric::{GridSpec, Point};
use crate::sampling::{pick_freeze, shared_pick_freeze, InputDist, InputModel, PairedSample, SubsetU};
use crate::ustat::psi;

/// Z = exp(x1 + 2 x2).
pub fn lognormal_toy(x1: f64, x2: f64) -> f64 {
    (x1 + 2.0 * x2).exp()
}

/// Closed-form reference values quoted for the toy model, evaluated from
/// their exact expressions:
/// S^1 = (1-e^-1)/(e^4-1), S^2 = (e^3-e^-3)/(e^4-1),
/// CvM^1 = (6/pi) atan 2 - 2, CvM^2 = (6/pi) atan sqrt(19) - 2.
///
/// Note: the two Sobol expressions are the values quoted alongside the
/// model; the population Sobol indices of exp(X1+2X2) itself are
/// (e-1)/(e^5-1) and (e^4-1)/(e^5-1), about 0.0117 and 0.3636.
pub fn lognormal_references() -> [(&'static str, f64); 4] {
    let e = std::f64::consts::E;
    let pi = std::f64::consts::PI;
    [
        ("sobol_1", (1.0 - 1.0 / e) / (e.powi(4) - 1.0)),
        ("sobol_2", (e.powi(3) - e.powi(-3)) / (e.powi(4) - 1.0)),
        ("cvm_1", 6.0 / pi * 2.0f64.atan() - 2.0),
        ("cvm_2", 6.0 / pi * 19.0f64.sqrt().atan() - 2.0),
    ]
}

/// Population Sobol indices of the toy model itself (for CLT checks).
pub fn lognormal_true_sobol() -> (f64, f64) {
    let e = std::f64::consts::E;
    (
        (e - 1.0) / (e.powi(5) - 1.0),
        (e.powi(4) - 1.0) / (e.powi(5) - 1.0),
    )
}

/// A reference index value attached to a built-in model.
#[derive(Debug, Clone)]
pub struct ReferenceIndex {
    pub subset: Vec<usize>,
    pub family: FamilyKind,
    pub value: f64,
}

/// A built-in model: its input law, evaluator and any closed-form
/// reference indices.
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    pub model: InputModel,
    pub references: Vec<ReferenceIndex>,
}

/// Ground-level Gaussian plume concentration
/// C(x, y, 0) = Q / (2 pi K x) * exp(-u (y^2 + H^2) / (4 K x)).
pub fn plume_concentration(q: f64, k: f64, u_wind: f64, h: f64, x: f64, y: f64) -> Result<f64> {
    if x <= 0.0 || k <= 0.0 {
        return Err(GmsError::InvalidArgument(format!(
            "plume requires x > 0 and K > 0 (got x={x}, K={k})"
        )));
    }
    if u_wind < 0.0 || q < 0.0 {
        return Err(GmsError::InvalidArgument("plume requires u >= 0 and Q >= 0".into()));
    }
    Ok(q / (2.0 * std::f64::consts::PI * k * x)
        * (-u_wind * (y * y + h * h) / (4.0 * k * x)).exp())
}

/// Discretized scalar field on a rectangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOutput {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl FieldOutput {
    pub fn into_point(self) -> Point {
        Point::Field { grid: self.grid, values: self.values }
    }

    /// Row-major CSV with a header line describing the grid.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write_grid_csv(out, &self.grid, |v| v.to_string(), &self.values)
    }
}

fn write_grid_csv<T, W: Write>(
    out: &mut W,
    grid: &GridSpec,
    fmt: impl Fn(&T) -> String,
    values: &[T],
) -> std::io::Result<()> {
    writeln!(
        out,
        "# grid x=[{},{}] y=[{},{}] nx={} ny={} row-major",
        grid.x_min, grid.x_max, grid.y_min, grid.y_max, grid.nx, grid.ny
    )?;
    for i in 0..grid.nx {
        let row: Vec<String> = (0..grid.ny).map(|j| fmt(&values[i * grid.ny + j])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Default plume grid: 64 x 128 over [0.1, 10] x [-10, 10]; the 0.1 lower
/// x-bound keeps the grid away from the 1/x singularity.
pub fn default_plume_grid() -> GridSpec {
    GridSpec::new(0.1, 10.0, -10.0, 10.0, 64, 128).expect("valid default grid")
}

/// Tabulate the plume concentration on the grid (midpoint nodes).
pub fn plume_field(q: f64, k: f64, u_wind: f64, h: f64, grid: &GridSpec) -> Result<FieldOutput> {
    if grid.x_min <= 0.0 {
        return Err(GmsError::InvalidArgument(
            "plume grid must satisfy x_min > 0 (1/x singularity at x=0)".into(),
        ));
    }
    if grid.x_max > 10.0 + 1e-12 {
        return Err(GmsError::InvalidArgument("plume grid x-range must lie within (0,10]".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let (x, y) = grid.node(i, j);
            values.push(plume_concentration(q, k, u_wind, h, x, y)?);
        }
    }
    Ok(FieldOutput { grid: *grid, values })
}

/// Built-in model registry.
///
/// - "lognormal_toy": p=2, standard normal inputs, scalar output.
/// - "plume_h": p=3 (Q, K, u ~ U[0,10]), H fixed, field output on `grid`.
/// - "plume_qkuh": p=4 (Q, K, u, H ~ U[0,10]), field output on `grid`.
pub fn builtin_model(name: &str, h: Option<f64>, grid: Option<GridSpec>) -> Result<AnalyticModel> {
    match name {
        "lognormal_toy" => {
            let model = InputModel::new(
                "lognormal_toy",
                vec![InputDist::StdNormal, InputDist::StdNormal],
                Arc::new(|row: &[f64]| Ok(Point::Scalar(lognormal_toy(row[0], row[1])))),
            )?;
            let refs = lognormal_references();
            let references = vec![
                ReferenceIndex { subset: vec![1], family: FamilyKind::SobolValue, value: refs[0].1 },
                ReferenceIndex { subset: vec![2], family: FamilyKind::SobolValue, value: refs[1].1 },
                ReferenceIndex { subset: vec![1], family: FamilyKind::HalfSpaceCvm, value: refs[2].1 },
                ReferenceIndex { subset: vec![2], family: FamilyKind::HalfSpaceCvm, value: refs[3].1 },
            ];
            Ok(AnalyticModel { model, references })
        }
        "plume_h" => {
            let h = h.ok_or_else(|| {
                GmsError::Config("model plume_h requires the fixed altitude h".into())
            })?;
            let grid = grid.unwrap_or_else(default_plume_grid);
            let model = InputModel::new(
                format!("plume_h={h}"),
                vec![InputDist::Uniform { a: 0.0, b: 10.0 }; 3],
                Arc::new(move |row: &[f64]| {
                    plume_field(row[0], row[1], row[2], h, &grid).map(FieldOutput::into_point)
                }),
            )?;
            Ok(AnalyticModel { model, references: vec![] })
        }
        "plume_qkuh" => {
            let grid = grid.unwrap_or_else(default_plume_grid);
            let model = InputModel::new(
                "plume_qkuh",
                vec![InputDist::Uniform { a: 0.0, b: 10.0 }; 4],
                Arc::new(move |row: &[f64]| {
                    plume_field(row[0], row[1], row[2], row[3], &grid).map(FieldOutput::into_point)
                }),
            )?;
            Ok(AnalyticModel { model, references: vec![] })
        }
        other => Err(GmsError::Config(format!("unknown builtin model '{other}'"))),
    }
}

/// Which estimator a sensitivity map uses at each location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// U-statistic GMS estimator with the SobolValue family per node.
    GmsSobol,
    Pf,
    PfEfficient,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::GmsSobol => "gms",
            EstimatorKind::Pf => "pf",
            EstimatorKind::PfEfficient => "pf_efficient",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gms" | "gms_sobol" => Ok(EstimatorKind::GmsSobol),
            "pf" => Ok(EstimatorKind::Pf),
            "pf_efficient" => Ok(EstimatorKind::PfEfficient),
            other => Err(GmsError::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Per-location index estimates on a grid; degenerate nodes are missing.
#[derive(Debug, Clone)]
pub struct IndexMap {
    pub grid: GridSpec,
    pub subset: SubsetU,
    pub estimator: EstimatorKind,
    pub values: Vec<Option<f64>>,
}

impl IndexMap {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write_grid_csv(
            out,
            &self.grid,
            |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default(),
            &self.values,
        )
    }
}

fn node_estimate(z: &[f64], w: &[f64], estimator: EstimatorKind) -> Result<f64> {
    match estimator {
        EstimatorKind::GmsSobol => {
            let [u1, u2, u3, u4] = crate::ustat::sobol_components_scalars(z, w);
            psi(u1, u2, u3, u4)
        }
        EstimatorKind::Pf => {
            baselines::sobol_pf(&PairedSample::from_scalar_pairs(
                &z.iter().copied().zip(w.iter().copied()).collect::<Vec<_>>(),
                0,
            ))
        }
        EstimatorKind::PfEfficient => {
            baselines::sobol_pf_efficient(&PairedSample::from_scalar_pairs(
                &z.iter().copied().zip(w.iter().copied()).collect::<Vec<_>>(),
                0,
            ))
        }
    }
}

fn maps_from_samples(
    samples: &[PairedSample],
    grid: &GridSpec,
    estimator: EstimatorKind,
) -> Result<Vec<IndexMap>> {
    use rayon::prelude::*;
    let mut out = Vec::with_capacity(samples.len());
    for sample in samples {
        for (zp, wp) in &sample.rows {
            match (zp, wp) {
                (Point::Field { grid: gz, .. }, Point::Field { grid: gw, .. })
                    if gz == grid && gw == grid => {}
                _ => {
                    return Err(GmsError::Shape(
                        "ubiquitous map requires field outputs on the map grid".into(),
                    ))
                }
            }
        }
        let nodes: Vec<usize> = (0..grid.len()).collect();
        let values: Vec<Option<f64>> = nodes
            .par_chunks(64)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|&node| {
                        let z: Vec<f64> =
                            sample.rows.iter().map(|(p, _)| p.coords()[node]).collect();
                        let w: Vec<f64> =
                            sample.rows.iter().map(|(_, p)| p.coords()[node]).collect();
                        match node_estimate(&z, &w, estimator) {
                            Ok(v) => Some(v),
                            Err(_) => None,
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .flatten()
            .collect();
        out.push(IndexMap {
            grid: *grid,
            subset: sample.design.subset.clone(),
            estimator,
            values,
        });
    }
    Ok(out)
}

/// Per-location sensitivity map for one subset: a single Pick-Freeze design
/// (2N field evaluations) reused across every grid node.
pub fn ubiquitous_map(
    model: &InputModel,
    u: &SubsetU,
    grid: &GridSpec,
    n: usize,
    estimator: EstimatorKind,
    seed: u64,
) -> Result<IndexMap> {
    if n < 2 {
        return Err(GmsError::InvalidArgument("maps need N >= 2".into()));
    }
    let sample = pick_freeze(model, u, n, seed)?;
    Ok(maps_from_samples(std::slice::from_ref(&sample), grid, estimator)?.remove(0))
}

/// Maps for several subsets from one shared design (N(k+1) field
/// evaluations for k subsets).
pub fn ubiquitous_maps_shared(
    model: &InputModel,
    subsets: &[SubsetU],
    grid: &GridSpec,
    n: usize,
    estimator: EstimatorKind,
    seed: u64,
) -> Result<Vec<IndexMap>> {
    if n < 2 {
        return Err(GmsError::InvalidArgument("maps need N >= 2".into()));
    }
    let samples = shared_pick_freeze(model, subsets, n, seed)?;
    maps_from_samples(&samples, grid, estimator)
}

/// Mean of the field values (quadrature-weighted integral / area).
pub fn field_mean(field: &FieldOutput) -> f64 {
    let mut s = KahanSum::new();
    for &v in &field.values {
        s.add(v);
    }
    s.value() / field.values.len() as f64
}
