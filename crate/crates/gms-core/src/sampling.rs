//! Input sampling and Pick-Freeze paired designs.
//!
//! A design for subset u pairs each output Z_i = f(X_i) with the frozen
//! output Z_i^u = f(X_i^u), where X^u keeps the coordinates in u and takes
//! fresh independent coordinates elsewhere. Building a design costs exactly
//! 2N evaluations of f, independent of the family order m.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{GmsError, Result};
use crate::metric::Point;

/// Scalar input distribution.
#[derive(Clone)]
pub enum InputDist {
    /// Uniform on [a, b).
    Uniform { a: f64, b: f64 },
    /// Standard normal.
    StdNormal,
    /// scale * Uniform[a, b).
    ScaledUniform { scale: f64, a: f64, b: f64 },
    /// Inverse-c.d.f. sampler: q(U) with U uniform on (0,1).
    Quantile(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for InputDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputDist::Uniform { a, b } => write!(f, "Uniform[{a},{b}]"),
            InputDist::StdNormal => write!(f, "StdNormal"),
            InputDist::ScaledUniform { scale, a, b } => write!(f, "{scale}*Uniform[{a},{b}]"),
            InputDist::Quantile(_) => write!(f, "Quantile(..)"),
        }
    }
}

impl InputDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            InputDist::Uniform { a, b } | InputDist::ScaledUniform { a, b, .. } => {
                if !(a < b) {
                    return Err(GmsError::Config(format!(
                        "uniform bounds must satisfy a < b, got [{a}, {b}]"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            InputDist::Uniform { a, b } => rng.gen_range(*a..*b),
            InputDist::StdNormal => rand_distr::StandardNormal.sample(rng),
            InputDist::ScaledUniform { scale, a, b } => scale * rng.gen_range(*a..*b),
            InputDist::Quantile(q) => q(rng.gen_range(f64::EPSILON..1.0)),
        }
    }
}

/// Deterministic black-box evaluator from input rows to output points.
///
/// The default batch evaluation splits rows into fixed-size chunks handed to
/// parallel workers; the chunk order is fixed, so results are bitwise
/// identical for any worker count. Implementations wrapping subprocesses can
/// override `eval_batch` to amortize process startup over the whole batch.
pub trait Evaluator: Send + Sync {
    fn eval(&self, row: &[f64]) -> Result<Point>;

    fn eval_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Point>> {
        const CHUNK: usize = 256;
        let chunks: Vec<std::result::Result<Vec<Point>, (usize, GmsError)>> = rows
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut out = Vec::with_capacity(chunk.len());
                for (k, row) in chunk.iter().enumerate() {
                    match self.eval(row) {
                        Ok(p) => out.push(p),
                        Err(e) => return Err((ci * CHUNK + k, e)),
                    }
                }
                Ok(out)
            })
            .collect();
        let mut points = Vec::with_capacity(rows.len());
        for c in chunks {
            match c {
                Ok(mut v) => points.append(&mut v),
                Err((row, e)) => {
                    return Err(GmsError::Evaluator { row, message: e.to_string() })
                }
            }
        }
        Ok(points)
    }
}

impl<F> Evaluator for F
where
    F: Fn(&[f64]) -> Result<Point> + Send + Sync,
{
    fn eval(&self, row: &[f64]) -> Result<Point> {
        self(row)
    }
}

/// p independent scalar input distributions plus the black-box output map,
/// with an instrumented call counter for budget audits.
#[derive(Clone)]
pub struct InputModel {
    pub name: String,
    dists: Vec<InputDist>,
    evaluator: Arc<dyn Evaluator>,
    calls: Arc<AtomicU64>,
}

impl fmt::Debug for InputModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InputModel")
            .field("name", &self.name)
            .field("dists", &self.dists)
            .field("calls", &self.call_count())
            .finish()
    }
}

impl InputModel {
    pub fn new(
        name: impl Into<String>,
        dists: Vec<InputDist>,
        evaluator: Arc<dyn Evaluator>,
    ) -> Result<Self> {
        if dists.is_empty() {
            return Err(GmsError::Config("p must be >= 1".into()));
        }
        for d in &dists {
            d.validate()?;
        }
        Ok(Self { name: name.into(), dists, evaluator, calls: Arc::new(AtomicU64::new(0)) })
    }

    pub fn p(&self) -> usize {
        self.dists.len()
    }

    pub fn dists(&self) -> &[InputDist] {
        &self.dists
    }

    /// Total number of evaluator calls since construction (or last reset).
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset_call_count(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    /// Evaluate f on each row (each row counts as one call), then validate
    /// that every output value is finite.
    pub fn evaluate_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Point>> {
        self.calls.fetch_add(rows.len() as u64, Ordering::SeqCst);
        let points = self.evaluator.eval_batch(rows)?;
        if points.len() != rows.len() {
            return Err(GmsError::Evaluator {
                row: points.len().min(rows.len()),
                message: format!("evaluator returned {} outputs for {} rows", points.len(), rows.len()),
            });
        }
        for (row, p) in points.iter().enumerate() {
            if p.coords().iter().any(|v| !v.is_finite()) {
                return Err(GmsError::Evaluator {
                    row,
                    message: "non-finite output value".into(),
                });
            }
        }
        Ok(points)
    }
}

/// Nonempty subset u of {1, ..., p}, stored sorted and 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetU {
    indices: Vec<usize>,
    p: usize,
}

impl SubsetU {
    pub fn new(indices: &[usize], p: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(GmsError::InvalidArgument("subset u must be nonempty".into()));
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() {
            return Err(GmsError::InvalidArgument("subset u has duplicate indices".into()));
        }
        if sorted[0] < 1 || *sorted.last().unwrap() > p {
            return Err(GmsError::InvalidArgument(format!(
                "subset indices must lie in 1..={p}"
            )));
        }
        Ok(Self { indices: sorted, p })
    }

    pub fn full(p: usize) -> Result<Self> {
        Self::new(&(1..=p).collect::<Vec<_>>(), p)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.p
    }

    /// Complement ~u = {1..p} \ u. May be empty (when u = I_p).
    pub fn complement_indices(&self) -> Vec<usize> {
        (1..=self.p).filter(|i| !self.contains(*i)).collect()
    }

    pub fn label(&self) -> String {
        let inner: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        format!("{{{}}}", inner.join(","))
    }
}

/// Metadata identifying how a paired sample was produced.
#[derive(Debug, Clone)]
pub struct DesignMeta {
    pub model: String,
    pub subset: SubsetU,
    pub seed: u64,
    /// Evaluator calls performed to build this sample.
    pub calls: u64,
}

/// N rows of (Z_i, Z_i^u) from one Pick-Freeze design.
#[derive(Debug, Clone)]
pub struct PairedSample {
    pub rows: Vec<(Point, Point)>,
    pub design: DesignMeta,
}

impl PairedSample {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Both columns as scalars; error when the outputs are not scalar.
    pub fn scalar_columns(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut z = Vec::with_capacity(self.n());
        let mut w = Vec::with_capacity(self.n());
        for (a, b) in &self.rows {
            match (a.scalar(), b.scalar()) {
                (Some(x), Some(y)) => {
                    z.push(x);
                    w.push(y);
                }
                _ => {
                    return Err(GmsError::Shape(
                        "scalar outputs required for this operation".into(),
                    ))
                }
            }
        }
        Ok((z, w))
    }

    /// Synthetic sample for tests and per-node estimation.
    pub fn from_scalar_pairs(pairs: &[(f64, f64)], seed: u64) -> Self {
        PairedSample {
            rows: pairs
                .iter()
                .map(|(a, b)| (Point::Scalar(*a), Point::Scalar(*b)))
                .collect(),
            design: DesignMeta {
                model: "synthetic".into(),
                subset: SubsetU::new(&[1], 1).expect("valid singleton"),
                seed,
                calls: 0,
            },
        }
    }
}

/// Draw the two independent N×p input matrices (X, X').
///
/// One counter-based generator per call; X comes from stream 0 and X' from
/// stream 1, so designs for different subsets never perturb X.
pub fn sample_inputs(model: &InputModel, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if n == 0 {
        return Err(GmsError::InvalidArgument("N must be >= 1".into()));
    }
    let draw = |stream: u64| -> Vec<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut mat = vec![vec![0.0; model.p()]; n];
        // column-major draw order: one distribution at a time
        for (c, dist) in model.dists.iter().enumerate() {
            for row in mat.iter_mut() {
                row[c] = dist.sample(&mut rng);
            }
        }
        mat
    };
    Ok((draw(0), draw(1)))
}

/// Build the Pick-Freeze paired sample for subset u: row i is
/// (f(X_i), f(X_i^u)) with X^u sharing the u-coordinates of X and taking
/// the X' coordinates elsewhere. Exactly 2N calls to f.
pub fn pick_freeze(model: &InputModel, u: &SubsetU, n: usize, seed: u64) -> Result<PairedSample> {
    if u.p() != model.p() {
        return Err(GmsError::InvalidArgument(format!(
            "subset is over p={} but model has p={}",
            u.p(),
            model.p()
        )));
    }
    if u.is_full() {
        log::warn!(
            "pick_freeze with u = I_p is degenerate: the index is 1 by construction"
        );
    }
    let (x, xp) = sample_inputs(model, n, seed)?;
    let frozen: Vec<Vec<f64>> = x
        .iter()
        .zip(xp.iter())
        .map(|(xi, xpi)| {
            (0..model.p())
                .map(|c| if u.contains(c + 1) { xi[c] } else { xpi[c] })
                .collect()
        })
        .collect();
    let before = model.call_count();
    let z = model.evaluate_rows(&x)?;
    let zu = model.evaluate_rows(&frozen)?;
    let calls = model.call_count() - before;
    Ok(PairedSample {
        rows: z.into_iter().zip(zu).collect(),
        design: DesignMeta { model: model.name.clone(), subset: u.clone(), seed, calls },
    })
}

/// Shared-design variant: one X matrix and one Z = f(X) column shared by all
/// subsets, plus one frozen column per subset — N(k+1) calls for k subsets
/// (the §4.1 budget convention when k = p). Each returned sample's
/// `design.calls` records its incremental cost: N + N for the first design
/// (which pays for the shared Z), N for the rest.
pub fn shared_pick_freeze(
    model: &InputModel,
    subsets: &[SubsetU],
    n: usize,
    seed: u64,
) -> Result<Vec<PairedSample>> {
    if subsets.is_empty() {
        return Err(GmsError::InvalidArgument("no subsets given".into()));
    }
    let (x, xp) = sample_inputs(model, n, seed)?;
    let z = model.evaluate_rows(&x)?;
    let mut out = Vec::with_capacity(subsets.len());
    for (k, u) in subsets.iter().enumerate() {
        if u.p() != model.p() {
            return Err(GmsError::InvalidArgument(format!(
                "subset is over p={} but model has p={}",
                u.p(),
                model.p()
            )));
        }
        let frozen: Vec<Vec<f64>> = x
            .iter()
            .zip(xp.iter())
            .map(|(xi, xpi)| {
                (0..model.p())
                    .map(|c| if u.contains(c + 1) { xi[c] } else { xpi[c] })
                    .collect()
            })
            .collect();
        let zu = model.evaluate_rows(&frozen)?;
        out.push(PairedSample {
            rows: z.iter().cloned().zip(zu).collect(),
            design: DesignMeta {
                model: model.name.clone(),
                subset: u.clone(),
                seed,
                calls: if k == 0 { 2 * n as u64 } else { n as u64 },
            },
        });
    }
    Ok(out)
}
