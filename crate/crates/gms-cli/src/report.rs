//! Run reports: a fixed-column CSV table plus a JSON report embedding the
//! resolved configuration, its hash and the exact call count.

use gms_core::error::{GmsError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CSV_HEADER: &str = "subset,family,estimator,N,value,sigma,ci_lo,ci_hi,calls,seed";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub subset: String,
    pub family: String,
    pub estimator: String,
    pub n: usize,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_hi: Option<f64>,
    pub calls: u64,
    pub seed: u64,
    pub out_of_range: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<[f64; 4]>,
}

impl ReportRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.subset,
            self.family,
            self.estimator,
            self.n,
            self.value,
            opt(&self.sigma),
            opt(&self.ci_lo),
            opt(&self.ci_hi),
            self.calls,
            self.seed
        )
    }
}

/// Timing and environment details; excluded from determinism comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub version: String,
    pub command: String,
    /// The resolved configuration this report was produced from.
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub total_calls: u64,
    pub rows: Vec<ReportRow>,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| GmsError::Config(format!("report serialization: {e}")))
    }
}

/// SHA-256 of the canonical JSON encoding of the configuration.
pub fn config_hash(config: &serde_json::Value) -> Result<String> {
    let bytes = serde_json::to_vec(config)
        .map_err(|e| GmsError::Config(format!("config hash: {e}")))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Subset cell in the CSV: indices joined by '+' (comma-free).
pub fn subset_csv_label(indices: &[usize]) -> String {
    indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("+")
}
