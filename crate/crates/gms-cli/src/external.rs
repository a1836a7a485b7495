//! External black-box models over a line protocol: one whitespace-separated
//! input row per line on the child's standard input, one output row
//! (scalar, vector, or flattened field/matrix) per line on its standard
//! output. One child process serves each evaluation batch.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use gms_core::error::{GmsError, Result};
use gms_core::metric::{GridSpec, MetricSpace, Point};
use gms_core::sampling::Evaluator;
use serde::{Deserialize, Serialize};

use crate::config::GridConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutputSpec {
    Scalar,
    Vector { dim: usize },
    Field { grid: GridConfig },
    Matrix { rows: usize, cols: usize },
}

impl OutputSpec {
    pub fn space(&self) -> Result<MetricSpace> {
        Ok(match self {
            OutputSpec::Scalar => MetricSpace::Scalar,
            OutputSpec::Vector { dim } => MetricSpace::Vector { dim: *dim },
            OutputSpec::Field { grid } => MetricSpace::Grid { spec: grid.to_spec()? },
            OutputSpec::Matrix { rows, cols } => MetricSpace::Matrix { rows: *rows, cols: *cols },
        })
    }

    fn expected_len(&self) -> usize {
        match self {
            OutputSpec::Scalar => 1,
            OutputSpec::Vector { dim } => *dim,
            OutputSpec::Field { grid } => grid.nx * grid.ny,
            OutputSpec::Matrix { rows, cols } => rows * cols,
        }
    }

    fn to_point(&self, values: Vec<f64>) -> Result<Point> {
        Ok(match self {
            OutputSpec::Scalar => Point::Scalar(values[0]),
            OutputSpec::Vector { .. } => Point::Vector(values),
            OutputSpec::Field { grid } => Point::Field { grid: grid.to_spec()?, values },
            OutputSpec::Matrix { rows, cols } => {
                Point::Matrix { rows: *rows, cols: *cols, values }
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExternalModel {
    command: Vec<String>,
    output: OutputSpec,
}

impl ExternalModel {
    pub fn new(command: Vec<String>, output: OutputSpec) -> Self {
        Self { command, output }
    }

    fn grid_hint(&self) -> Option<GridSpec> {
        match &self.output {
            OutputSpec::Field { grid } => grid.to_spec().ok(),
            _ => None,
        }
    }

    fn run_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Point>> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| {
                GmsError::Config(format!("failed to spawn '{}': {e}", self.command[0]))
            })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        // feed rows from a separate thread so large batches cannot deadlock
        let payload: String = rows
            .iter()
            .map(|row| {
                row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ") + "\n"
            })
            .collect();
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(payload.as_bytes());
            // stdin drops here, closing the pipe
        });
        let expected = self.output.expected_len();
        let mut points = Vec::with_capacity(rows.len());
        for (row, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line.map_err(|e| GmsError::Evaluator {
                row,
                message: format!("reading model output: {e}"),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| GmsError::Evaluator {
                        row,
                        message: format!("bad output token '{tok}': {e}"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != expected {
                return Err(GmsError::Evaluator {
                    row,
                    message: format!("expected {expected} output values, got {}", values.len()),
                });
            }
            points.push(self.output.to_point(values)?);
        }
        writer.join().ok();
        let status = child.wait().map_err(|e| GmsError::Config(format!("wait: {e}")))?;
        if !status.success() {
            return Err(GmsError::Config(format!(
                "external model exited with {status}"
            )));
        }
        if points.len() != rows.len() {
            return Err(GmsError::Evaluator {
                row: points.len(),
                message: format!("child produced {} rows for {} inputs", points.len(), rows.len()),
            });
        }
        Ok(points)
    }
}

impl Evaluator for ExternalModel {
    fn eval(&self, row: &[f64]) -> Result<Point> {
        Ok(self.run_batch(&[row.to_vec()])?.remove(0))
    }

    fn eval_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Point>> {
        self.run_batch(rows)
    }
}

impl ExternalModel {
    pub fn output_grid(&self) -> Option<GridSpec> {
        self.grid_hint()
    }
}
