//! Output-space points, metric spaces and distances.
//!
//! Four concrete point kinds are supported: scalars, vectors in R^k,
//! scalar fields discretized on a rectangular grid (with quadrature L2
//! distance) and n×k matrices (with Frobenius distance).

use crate::error::{GmsError, Result};

/// Rectangular grid over [x_min, x_max] × [y_min, y_max] with nx × ny cells.
/// Field values are stored row-major in x (index i*ny + j), one value per
/// cell, evaluated at the cell midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) || nx == 0 || ny == 0 {
            return Err(GmsError::Config(format!(
                "invalid grid: [{x_min},{x_max}]x[{y_min},{y_max}], {nx}x{ny}"
            )));
        }
        Ok(Self { x_min, x_max, y_min, y_max, nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    /// Midpoint-rule cell area used as the quadrature weight.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Midpoint coordinates of cell (i, j).
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_min + (i as f64 + 0.5) * self.dx(),
            self.y_min + (j as f64 + 0.5) * self.dy(),
        )
    }
}

/// A point of the output space.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
    Field { grid: GridSpec, values: Vec<f64> },
    Matrix { rows: usize, cols: usize, values: Vec<f64> },
}

impl Point {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Point::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    /// Dense coordinates of the point, whatever its kind.
    pub fn coords(&self) -> &[f64] {
        match self {
            Point::Scalar(v) => std::slice::from_ref(v),
            Point::Vector(v) => v,
            Point::Field { values, .. } => values,
            Point::Matrix { values, .. } => values,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Point::Scalar(_) => "scalar",
            Point::Vector(_) => "vector",
            Point::Field { .. } => "field",
            Point::Matrix { .. } => "matrix",
        }
    }
}

/// A metric space over one of the point kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpace {
    Scalar,
    Vector { dim: usize },
    Grid { spec: GridSpec },
    Matrix { rows: usize, cols: usize },
}

impl MetricSpace {
    pub fn validate_point(&self, p: &Point) -> Result<()> {
        let ok = match (self, p) {
            (MetricSpace::Scalar, Point::Scalar(_)) => true,
            (MetricSpace::Vector { dim }, Point::Vector(v)) => v.len() == *dim,
            (MetricSpace::Grid { spec }, Point::Field { grid, values }) => {
                grid == spec && values.len() == spec.len()
            }
            (MetricSpace::Matrix { rows, cols }, Point::Matrix { rows: r, cols: c, values }) => {
                r == rows && c == cols && values.len() == rows * cols
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(GmsError::Shape(format!(
                "point of kind {} does not belong to space {:?}",
                p.kind_name(),
                self
            )))
        }
    }

    /// Quadrature weight applied to squared coordinate differences
    /// (1 except for grid fields, where it is the cell area).
    pub fn quad_weight(&self) -> f64 {
        match self {
            MetricSpace::Grid { spec } => spec.cell_area(),
            _ => 1.0,
        }
    }

    /// Distance between two points of the space.
    ///
    /// Scalar/vector: Euclidean; grid fields: midpoint-rule approximation of
    /// the L2 field distance; matrices: Frobenius.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(self.distance_sq(x, y)?.sqrt())
    }

    /// Squared distance; cheaper when only comparisons are needed.
    pub fn distance_sq(&self, x: &Point, y: &Point) -> Result<f64> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        let (a, b) = (x.coords(), y.coords());
        let mut s = 0.0;
        for (u, v) in a.iter().zip(b.iter()) {
            let d = u - v;
            s += d * d;
        }
        Ok(self.quad_weight() * s)
    }

    /// Linear midpoint of two points. Defined for vector and field points
    /// only; scalar and matrix spaces report an unsupported operation.
    pub fn midpoint(&self, x: &Point, y: &Point) -> Result<Point> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        match self {
            MetricSpace::Vector { .. } => {
                let v = x
                    .coords()
                    .iter()
                    .zip(y.coords())
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                Ok(Point::Vector(v))
            }
            MetricSpace::Grid { spec } => {
                let values = x
                    .coords()
                    .iter()
                    .zip(y.coords())
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                Ok(Point::Field { grid: *spec, values })
            }
            MetricSpace::Scalar | MetricSpace::Matrix { .. } => Err(GmsError::Unsupported(
                format!("midpoint is not available on {:?}", self),
            )),
        }
    }
}
