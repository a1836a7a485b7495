//! Parameterized test-function families T_a.
//!
//! A family is indexed by m points of the output space; the five built-in
//! kinds cover the classical Sobol index (m=0, identity on scalars), the
//! Cramér–von-Mises half-space indicators (m=1) and three two-parameter
//! ball indicator families on general metric spaces.

use crate::error::{GmsError, Result};
use crate::metric::{MetricSpace, Point};

/// Built-in family kinds. Two ball-radius conventions coexist on purpose:
/// `MetricBall` is centered at a1 with radius d(a1,a2), `MidpointBall` is
/// centered at the midpoint with radius d(a1,a2)/2. They induce different
/// indices, so callers must pick one explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// T(x) = x on scalar outputs; m = 0.
    SobolValue,
    /// T_a(x) = 1{x <= a} componentwise; m = 1.
    HalfSpaceCvm,
    /// T_{(a1,a2)}(x) = 1{d(x,a1) <= d(a1,a2)}; m = 2.
    MetricBall,
    /// T_{(a1,a2)}(x) = 1{d(x, mid(a1,a2)) <= d(a1,a2)/2}; m = 2.
    MidpointBall,
    /// T_{(a1,a2)}(x) = 1{max(d(x,a1), d(x,a2)) <= d(a1,a2)}; m = 2.
    IntersectionBall,
}

impl FamilyKind {
    /// Number of parameter points of the family.
    pub fn order(self) -> usize {
        match self {
            FamilyKind::SobolValue => 0,
            FamilyKind::HalfSpaceCvm => 1,
            FamilyKind::MetricBall | FamilyKind::MidpointBall | FamilyKind::IntersectionBall => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::SobolValue => "sobol_value",
            FamilyKind::HalfSpaceCvm => "half_space_cvm",
            FamilyKind::MetricBall => "metric_ball",
            FamilyKind::MidpointBall => "midpoint_ball",
            FamilyKind::IntersectionBall => "intersection_ball",
        }
    }

    /// Indicator families take values in {0,1}; SobolValue does not.
    pub fn is_indicator(self) -> bool {
        !matches!(self, FamilyKind::SobolValue)
    }
}

/// A test-function family bound to its metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFamily {
    pub kind: FamilyKind,
    pub space: MetricSpace,
}

impl TestFamily {
    pub fn new(kind: FamilyKind, space: MetricSpace) -> Result<Self> {
        match (kind, &space) {
            (FamilyKind::SobolValue, MetricSpace::Scalar) => {}
            (FamilyKind::SobolValue, other) => {
                return Err(GmsError::Config(format!(
                    "SobolValue requires scalar points, got {other:?}"
                )))
            }
            (FamilyKind::HalfSpaceCvm, MetricSpace::Scalar | MetricSpace::Vector { .. }) => {}
            (FamilyKind::HalfSpaceCvm, other) => {
                return Err(GmsError::Config(format!(
                    "HalfSpaceCvm requires scalar or vector points, got {other:?}"
                )))
            }
            _ => {}
        }
        Ok(Self { kind, space })
    }

    /// Number of parameter points m.
    pub fn m(&self) -> usize {
        self.kind.order()
    }

    /// Evaluate T_a(x). `a` must hold exactly m points of the family space.
    pub fn eval(&self, a: &[&Point], x: &Point) -> Result<f64> {
        if a.len() != self.m() {
            return Err(GmsError::InvalidArgument(format!(
                "family {} takes {} parameters, got {}",
                self.kind.name(),
                self.m(),
                a.len()
            )));
        }
        self.space.validate_point(x)?;
        match self.kind {
            FamilyKind::SobolValue => Ok(x.scalar().expect("validated scalar")),
            FamilyKind::HalfSpaceCvm => {
                self.space.validate_point(a[0])?;
                let le = x
                    .coords()
                    .iter()
                    .zip(a[0].coords())
                    .all(|(xi, ai)| xi <= ai);
                Ok(if le { 1.0 } else { 0.0 })
            }
            FamilyKind::MetricBall => {
                let r2 = self.space.distance_sq(a[0], a[1])?;
                let d2 = self.space.distance_sq(x, a[0])?;
                Ok(if d2 <= r2 { 1.0 } else { 0.0 })
            }
            FamilyKind::MidpointBall => {
                let mid = self.space.midpoint(a[0], a[1])?;
                // d(x, mid) <= d(a1,a2)/2, compared on squares
                let r2 = self.space.distance_sq(a[0], a[1])? / 4.0;
                let d2 = self.space.distance_sq(x, &mid)?;
                Ok(if d2 <= r2 { 1.0 } else { 0.0 })
            }
            FamilyKind::IntersectionBall => {
                let r2 = self.space.distance_sq(a[0], a[1])?;
                let d1 = self.space.distance_sq(x, a[0])?;
                let d2 = self.space.distance_sq(x, a[1])?;
                Ok(if d1.max(d2) <= r2 { 1.0 } else { 0.0 })
            }
        }
    }
}
