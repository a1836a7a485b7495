//! Sensitivity indices for computer codes valued in general metric spaces.
//!
//! The index of a subset u of inputs integrates, over m random parameter
//! points, the Pick-Freeze covariance of a test function T_a, normalized by
//! its integrated variance. Classical first-order Sobol indices (m=0,
//! T(x)=x) and Cramér-von-Mises indices (m=1, half-space indicators) are
//! special cases; ball-indicator families (m=2) cover outputs in general
//! metric spaces such as L2 fields and matrix sets.
//!
//! Estimation rewrites the index as Psi(I1, I2, I3, I4) with Psi(x,y,z,t) =
//! (x-y)/(z-t) and estimates each integral by a U-statistic of order m+1 or
//! m+2 over one paired sample of size N — 2N code evaluations total,
//! whatever m. The estimator is asymptotically Gaussian; `inference`
//! provides the plug-in asymptotic variance and confidence intervals.

pub mod baselines;
pub mod diagnostics;
pub mod error;
pub mod family;
pub mod inference;
pub mod kahan;
pub mod kernels;
pub mod metric;
pub mod models;
pub mod sampling;
pub mod ustat;

pub use error::{GmsError, Result};
pub use family::{FamilyKind, TestFamily};
pub use metric::{GridSpec, MetricSpace, Point};
pub use sampling::{
    pick_freeze, sample_inputs, shared_pick_freeze, InputDist, InputModel, PairedSample, SubsetU,
};
pub use ustat::{
    complete_ustat, estimate_gms_index, incomplete_ustat, psi, IndexEstimate, UStatConfig,
    UStatMode,
};
