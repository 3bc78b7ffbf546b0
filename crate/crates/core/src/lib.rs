//! Batch fusion of smartphone inertial/GPS trip logs with video-frame timing.
//!
//! The library takes one CSV file per sensor modality plus a JSON metadata
//! file, places everything on a global UNIX timeline, derives kinematic
//! features (GPS speed, filtered accelerations, jerk, curvature), applies a
//! two-tier threshold rule system to label driving behaviour per frame, and
//! reproduces the associated validation statistics and supervised baselines.
//!
//! Modules follow the processing order:
//!
//! - [`ingest`]: parse and validate per-modality sensor logs
//! - [`align`]: global timeline, tolerance-bounded asof merge, GPS imputation,
//!   video frame mapping
//! - [`kinematics`]: speed, filtering, jerk, curvature, outlier flags
//! - [`rules`]: sub-behaviour detection and primary behaviour mapping
//! - [`stats`]: distribution reports, Pearson matrices, Kruskal-Wallis,
//!   chi-square independence, Levene
//! - [`baseline`]: group-aware splits, logistic regression, kNN, evaluation
//! - [`synth`]: scripted trip generator with an independent ground-truth
//!   labeller, used as the test oracle
//! - [`pipeline`]: per-trip and corpus-level drivers plus file artifact I/O
//!
//! Numeric kernels (special functions, statistical tests, filters, geodesic
//! distance) are generic over the scalar type through [`scalar::Real`];
//! the pipeline itself runs on [`Scalar`] because UNIX-epoch timestamps do
//! not fit in an `f32` mantissa.

pub mod align;
pub mod baseline;
pub mod ingest;
pub mod kinematics;
pub mod pipeline;
pub mod rules;
pub mod scalar;
pub mod special;
pub mod stats;
pub mod synth;

/// Concrete scalar used by the pipeline layers.
pub type Scalar = f64;

pub use align::{AlignedFrame, DtProfile};
pub use ingest::{GpsFix, Modality, RawSensorStream, TripMeta};
pub use kinematics::KinematicRecord;
pub use rules::{PrimaryBehaviour, RuleSet, SubBehaviour, SubBehaviourSet};
pub use scalar::Real;
