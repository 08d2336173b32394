//! Hyperbolic Chamfer distance (HyperCD) and Chamfer baselines for point
//! clouds.
//!
//! * [`metrics`]: per-pair transforms, Poincaré distance, set distances.
//! * [`matching`]: exact nearest-neighbour correspondence (brute force and kd-tree).
//! * [`gradients`]: fixed-match gradients, the HyperCD weight, a finite-difference oracle.
//! * [`fitting`]: gradient-descent deformation of a point set toward a target.
//! * [`eval`]: F-Score, Hausdorff and Chamfer evaluation.
//! * [`bench`]: timing of full set-distance evaluations.
//! * [`io`], [`synth`]: file formats, synthetic shapes and partial-view cropping.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod eval;
pub mod fitting;
pub mod geometry;
pub mod gradients;
pub mod io;
pub mod kdtree;
pub mod matching;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, Point3, PointCloud};
pub use matching::{match_brute, match_indexed, MatchResult};
pub use metrics::{chamfer, chamfer_poincare, SetDistanceReport, TransformKind, TransformSpec};
