//! Desk-scale laboratory for ensemble learning over direct point-set classifiers.
//!
//! The crate provides everything needed to run ensemble experiments on
//! unordered 3D point sets end to end:
//!
//! - [`numerics`] — deterministic dense linear algebra, a portable seeded RNG,
//!   flat-parameter MLP forward/backward, and a finite-difference gradient
//!   checker.
//! - [`pointcloud`] — the point-cloud data model, synthetic shape generators,
//!   augmentation, farthest point sampling, k-NN grouping, dataset splits and
//!   bagging samplers, and line-oriented dataset I/O.
//! - [`models`] — three small permutation-invariant classifier families
//!   (sum-pooling, max-pooling, and one-level hierarchical) with seeded
//!   deterministic training, an explicit encoder/classifier split, and model
//!   serialization.
//! - [`ensemble`] — score aggregation by raw-mean, soft and hard voting,
//!   k-subset combination statistics, score standardization, weighted mixing
//!   with constrained grid search, and bagging experiment orchestration.
//! - [`evaluate`] — instance accuracy, mean class accuracy, per-class deltas,
//!   and best-per-class ranking.
//! - [`pipeline`] — a toy three-stage detector (segmentation, centering, box
//!   estimation) on synthetic scenes, with last-module and all-module
//!   ensembling and rotated-box IoU scoring.
//!
//! Every operation is a pure function of its explicit inputs, seeds included:
//! repeated invocation is bit-identical. That makes whole experiments
//! reproducible from a single seed.

pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod models;
pub mod numerics;
pub mod pipeline;
pub mod pointcloud;

pub use error::{Error, Result};
