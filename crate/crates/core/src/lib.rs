//! Object re-identification toolkit built around a pluggable encoder.
//!
//! The crate covers the full data path for learning instance-level object
//! representations from robot logs:
//!
//! - [`geometry`]: SE(3) poses, pinhole cameras and the ellipsoid / dual-quadric
//!   projection chain that turns 3D boxes into tight 2D boxes.
//! - [`curation`]: per-frame annotations to globally unique instances (pose
//!   interpolation, DBSCAN, robust box fitting) and per-image observations.
//! - [`patchgen`]: contextual square patches and training augmentations.
//! - [`metric`]: projection head, supervised-contrastive and triplet losses with
//!   analytic gradients, SGD with cosine annealing and early stopping.
//! - [`retrieval`]: stratified retrieval evaluation (mAP, top-k, CMC).
//! - [`synthgen`]: seeded synthetic worlds, trajectories, clouds and features.
//! - [`formats`]: on-disk formats shared by all stages.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curation;
pub mod formats;
pub mod geometry;
pub mod metric;
pub mod par;
pub mod patchgen;
pub mod retrieval;
pub mod seed;
pub mod synthgen;

pub use geometry::{BBox2D, Box3D, CameraIntrinsics, DualConic, DualQuadric, Ellipsoid, Pose};

use thiserror::Error;

/// Umbrella error for callers that drive several stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Curation(#[from] curation::CurationError),
    #[error(transparent)]
    Patch(#[from] patchgen::PatchError),
    #[error(transparent)]
    Metric(#[from] metric::MetricError),
    #[error(transparent)]
    Retrieval(#[from] retrieval::RetrievalError),
    #[error(transparent)]
    Synth(#[from] synthgen::SynthError),
    #[error(transparent)]
    Format(#[from] formats::FormatError),
}
