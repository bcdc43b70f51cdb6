//! Seeded synthetic data with known ground truth.
//!
//! A world is a set of upright boxes scattered around a rectangular loop road.
//! Sequences drive the loop with a camera rig, producing trajectories,
//! sensor-frame annotations and point clouds in exactly the formats the
//! curation stage reads. Features stand in for an image encoder: an instance
//! base vector plus weather, viewpoint and noise terms.

mod dataset;
mod features;
mod sequence;
mod world;

pub use dataset::{frame_inputs, gen_dataset, GtObservation, SynthConfig, SynthDataset};
pub use features::{gen_feature, ConditionModel};
pub use sequence::{camera_pose, gen_sequence, optical_rig, CloudSpec, PathSpec, SynthFrame, SynthSequence};
pub use world::{gen_world, loop_point, ClassSpec, WorldSpec};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(
        "could not place instance {placed} of {requested} after {attempts} attempts; relax spacing or enlarge the area"
    )]
    Infeasible { placed: usize, requested: usize, attempts: usize },
    #[error("invalid synthetic config: {0}")]
    Config(String),
}
