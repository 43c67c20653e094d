//! Audio-driven synthesis of 2D whole-body skeleton sequences with an
//! x₀-predicting diffusion transformer, plus the dataset curation and
//! evaluation tooling around it.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file name the common instantiations.

pub mod audio;
pub mod checkpoint;
pub mod dataset;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod generation;
pub mod metrics;
pub mod real;
pub mod skeleton;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use real::Real;

pub type SkeletonFrame32 = skeleton::SkeletonFrame<f32>;
pub type SkeletonSequence32 = skeleton::SkeletonSequence<f32>;
pub type LocalMotion32 = skeleton::LocalMotionSequence<f32>;
pub type AudioFeatures32 = audio::AudioFeatureSequence<f32>;
pub type Denoiser32 = denoiser::Denoiser<f32>;
pub type Denoiser64 = denoiser::Denoiser<f64>;
pub type Trainer32 = trainer::Trainer<f32>;
pub type Checkpoint32 = checkpoint::Checkpoint<f32>;
