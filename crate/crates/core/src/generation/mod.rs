//! Inference from a checkpoint, pose export and pose-map rendering.

mod export;
mod render;

pub use export::{export_pose, import_pose, read_pose_text, write_pose_text, PoseVariant, POSE_TEXT_MAGIC};
pub use render::{render, render_frame, write_frames, RenderStyle, BODY_EDGES, DEFAULT_CONF_THRESHOLD, HAND_EDGES};

use std::path::PathBuf;

use ndarray::Array2;

use crate::audio::{align_to_frames, load_features, AudioFeatureSequence};
use crate::checkpoint::Checkpoint;
use crate::diffusion::{sample, GuidanceConfig, DEFAULT_GUIDANCE};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::{
    denormalize, from_local, normalize, to_local, LocalMotionSequence, SkeletonFrame, SkeletonSequence,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest<T> {
    pub checkpoint: PathBuf,
    /// Reference skeleton in global coordinates.
    pub reference: SkeletonFrame<T>,
    pub audio: PathBuf,
    pub alpha: f64,
    pub seed: u64,
    /// Defaults to the audio duration at 25 FPS.
    pub frames: Option<usize>,
}

impl<T: Real> GenerationRequest<T> {
    pub fn new(checkpoint: PathBuf, reference: SkeletonFrame<T>, audio: PathBuf) -> Self {
        Self { checkpoint, reference, audio, alpha: DEFAULT_GUIDANCE, seed: 0, frames: None }
    }
}

pub fn generate<T: Real>(req: &GenerationRequest<T>) -> Result<SkeletonSequence<T>> {
    let ckpt = Checkpoint::<T>::load(&req.checkpoint)?;
    let audio = load_features::<T>(&req.audio)?;
    generate_from(&ckpt, &req.reference, &audio, &GuidanceConfig::with_alpha(req.alpha), req.seed, req.frames)
}

/// [`generate`] with everything already in memory.
pub fn generate_from<T: Real>(
    ckpt: &Checkpoint<T>,
    reference: &SkeletonFrame<T>,
    audio: &AudioFeatureSequence<T>,
    guidance: &GuidanceConfig,
    seed: u64,
    frames: Option<usize>,
) -> Result<SkeletonSequence<T>> {
    let model = ckpt.inference_model();
    let config = &model.config;
    if audio.values.ncols() != config.audio_dim {
        return Err(Error::Checkpoint(format!(
            "audio has {} feature columns, model expects {}",
            audio.values.ncols(),
            config.audio_dim
        )));
    }
    let frames = frames.unwrap_or_else(|| audio.frame_count());
    if frames == 0 {
        return Err(Error::InvalidArgument("audio is shorter than one frame".into()));
    }
    if frames > config.max_frames {
        return Err(Error::InvalidArgument(format!(
            "{frames} frames exceed the model capacity of {}",
            config.max_frames
        )));
    }
    let aligned = align_to_frames(audio, frames)?;
    let ref_seq = SkeletonSequence::new(vec![reference.clone()])?;
    let ref_local = normalize(&to_local(&ref_seq, &ckpt.root_map)?, &ckpt.stats)?;
    let ref_row = ref_local.values.row(0).to_owned();
    let sched = ckpt.schedule.build()?;
    let x0 = sample(
        &model,
        config.use_reference.then_some(&ref_row),
        &aligned.values,
        config.pose_dim,
        &sched,
        guidance,
        seed,
    )?;
    decode(x0, ckpt)
}

/// Normalized local motion back to global skeletons with confidence 1.
pub fn decode<T: Real>(x0: Array2<T>, ckpt: &Checkpoint<T>) -> Result<SkeletonSequence<T>> {
    let lm = LocalMotionSequence::new(x0, ckpt.root_map)?;
    from_local(&denormalize(&lm, &ckpt.stats)?, &ckpt.root_map)
}
