use serde::{Deserialize, Serialize};

use crate::audio::AUDIO_DIM;
use crate::error::{Error, Result};
use crate::skeleton::POSE_DIM;

/// How the audio condition reaches the transformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditioningMode {
    /// Audio features concatenated to each frame token (one-to-one with frames).
    FeatureConcat,
    /// Ablation: audio enters through a cross-attention sublayer per block.
    CrossAttention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    Full,
    /// Diagnostic: self-attention weights replaced by the identity, so
    /// tokens never exchange information.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiserConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Largest frame count the model accepts.
    pub max_frames: usize,
    pub pose_dim: usize,
    pub audio_dim: usize,
    pub time_embed_dim: usize,
    /// Hidden width of the feed-forward sublayer as a multiple of `d_model`.
    pub mlp_ratio: usize,
    pub conditioning: ConditioningMode,
    pub use_reference: bool,
    pub attention: AttentionMode,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            d_model: 256,
            n_layers: 8,
            n_heads: 4,
            max_frames: 400,
            pose_dim: POSE_DIM,
            audio_dim: AUDIO_DIM,
            time_embed_dim: 128,
            mlp_ratio: 4,
            conditioning: ConditioningMode::FeatureConcat,
            use_reference: true,
            attention: AttentionMode::Full,
        }
    }
}

impl DenoiserConfig {
    /// Small instance used by tests and toy runs.
    pub fn tiny(d_model: usize, n_layers: usize) -> Self {
        Self { d_model, n_layers, n_heads: 4, time_embed_dim: d_model, max_frames: 128, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.d_model,
            self.n_layers,
            self.n_heads,
            self.max_frames,
            self.pose_dim,
            self.audio_dim,
            self.time_embed_dim,
            self.mlp_ratio,
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("denoiser dimensions must be positive: {self:?}")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidArgument(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !self.time_embed_dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument("time_embed_dim must be even".into()));
        }
        if self.attention == AttentionMode::Identity && self.conditioning == ConditioningMode::CrossAttention {
            return Err(Error::InvalidArgument(
                "identity attention is only defined for feature_concat conditioning".into(),
            ));
        }
        Ok(())
    }

    /// Width of one input token.
    pub fn token_width(&self) -> usize {
        match self.conditioning {
            ConditioningMode::FeatureConcat => self.pose_dim + self.audio_dim,
            ConditioningMode::CrossAttention => self.pose_dim,
        }
    }

    pub fn mlp_dim(&self) -> usize {
        self.mlp_ratio * self.d_model
    }

    /// Index of the first frame token (1 when a reference token leads).
    pub fn frame_offset(&self) -> usize {
        usize::from(self.use_reference)
    }
}
