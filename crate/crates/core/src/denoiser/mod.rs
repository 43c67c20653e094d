//! Transformer denoiser predicting x₀ from (x_t, t, audio, reference).
//!
//! Frame tokens are `[x_t[f] ‖ audio[f]]`; an optional leading reference
//! token is `[s_r ‖ 0]`. A linear layer projects tokens to the model width,
//! fixed sinusoidal positions are added, and each block applies
//! self-attention and a feed-forward layer whose layer norms are modulated
//! (shift, scale, gate) by the timestep embedding.

mod config;
mod layers;
mod model;
mod params;

pub use config::{AttentionMode, ConditioningMode, DenoiserConfig};
pub use layers::{Attention, Linear};
pub use model::DenoiserInput;
pub use params::{Block, DenoiserParams};

use ndarray::{s, Array1, Array2};

use crate::diffusion::{x0_loss, Condition, Denoise};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser<T> {
    pub config: DenoiserConfig,
    pub params: DenoiserParams<T>,
}

impl<T: Real> Denoiser<T> {
    pub fn new(config: DenoiserConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = DenoiserParams::init(&config, seed);
        Ok(Self { config, params })
    }

    pub fn from_parts(config: DenoiserConfig, params: DenoiserParams<T>) -> Result<Self> {
        config.validate()?;
        let expected = DenoiserParams::<T>::zeros(&config);
        let shapes_match =
            expected.tensors().iter().zip(params.tensors()).all(|((a, x), (b, y))| *a == b && x.len() == y.len())
                && expected.tensors().len() == params.tensors().len();
        if !shapes_match {
            return Err(Error::Checkpoint("parameter shapes do not match the configuration".into()));
        }
        Ok(Self { config, params })
    }

    /// Builds model inputs. The reference is required when the config uses
    /// one and ignored otherwise.
    pub fn assemble_tokens(
        &self,
        x_t: &Array2<T>,
        reference: Option<&Array1<T>>,
        condition: Condition<'_, T>,
    ) -> Result<DenoiserInput<T>> {
        assemble_tokens(&self.config, &self.params.null_condition, x_t, reference, condition)
    }

    /// Evaluates the network; returns an F × pose_dim estimate of x₀.
    pub fn denoise(&self, input: &DenoiserInput<T>, t: usize) -> Result<Array2<T>> {
        self.check_input(input)?;
        Ok(model::forward(&self.config, &self.params, input, t).0)
    }

    /// Mean squared x₀ error of one example and its parameter gradient.
    pub fn loss_and_grad(&self, input: &DenoiserInput<T>, x0: &Array2<T>, t: usize) -> Result<(T, DenoiserParams<T>)> {
        self.check_input(input)?;
        let (pred, cache) = model::forward(&self.config, &self.params, input, t);
        let loss = x0_loss(x0, &pred)?;
        let scale = T::of(2.0) / T::of_usize(pred.len());
        let d_pred = (&pred - x0) * scale;
        let mut grad = DenoiserParams::zeros(&self.config);
        model::backward(&self.config, &self.params, input, &cache, &d_pred, &mut grad);
        Ok((loss, grad))
    }

    fn check_input(&self, input: &DenoiserInput<T>) -> Result<()> {
        if input.tokens.ncols() != self.config.token_width() {
            return Err(Error::dim("token width", self.config.token_width(), input.tokens.ncols()));
        }
        let frames = input.tokens.nrows().saturating_sub(self.config.frame_offset());
        if frames == 0 || frames > self.config.max_frames {
            return Err(Error::InvalidArgument(format!(
                "{frames} frames outside model capacity 1..={}",
                self.config.max_frames
            )));
        }
        match (&input.memory, self.config.conditioning) {
            (None, ConditioningMode::CrossAttention) => {
                Err(Error::InvalidArgument("cross-attention model needs an audio memory".into()))
            }
            (Some(m), ConditioningMode::CrossAttention) if m.nrows() != frames => {
                Err(Error::dim("audio memory rows", frames, m.nrows()))
            }
            _ => Ok(()),
        }
    }
}

pub fn assemble_tokens<T: Real>(
    config: &DenoiserConfig,
    null_condition: &Array1<T>,
    x_t: &Array2<T>,
    reference: Option<&Array1<T>>,
    condition: Condition<'_, T>,
) -> Result<DenoiserInput<T>> {
    let frames = x_t.nrows();
    let pose = config.pose_dim;
    if x_t.ncols() != pose {
        return Err(Error::dim("x_t width", pose, x_t.ncols()));
    }
    if let Condition::Audio(a) = condition {
        if a.nrows() != frames {
            return Err(Error::dim("audio frames", frames, a.nrows()));
        }
        if a.ncols() != config.audio_dim {
            return Err(Error::dim("audio width", config.audio_dim, a.ncols()));
        }
    }
    let reference = if config.use_reference {
        let r = reference.ok_or_else(|| Error::InvalidArgument("model expects a reference skeleton".into()))?;
        if r.len() != pose {
            return Err(Error::dim("reference width", pose, r.len()));
        }
        Some(r)
    } else {
        None
    };
    let offset = config.frame_offset();
    let width = config.token_width();
    let mut tokens = Array2::zeros((frames + offset, width));
    if let Some(r) = reference {
        tokens.slice_mut(s![0, 0..pose]).assign(r);
    }
    tokens.slice_mut(s![offset.., 0..pose]).assign(x_t);

    let null = matches!(condition, Condition::Null);
    let memory = match config.conditioning {
        ConditioningMode::FeatureConcat => {
            let mut audio_cols = tokens.slice_mut(s![offset.., pose..]);
            match condition {
                Condition::Audio(a) => audio_cols.assign(a),
                Condition::Null => {
                    for mut row in audio_cols.rows_mut() {
                        row.assign(null_condition);
                    }
                }
            }
            None
        }
        ConditioningMode::CrossAttention => Some(match condition {
            Condition::Audio(a) => a.clone(),
            Condition::Null => {
                let mut m = Array2::zeros((frames, config.audio_dim));
                for mut row in m.rows_mut() {
                    row.assign(null_condition);
                }
                m
            }
        }),
    };
    Ok(DenoiserInput { tokens, memory, null_condition: null })
}

impl<T: Real> Denoise<T> for Denoiser<T> {
    fn predict_x0(
        &self,
        x_t: &Array2<T>,
        reference: Option<&Array1<T>>,
        condition: Condition<'_, T>,
        t: usize,
    ) -> Result<Array2<T>> {
        let input = self.assemble_tokens(x_t, reference, condition)?;
        self.denoise(&input, t)
    }
}
