use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{cfg_combine, posterior_step, NoiseSchedule};
use crate::error::{Error, Result};
use crate::real::Real;

pub const DEFAULT_GUIDANCE: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub alpha: f64,
    /// Optional clamp of x̂₀ to ±`clip` (normalized units) before each step.
    pub clip_x0: Option<f64>,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self { alpha: DEFAULT_GUIDANCE, clip_x0: None }
    }
}

impl GuidanceConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self { alpha, ..Self::default() }
    }
}

/// Audio condition handed to a denoiser for one evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Condition<'a, T> {
    Audio(&'a Array2<T>),
    /// The learned null condition (unconditional branch).
    Null,
}

/// Anything that maps a noisy state to a clean-state estimate.
pub trait Denoise<T: Real>: Sync {
    fn predict_x0(
        &self,
        x_t: &Array2<T>,
        reference: Option<&Array1<T>>,
        condition: Condition<'_, T>,
        t: usize,
    ) -> Result<Array2<T>>;
}

/// Fills an array with standard normal draws in row-major order.
pub fn standard_normal<T: Real>(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<T> {
    Array2::from_shape_simple_fn(shape, || {
        let z: f64 = StandardNormal.sample(rng);
        T::of(z)
    })
}

/// Ancestral sampling with classifier-free guidance.
///
/// Randomness comes only from `seed`: x_T is drawn first (row-major), then
/// one noise array per step for t = T-1 down to 1. Each step evaluates the
/// conditional and null-conditional branches, mixes them with
/// [`cfg_combine`] and applies [`posterior_step`].
pub fn sample<T: Real, D: Denoise<T> + ?Sized>(
    denoiser: &D,
    reference: Option<&Array1<T>>,
    audio: &Array2<T>,
    pose_dim: usize,
    sched: &NoiseSchedule,
    guidance: &GuidanceConfig,
    seed: u64,
) -> Result<Array2<T>> {
    if !guidance.alpha.is_finite() || guidance.alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("guidance scale {} must be finite and >= 0", guidance.alpha)));
    }
    let frames = audio.nrows();
    if frames == 0 {
        return Err(Error::InvalidArgument("cannot sample zero frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = T::of(guidance.alpha);
    let mut x = standard_normal::<T>(&mut rng, (frames, pose_dim));
    for t in (0..sched.steps()).rev() {
        let cond = denoiser.predict_x0(&x, reference, Condition::Audio(audio), t)?;
        let uncond = denoiser.predict_x0(&x, reference, Condition::Null, t)?;
        let mut x0_hat = cfg_combine(&uncond, &cond, alpha)?;
        if let Some(c) = guidance.clip_x0 {
            let c = T::of(c);
            x0_hat.mapv_inplace(|v| v.max(-c).min(c));
        }
        let noise = (t > 0).then(|| standard_normal::<T>(&mut rng, (frames, pose_dim)));
        x = posterior_step(&x, &x0_hat, t, sched, noise.as_ref())?;
    }
    Ok(x)
}
