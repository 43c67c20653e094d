//! Fixtures shared by the integration test targets.

#![allow(dead_code)]

use gesture_skel::checkpoint::Checkpoint;
use gesture_skel::diffusion::ScheduleKind;
use gesture_skel::skeleton::{NormalizationStats, RootMap, SkeletonFrame, SkeletonSequence, NUM_KEYPOINTS};
use gesture_skel::synthetic::ToyClip;
use gesture_skel::trainer::{make_windows, prepare_clips, Clip, TrainConfig, Trainer, TrainingExample};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Frames per toy window.
pub const TOY_FRAMES: usize = 32;

/// Two-layer, width-64 model trained on whole 32-frame toy clips.
pub fn toy_config(learning_rate: f64, diffusion_steps: usize, total_steps: u64, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate,
        batch_size: 8,
        total_steps,
        window_frames: TOY_FRAMES,
        window_stride: TOY_FRAMES,
        seed,
        schedule: ScheduleKind::Cosine,
        diffusion_steps,
        d_model: 64,
        n_layers: 2,
        n_heads: 4,
        time_embed_dim: 64,
        mlp_ratio: 4,
        max_frames: TOY_FRAMES,
        ..TrainConfig::default()
    }
}

pub fn prepare(clips: &[ToyClip<f32>]) -> (Vec<Clip<f32>>, NormalizationStats<f32>) {
    let raw = clips.iter().map(|c| (c.id.clone(), c.skeleton.clone(), c.features.clone())).collect();
    prepare_clips(raw, &RootMap::default()).unwrap()
}

pub fn windows(clips: &[Clip<f32>], config: &TrainConfig) -> Vec<TrainingExample<f32>> {
    clips.iter().flat_map(|c| make_windows(c, config.window_frames, config.window_stride)).collect()
}

/// Trains for `config.total_steps` and returns the checkpoint with the loss
/// of every step.
pub fn train_toy(clips: &[ToyClip<f32>], config: TrainConfig) -> (Checkpoint<f32>, Vec<f64>) {
    let (prepared, stats) = prepare(clips);
    let examples = windows(&prepared, &config);
    let mut trainer = Trainer::new(config, examples).unwrap();
    let losses = (0..trainer.config.total_steps).map(|_| trainer.step().unwrap()).collect();
    (trainer.checkpoint(&stats, &RootMap::default()), losses)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Whole-body frame with coordinates uniform in [-0.5, 1.5] and confidences
/// uniform in [0, 1].
pub fn random_frame(rng: &mut ChaCha8Rng) -> SkeletonFrame<f64> {
    SkeletonFrame {
        coords: (0..NUM_KEYPOINTS).map(|_| [rng.random_range(-0.5..1.5), rng.random_range(-0.5..1.5)]).collect(),
        confidence: (0..NUM_KEYPOINTS).map(|_| rng.random_range(0.0..=1.0)).collect(),
    }
}

pub fn random_sequence(frames: usize, seed: u64) -> SkeletonSequence<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SkeletonSequence::new((0..frames).map(|_| random_frame(&mut rng)).collect()).unwrap()
}

/// Pseudo-random image in [0, 1] from the C library's classic LCG, filled
/// row-major over (h, w, c). The same generator produced the reference SSIM
/// values in the metric tests.
pub fn lcg_image(h: usize, w: usize, c: usize, seed: u64) -> Array3<f64> {
    let mut s = seed;
    Array3::from_shape_simple_fn((h, w, c), || {
        s = (s.wrapping_mul(1_103_515_245).wrapping_add(12_345)) % (1 << 31);
        ((s >> 8) % 256) as f64 / 255.0
    })
}

/// Three image pairs with SSIM values computed by scikit-image
/// (`structural_similarity` with Gaussian weights, σ = 1.5, population
/// covariance, unit data range).
pub fn reference_pairs() -> Vec<(Array3<f64>, Array3<f64>, f64)> {
    let a1 = lcg_image(32, 32, 1, 1);
    let b1 = &a1 * 0.7 + &lcg_image(32, 32, 1, 2) * 0.3;
    let a2 = lcg_image(24, 20, 3, 3);
    let b2 = lcg_image(24, 20, 3, 4);
    let a3 = Array3::from_shape_fn((40, 36, 1), |(i, j, _)| ((7 * i + 3 * j) % 64) as f64 / 63.0);
    let b3 = &a3 * 0.9 + &lcg_image(40, 36, 1, 5) * 0.1;
    vec![(a1, b1, 0.895_746_289_920_226_2), (a2, b2, -0.016_177_626_075_920_652), (a3, b3, 0.985_120_858_046_664_5)]
}
