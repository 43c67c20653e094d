//! Toy speakers for tests, demos and the `synth` command.
//!
//! A clip pairs a whole-body skeleton track with 768-d features. Two smooth
//! control signals are written into fixed feature columns; every moving part
//! of the skeleton is a deterministic function of them, so the motion is
//! fully predictable from the audio plus the speaker's body shape.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{synthetic_features, AudioFeatureSequence};
use crate::dataset::{ColorHistogram, HIST_BINS};
use crate::real::Real;
use crate::skeleton::{SkeletonFrame, SkeletonSequence, FPS, LEFT_WRIST, NUM_KEYPOINTS, RIGHT_WRIST};

/// Feature columns carrying the primary signal (drives the left wrist).
pub const SIGNAL_COLUMNS: std::ops::Range<usize> = 0..16;
/// Feature columns carrying the secondary signal (head, sway, right arm).
pub const SECONDARY_COLUMNS: std::ops::Range<usize> = 16..32;
/// Vertical left-wrist travel per unit of primary signal.
pub const WRIST_GAIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySpeaker {
    pub shoulder_width: f64,
    /// Neck position in normalized crop coordinates.
    pub center: [f64; 2],
}

impl ToySpeaker {
    pub fn new(shoulder_width: f64) -> Self {
        Self { shoulder_width, center: [0.5, 0.45] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyClip<T> {
    pub id: String,
    pub skeleton: SkeletonSequence<T>,
    pub features: AudioFeatureSequence<T>,
    /// Primary signal per frame, in [-1, 1].
    pub signal: Vec<f64>,
}

/// Smooth signal in [-1, 1]: three random sinusoids between 0.2 and 1.5 Hz.
pub fn smooth_signal(frames: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.random_range(0.3..1.0), rng.random_range(0.2..1.5), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let raw: Vec<f64> = (0..frames)
        .map(|f| {
            let t = f as f64 / FPS as f64;
            parts.iter().map(|(a, hz, ph)| a * (2.0 * PI * hz * t + ph).sin()).sum()
        })
        .collect();
    let peak = raw.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    raw.iter().map(|v| v / peak).collect()
}

/// Pose of `speaker` driven by primary signal `s` and secondary signal `r`.
pub fn toy_frame(speaker: &ToySpeaker, s: f64, r: f64) -> SkeletonFrame<f64> {
    let w = speaker.shoulder_width;
    let [cx, cy] = speaker.center;
    let cx = cx + 0.01 * r;
    let cy = cy + 0.006 * r;
    let mut p = vec![[0.0f64; 2]; NUM_KEYPOINTS];
    let nose = [cx + 0.008 * r, cy - 0.75 * w + 0.01 * r];
    p[0] = nose;
    let f = 0.4 * w;
    p[1] = [nose[0] + 0.12 * f, nose[1] - 0.12 * f];
    p[2] = [nose[0] - 0.12 * f, nose[1] - 0.12 * f];
    p[3] = [nose[0] + 0.35 * f, nose[1] - 0.05 * f];
    p[4] = [nose[0] - 0.35 * f, nose[1] - 0.05 * f];
    p[5] = [cx + w / 2.0, cy + 0.008 * r];
    p[6] = [cx - w / 2.0, cy - 0.008 * r];
    p[7] = [cx + 0.7 * w, cy + 0.6 * w + 0.5 * WRIST_GAIN * s];
    p[8] = [cx - 0.7 * w + 0.02 * r, cy + 0.6 * w];
    p[9] = [cx + 0.6 * w, cy + 1.1 * w + WRIST_GAIN * s];
    p[10] = [cx - 0.6 * w + 0.04 * r, cy + 1.1 * w - 0.02 * r];
    p[11] = [cx + 0.35 * w, cy + 1.5 * w];
    p[12] = [cx - 0.35 * w, cy + 1.5 * w];
    p[13] = [cx + 0.37 * w, cy + 2.2 * w];
    p[14] = [cx - 0.37 * w, cy + 2.2 * w];
    p[15] = [cx + 0.38 * w, cy + 2.9 * w];
    p[16] = [cx - 0.38 * w, cy + 2.9 * w];
    for (k, (ankle, side)) in [(15usize, 1.0f64), (16, -1.0)].into_iter().enumerate() {
        let a = p[ankle];
        p[17 + 3 * k] = [a[0] + side * 0.15 * w, a[1] + 0.05 * w];
        p[18 + 3 * k] = [a[0] + side * 0.25 * w, a[1] + 0.04 * w];
        p[19 + 3 * k] = [a[0] - side * 0.05 * w, a[1] + 0.02 * w];
    }
    // Face: jaw, brows, nose bridge and eyes on fixed ellipses around the
    // nose; the mouth (last 20 points) opens with |s|.
    for i in 0..17 {
        let th = PI * (0.1 + 0.8 * i as f64 / 16.0);
        p[23 + i] = [nose[0] - f * 0.5 * th.cos(), nose[1] + f * 0.55 * th.sin() - 0.1 * f];
    }
    for i in 0..10 {
        let side = if i < 5 { -1.0 } else { 1.0 };
        let j = (i % 5) as f64;
        p[40 + i] = [nose[0] + side * f * (0.1 + 0.07 * j), nose[1] - 0.3 * f - 0.02 * f * (2.0 - (j - 2.0).abs())];
    }
    for i in 0..9 {
        let (dx, dy) = if i < 4 { (0.0, -0.2 + 0.05 * i as f64) } else { (0.04 * (i as f64 - 6.0), 0.02) };
        p[50 + i] = [nose[0] + dx * f, nose[1] + dy * f];
    }
    for i in 0..12 {
        let side = if i < 6 { -1.0 } else { 1.0 };
        let th = 2.0 * PI * (i % 6) as f64 / 6.0;
        p[59 + i] = [nose[0] + side * 0.2 * f + 0.06 * f * th.cos(), nose[1] - 0.18 * f + 0.03 * f * th.sin()];
    }
    let open = 0.04 * f + 0.06 * f * s.abs();
    for i in 0..20 {
        let (n, k) = if i < 12 { (12.0, i as f64) } else { (8.0, (i - 12) as f64) };
        let scale = if i < 12 { 1.0 } else { 0.6 };
        let th = 2.0 * PI * k / n;
        p[71 + i] = [nose[0] + scale * 0.2 * f * th.cos(), nose[1] + 0.3 * f + scale * open * th.sin()];
    }
    let (sin, cos) = (0.15 * r).sin_cos();
    for i in (1..=4).chain(23..=90) {
        let [dx, dy] = [p[i][0] - nose[0], p[i][1] - nose[1]];
        p[i] = [nose[0] + cos * dx - sin * dy, nose[1] + sin * dx + cos * dy];
    }
    // Hands: five fingers fanning away from each wrist, curling with s or r.
    let hand = 0.35 * w;
    for (base, wrist, side, curl) in [(91usize, LEFT_WRIST, 1.0f64, s), (112, RIGHT_WRIST, -1.0, r)] {
        let wp = p[wrist];
        p[base] = wp;
        for finger in 0..5 {
            let mut dir = PI / 2.0 + side * (0.6 - 0.3 * finger as f64) + 0.2 * curl;
            let mut at = wp;
            for joint in 0..4 {
                let len = hand * if joint == 0 { 0.35 } else { 0.2 };
                at = [at[0] + len * dir.cos(), at[1] + len * dir.sin()];
                p[base + 1 + finger * 4 + joint] = at;
                dir += side * 0.15 * curl;
            }
        }
    }
    SkeletonFrame { coords: p, confidence: vec![1.0; NUM_KEYPOINTS] }
}

/// A clip of `frames` frames at 25 FPS. The features come from
/// [`synthetic_features`] seeded by `audio_seed` with the two control
/// signals written into their columns; speakers sharing `audio_seed` share
/// identical features.
pub fn toy_clip<T: Real>(id: &str, speaker: &ToySpeaker, frames: usize, audio_seed: u64) -> ToyClip<T> {
    let signal = smooth_signal(frames, audio_seed.wrapping_mul(2).wrapping_add(1));
    let secondary = smooth_signal(frames, audio_seed.wrapping_mul(2).wrapping_add(2));
    let mut values: Array2<T> = synthetic_features::<T>(frames, FPS as f64, audio_seed).values;
    for (f, mut row) in values.rows_mut().into_iter().enumerate() {
        for c in SIGNAL_COLUMNS {
            row[c] = T::of(2.0 * signal[f]);
        }
        for c in SECONDARY_COLUMNS {
            row[c] = T::of(2.0 * secondary[f]);
        }
    }
    let frames_out = (0..frames)
        .map(|f| {
            let fr = toy_frame(speaker, signal[f], secondary[f]);
            SkeletonFrame {
                coords: fr.coords.iter().map(|&[x, y]| [T::of(x), T::of(y)]).collect(),
                confidence: vec![T::one(); NUM_KEYPOINTS],
            }
        })
        .collect();
    ToyClip {
        id: id.to_string(),
        skeleton: SkeletonSequence { frames: frames_out, fps: FPS },
        features: AudioFeatureSequence { values, source_rate: FPS as f64 },
        signal,
    }
}

/// Soft histogram of a flat color: each channel spreads over the bins as a
/// Gaussian of standard deviation `spread` (unit intensity range).
pub fn color_histogram(rgb: [f64; 3], spread: f64) -> ColorHistogram {
    let mut h = [0.0; 3 * HIST_BINS];
    for (ch, &mu) in rgb.iter().enumerate() {
        for b in 0..HIST_BINS {
            let center = (b as f64 + 0.5) / HIST_BINS as f64;
            h[ch * HIST_BINS + b] = 1000.0 * (-0.5 * ((center - mu) / spread).powi(2)).exp();
        }
    }
    h
}

/// Histogram stream whose color drifts slowly within shots and jumps at
/// every index in `cuts` (at least 0.4 in some channel).
pub fn shot_histograms(frames: usize, cuts: &[usize], seed: u64) -> Vec<ColorHistogram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut color: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.9));
    (0..frames)
        .map(|f| {
            if cuts.contains(&f) {
                let old = color;
                while (0..3).map(|c| (color[c] - old[c]).abs()).fold(0.0, f64::max) < 0.4 {
                    color = std::array::from_fn(|_| rng.random_range(0.1..0.9));
                }
            } else {
                for c in &mut color {
                    *c = (*c + rng.random_range(-0.004..0.004)).clamp(0.05, 0.95);
                }
            }
            color_histogram(color, 0.06)
        })
        .collect()
}

/// Primary signal as it appears in a feature matrix.
pub fn read_signal<T: Real>(features: &Array2<T>) -> Vec<f64> {
    features.rows().into_iter().map(|r| r[SIGNAL_COLUMNS.start].f64() / 2.0).collect()
}

/// `n` clips for speakers with widths spread evenly over [0.2, 0.3].
pub fn toy_corpus<T: Real>(n: usize, frames: usize, seed: u64) -> Vec<ToyClip<T>> {
    (0..n)
        .map(|i| {
            let w = if n > 1 { 0.2 + 0.1 * i as f64 / (n - 1) as f64 } else { 0.25 };
            toy_clip(&format!("toy{i:03}"), &ToySpeaker::new(w), frames, seed.wrapping_add(i as u64 * 7919))
        })
        .collect()
}
