//! Per-frame speech embeddings: file ingest, frame alignment and validation.
//!
//! The feature file starts with a fixed header followed by row-major
//! little-endian `f32` values:
//!
//! ```text
//! [u8; 8]  magic "GSKFEAT1"
//! u32 LE   rows
//! u32 LE   columns (always 768)
//! f32 LE   source rate (rows per second)
//! ```

use std::fmt;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::FPS;

pub const AUDIO_DIM: usize = 768;
pub const FEATURE_MAGIC: &[u8; 8] = b"GSKFEAT1";

#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatureSequence<T> {
    pub values: Array2<T>,
    /// Rows per second of `values`.
    pub source_rate: f64,
}

impl<T: Real> AudioFeatureSequence<T> {
    pub fn new(values: Array2<T>, source_rate: f64) -> Result<Self> {
        if values.ncols() != AUDIO_DIM {
            return Err(Error::dim("audio feature width", AUDIO_DIM, values.ncols()));
        }
        if !(source_rate.is_finite() && source_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("source rate {source_rate}")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "audio features",
                location: format!("row {}, col {}", pos / AUDIO_DIM, pos % AUDIO_DIM),
            });
        }
        Ok(Self { values, source_rate })
    }

    pub fn num_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn duration_secs(&self) -> f64 {
        self.values.nrows() as f64 / self.source_rate
    }

    /// Frame count covered at 25 FPS, `floor(25 * duration)`.
    pub fn frame_count(&self) -> usize {
        // tolerate representation error in rows / rate
        (FPS as f64 * self.duration_secs() + 1e-9).floor() as usize
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.num_rows() {
            return Err(Error::InvalidArgument(format!(
                "row range {range:?} outside {} feature rows",
                self.num_rows()
            )));
        }
        Ok(Self { values: self.values.slice(ndarray::s![range, ..]).to_owned(), source_rate: self.source_rate })
    }
}

pub fn write_features<T: Real>(path: &Path, feat: &AudioFeatureSequence<T>) -> Result<()> {
    let mut bytes = Vec::with_capacity(20 + 4 * feat.values.len());
    bytes.extend_from_slice(FEATURE_MAGIC);
    bytes.extend_from_slice(&(feat.num_rows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(feat.values.ncols() as u32).to_le_bytes());
    bytes.extend_from_slice(&(feat.source_rate as f32).to_le_bytes());
    for v in feat.values.iter() {
        bytes.extend_from_slice(&(v.f64() as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_features<T: Real>(path: &Path) -> Result<AudioFeatureSequence<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::format("feature", path, reason);
    if bytes.len() < 20 || &bytes[..8] != FEATURE_MAGIC {
        return Err(bad("missing GSKFEAT1 header".into()));
    }
    let word = |i: usize| <[u8; 4]>::try_from(&bytes[i..i + 4]).unwrap();
    let rows = u32::from_le_bytes(word(8)) as usize;
    let cols = u32::from_le_bytes(word(12)) as usize;
    let rate = f32::from_le_bytes(word(16)) as f64;
    if cols != AUDIO_DIM {
        return Err(Error::dim("audio feature width", AUDIO_DIM, cols));
    }
    if rows == 0 {
        return Err(bad("zero rows".into()));
    }
    let expected = 20 + 4 * rows * cols;
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let data: Vec<T> =
        bytes[20..].chunks_exact(4).map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64)).collect();
    let values = Array2::from_shape_vec((rows, cols), data).expect("length checked above");
    AudioFeatureSequence::new(values, rate).map_err(|e| bad(e.to_string()))
}

/// Resamples to exactly `frames` rows at 25 FPS by linear interpolation.
///
/// Source row `i` is taken to sit at time `(i + 0.5) / source_rate` and
/// output frame `f` at `(f + 0.5) / 25`; times outside the source support
/// clamp to the first or last row.
pub fn align_to_frames<T: Real>(feat: &AudioFeatureSequence<T>, frames: usize) -> Result<AudioFeatureSequence<T>> {
    if feat.num_rows() == 0 || frames == 0 {
        return Err(Error::InvalidArgument("alignment needs nonempty features and F >= 1".into()));
    }
    let n = feat.num_rows();
    let mut out = Array2::zeros((frames, feat.values.ncols()));
    for (f, mut row) in out.rows_mut().into_iter().enumerate() {
        let time = (f as f64 + 0.5) / FPS as f64;
        let pos = (time * feat.source_rate - 0.5).clamp(0.0, (n - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let w = pos - lo as f64;
        if w == 0.0 || lo == hi {
            row.assign(&feat.values.row(lo));
        } else {
            let (w_lo, w_hi) = (T::of(1.0 - w), T::of(w));
            ndarray::Zip::from(&mut row)
                .and(feat.values.row(lo))
                .and(feat.values.row(hi))
                .for_each(|o, &a, &b| *o = a * w_lo + b * w_hi);
        }
    }
    Ok(AudioFeatureSequence { values: out, source_rate: FPS as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureIssue {
    Width { found: usize },
    Length { expected: usize, found: usize },
    NonFinite { row: usize, col: usize },
}

impl fmt::Display for FeatureIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureIssue::Width { found } => write!(f, "feature width {found}, expected {AUDIO_DIM}"),
            FeatureIssue::Length { expected, found } => {
                write!(f, "length mismatch: {found} rows, expected {expected}")
            }
            FeatureIssue::NonFinite { row, col } => write!(f, "non-finite value at row {row}, col {col}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<FeatureIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Never fails; collects every problem found.
pub fn validate<T: Real>(values: &Array2<T>, expected_frames: usize) -> ValidationReport {
    let mut issues = Vec::new();
    if values.ncols() != AUDIO_DIM {
        issues.push(FeatureIssue::Width { found: values.ncols() });
    }
    if values.nrows() != expected_frames {
        issues.push(FeatureIssue::Length { expected: expected_frames, found: values.nrows() });
    }
    for ((row, col), v) in values.indexed_iter() {
        if !v.is_finite() {
            issues.push(FeatureIssue::NonFinite { row, col });
        }
    }
    ValidationReport { issues }
}

/// Deterministic stand-in for encoder output: a seeded Gaussian random walk
/// in 768 dimensions, scaled to roughly unit magnitude.
pub fn synthetic_features<T: Real>(rows: usize, source_rate: f64, seed: u64) -> AudioFeatureSequence<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = vec![0.0f64; AUDIO_DIM];
    let mut values = Array2::zeros((rows, AUDIO_DIM));
    for mut row in values.rows_mut() {
        for (s, out) in state.iter_mut().zip(row.iter_mut()) {
            let step: f64 = StandardNormal.sample(&mut rng);
            *s = 0.95 * *s + 0.3 * step;
            *out = T::of(*s);
        }
    }
    AudioFeatureSequence { values, source_rate }
}
