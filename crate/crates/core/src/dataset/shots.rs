use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

/// Bins per color channel.
pub const HIST_BINS: usize = 8;
pub const MIN_CLIP_SECS: usize = 5;
pub const MAX_CLIP_SECS: usize = 15;
pub const DEFAULT_SHOT_THRESHOLD: f64 = 0.5;

/// Per-frame RGB histogram: three channels of [`HIST_BINS`] counts, channel-major.
pub type ColorHistogram = [f64; 3 * HIST_BINS];

/// Sum over channels of ½·Σ (a − b)² / (a + b) on per-channel normalized
/// histograms. Ranges from 0 (identical) to 3 (disjoint in every channel).
pub fn chi2_distance(a: &ColorHistogram, b: &ColorHistogram) -> f64 {
    let mut d = 0.0;
    for ch in 0..3 {
        let sa: f64 = a[ch * HIST_BINS..(ch + 1) * HIST_BINS].iter().sum();
        let sb: f64 = b[ch * HIST_BINS..(ch + 1) * HIST_BINS].iter().sum();
        for k in ch * HIST_BINS..(ch + 1) * HIST_BINS {
            let x = if sa > 0.0 { a[k] / sa } else { 0.0 };
            let y = if sb > 0.0 { b[k] / sb } else { 0.0 };
            if x + y > 0.0 {
                d += 0.5 * (x - y) * (x - y) / (x + y);
            }
        }
    }
    d
}

/// Frame indices `f` where the histogram distance between frames `f − 1`
/// and `f` exceeds `threshold`.
pub fn detect_shots(histograms: &[ColorHistogram], threshold: f64) -> Vec<usize> {
    (1..histograms.len()).filter(|&f| chi2_distance(&histograms[f - 1], &histograms[f]) > threshold).collect()
}

/// Greedy split of every shot into ranges of 5-15 s; remainders shorter
/// than 5 s are dropped. Cuts outside `(0, total)` are ignored.
pub fn segment_clips(cuts: &[usize], total: usize, fps: usize) -> Vec<Range<usize>> {
    let (min, max) = (MIN_CLIP_SECS * fps, MAX_CLIP_SECS * fps);
    let mut bounds: Vec<usize> = cuts.iter().copied().filter(|&c| c > 0 && c < total).collect();
    bounds.sort_unstable();
    bounds.dedup();
    bounds.insert(0, 0);
    bounds.push(total);
    let mut out = Vec::new();
    if min == 0 {
        return out;
    }
    for shot in bounds.windows(2) {
        let mut start = shot[0];
        while shot[1] - start >= min {
            let end = (start + max).min(shot[1]);
            out.push(start..end);
            start = end;
        }
    }
    out
}

/// One line per frame with 24 whitespace-separated values.
pub fn read_histograms(path: &Path) -> Result<Vec<ColorHistogram>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let vals: Vec<f64> = line
                .split_ascii_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format("histogram", path, format!("line {}: {e}", n + 1)))?;
            let hist: ColorHistogram = vals.try_into().map_err(|v: Vec<f64>| {
                Error::format("histogram", path, format!("line {} has {} values, expected 24", n + 1, v.len()))
            })?;
            if hist.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::format(
                    "histogram",
                    path,
                    format!("line {} has a negative or non-finite bin", n + 1),
                ));
            }
            Ok(hist)
        })
        .collect()
}

pub fn write_histograms(path: &Path, histograms: &[ColorHistogram]) -> Result<()> {
    let text: String =
        histograms.iter().map(|h| h.iter().map(f64::to_string).collect::<Vec<_>>().join(" ") + "\n").collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
