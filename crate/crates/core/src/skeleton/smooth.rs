use std::collections::BTreeSet;

use super::{SkeletonFrame, SkeletonSequence, MOUTH};
use crate::error::{Error, Result};
use crate::real::Real;

/// Five frames (200 ms at 25 FPS).
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;

/// Centered moving average over time, with the window truncated at the
/// sequence ends. Keypoints in `exclude` (the mouth when `None`) are copied
/// through untouched; confidences are never modified.
pub fn smooth<T: Real>(
    seq: &SkeletonSequence<T>,
    window: usize,
    exclude: Option<&BTreeSet<usize>>,
) -> Result<SkeletonSequence<T>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("smoothing window must be odd and positive, got {window}")));
    }
    seq.validate()?;
    let mouth: BTreeSet<usize>;
    let exclude = match exclude {
        Some(set) => set,
        None => {
            mouth = MOUTH.collect();
            &mouth
        }
    };
    let n = seq.len();
    let half = window / 2;
    let k = seq.num_keypoints();
    let mut frames: Vec<SkeletonFrame<T>> = seq.frames.clone();
    if window == 1 {
        return Ok(SkeletonSequence { frames, fps: seq.fps });
    }
    for kp in (0..k).filter(|i| !exclude.contains(i)) {
        for (f, out) in frames.iter_mut().enumerate() {
            let lo = f.saturating_sub(half);
            let hi = (f + half + 1).min(n);
            let count = T::of_usize(hi - lo);
            let mut sum = [T::zero(); 2];
            for g in &seq.frames[lo..hi] {
                sum[0] += g.coords[kp][0];
                sum[1] += g.coords[kp][1];
            }
            out.coords[kp] = [sum[0] / count, sum[1] / count];
        }
    }
    Ok(SkeletonSequence { frames, fps: seq.fps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::NUM_KEYPOINTS;

    fn wave(n: usize) -> SkeletonSequence<f64> {
        let frames = (0..n)
            .map(|f| {
                let mut fr = SkeletonFrame::uniform([0.5, 0.5]);
                for (i, p) in fr.coords.iter_mut().enumerate() {
                    let tri = (f % 6) as f64;
                    let tri = if tri > 3.0 { 6.0 - tri } else { tri };
                    *p = [0.01 * i as f64 + 0.1 * tri, 0.2 * tri - 0.001 * i as f64];
                }
                fr
            })
            .collect();
        SkeletonSequence::new(frames).unwrap()
    }

    #[test]
    fn identity_window() {
        let s = wave(20);
        assert_eq!(smooth(&s, 1, None).unwrap(), s);
    }

    #[test]
    fn constant_sequence_is_fixed_point() {
        let s = SkeletonSequence::new(vec![SkeletonFrame::uniform([0.25f64, 0.75]); 12]).unwrap();
        for w in [3, 5, 31] {
            let out = smooth(&s, w, None).unwrap();
            for fr in &out.frames {
                for p in &fr.coords {
                    assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn interior_matches_direct_mean() {
        let s = wave(30);
        let out = smooth(&s, 5, None).unwrap();
        for f in 2..28 {
            let kp = 3;
            let expect: f64 = (f - 2..=f + 2).map(|g| s.frames[g].coords[kp][1]).sum::<f64>() / 5.0;
            assert!((out.frames[f].coords[kp][1] - expect).abs() < 1e-12);
        }
        // boundary frame 0 averages frames 0..=2
        let expect0: f64 = (0..3).map(|g| s.frames[g].coords[3][0]).sum::<f64>() / 3.0;
        assert!((out.frames[0].coords[3][0] - expect0).abs() < 1e-12);
    }

    #[test]
    fn mouth_is_bit_identical() {
        let s = wave(25);
        let out = smooth(&s, 9, None).unwrap();
        for (a, b) in s.frames.iter().zip(&out.frames) {
            for i in MOUTH {
                assert_eq!(a.coords[i][0].to_bits(), b.coords[i][0].to_bits());
                assert_eq!(a.coords[i][1].to_bits(), b.coords[i][1].to_bits());
            }
            assert_eq!(a.confidence, b.confidence);
        }
        assert_ne!(s.frames[0].coords[0], out.frames[0].coords[0]);
        assert_eq!(s.frames[0].coords.len(), NUM_KEYPOINTS);
    }

    #[test]
    fn even_window_rejected_and_oversized_window_is_global_mean() {
        let s = wave(7);
        assert!(smooth(&s, 4, None).is_err());
        assert!(smooth(&s, 0, None).is_err());
        let out = smooth(&s, 101, None).unwrap();
        let mean: f64 = s.frames.iter().map(|f| f.coords[2][0]).sum::<f64>() / 7.0;
        for fr in &out.frames {
            assert!((fr.coords[2][0] - mean).abs() < 1e-12);
        }
    }
}
