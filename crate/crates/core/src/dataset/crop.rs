use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::{SkeletonFrame, SkeletonSequence};

/// Output side of the resized crop in pixels.
pub const CROP_TARGET: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min: [self.min[0].min(other.min[0]), self.min[1].min(other.min[1])],
            max: [self.max[0].max(other.max[0]), self.max[1].max(other.max[1])],
        }
    }
}

/// Bounding box of keypoints at or above `conf_threshold`; `None` for
/// frames without any.
pub fn bbox_track<T: Real>(seq: &SkeletonSequence<T>, conf_threshold: f64) -> Vec<Option<BBox>> {
    seq.frames
        .iter()
        .map(|f| {
            f.coords
                .iter()
                .zip(&f.confidence)
                .filter(|(_, c)| c.f64() >= conf_threshold)
                .map(|(p, _)| BBox { min: [p[0].f64(), p[1].f64()], max: [p[0].f64(), p[1].f64()] })
                .reduce(|a, b| a.union(&b))
        })
        .collect()
}

/// Square crop in source pixels, resized to `target × target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropTransform {
    pub origin: [f64; 2],
    pub side: f64,
    pub target: u32,
}

impl CropTransform {
    /// Source pixels to [0, 1] crop coordinates.
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let s = self.target as f64 / self.side / self.target as f64;
        [(p[0] - self.origin[0]) * s, (p[1] - self.origin[1]) * s]
    }

    pub fn invert(&self, q: [f64; 2]) -> [f64; 2] {
        [q[0] * self.side + self.origin[0], q[1] * self.side + self.origin[1]]
    }
}

/// Square crop around the union of the boxes, grown by `margin` times its
/// side on every edge and clamped to a `frame_size` frame.
pub fn crop_and_resize(track: &[BBox], margin: f64, frame_size: [f64; 2]) -> Result<CropTransform> {
    if track.iter().any(|b| b.min.iter().chain(&b.max).any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("non-finite bounding box".into()));
    }
    let union = track
        .iter()
        .copied()
        .reduce(|a, b| a.union(&b))
        .ok_or_else(|| Error::InvalidArgument("empty bounding-box track".into()))?;
    let base = union.width().max(union.height());
    if !(base.is_finite() && base > 0.0) || !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("degenerate bounding box {union:?} or margin {margin}")));
    }
    let [fw, fh] = frame_size;
    let side = (base * (1.0 + 2.0 * margin)).min(fw).min(fh);
    if !(side > 0.0) {
        return Err(Error::InvalidArgument(format!("frame size {frame_size:?} leaves no room for a crop")));
    }
    let center = [(union.min[0] + union.max[0]) / 2.0, (union.min[1] + union.max[1]) / 2.0];
    let origin = [(center[0] - side / 2.0).max(0.0).min(fw - side), (center[1] - side / 2.0).max(0.0).min(fh - side)];
    Ok(CropTransform { origin, side, target: CROP_TARGET })
}

/// Maps every keypoint into crop coordinates; confidences are kept.
pub fn transform_keypoints<T: Real>(seq: &SkeletonSequence<T>, t: &CropTransform) -> SkeletonSequence<T> {
    SkeletonSequence {
        frames: seq
            .frames
            .iter()
            .map(|f| SkeletonFrame {
                coords: f
                    .coords
                    .iter()
                    .map(|p| {
                        let q = t.apply([p[0].f64(), p[1].f64()]);
                        [T::of(q[0]), T::of(q[1])]
                    })
                    .collect(),
                confidence: f.confidence.clone(),
            })
            .collect(),
        fps: seq.fps,
    }
}
