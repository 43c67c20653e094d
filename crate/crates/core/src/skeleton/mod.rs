//! COCO-WholeBody skeleton types and the root-relative local motion
//! representation used as the diffusion state space.
//!
//! Keypoint layout (133 points):
//!
//! | range    | part       |
//! |----------|------------|
//! | 0..=16   | body       |
//! | 17..=22  | feet       |
//! | 23..=90  | face (68)  |
//! | 91..=111 | left hand  |
//! | 112..=132| right hand |

mod io;
mod local;
mod normalize;
mod smooth;

pub use io::{
    read_skeleton_file, read_skeleton_manifest, write_skeleton_file, write_skeleton_manifest, SkeletonRecord,
};
pub use local::{from_local, to_local, BodyRoot, LocalMotionSequence, RootMap};
pub use normalize::{denormalize, fit_normalization, normalize, NormalizationStats};
pub use smooth::{smooth, DEFAULT_SMOOTHING_WINDOW};

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::real::Real;

/// Number of COCO-WholeBody keypoints.
pub const NUM_KEYPOINTS: usize = 133;
/// Width of one flattened local-motion frame (x and y per keypoint).
pub const POSE_DIM: usize = 2 * NUM_KEYPOINTS;
/// Frame rate of every curated sequence.
pub const FPS: u32 = 25;

pub const BODY: RangeInclusive<usize> = 0..=22;
pub const FACE: RangeInclusive<usize> = 23..=90;
pub const LEFT_HAND: RangeInclusive<usize> = 91..=111;
pub const RIGHT_HAND: RangeInclusive<usize> = 112..=132;
/// Both hands, in output order of [`extract_hand_skeletons`].
pub const HANDS: RangeInclusive<usize> = 91..=132;
/// Inner and outer lip contour (68-landmark points 48..=67).
pub const MOUTH: RangeInclusive<usize> = 71..=90;

pub const NOSE: usize = 0;
pub const LEFT_SHOULDER: usize = 5;
pub const RIGHT_SHOULDER: usize = 6;
pub const LEFT_ELBOW: usize = 7;
pub const RIGHT_ELBOW: usize = 8;
pub const LEFT_WRIST: usize = 9;
pub const RIGHT_WRIST: usize = 10;
pub const LEFT_HIP: usize = 11;
pub const RIGHT_HIP: usize = 12;

/// One frame of 2D keypoints in crop-normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame<T> {
    pub coords: Vec<[T; 2]>,
    pub confidence: Vec<T>,
}

impl<T: Real> SkeletonFrame<T> {
    /// Builds a frame, checking finiteness and confidence range.
    pub fn new(coords: Vec<[T; 2]>, confidence: Vec<T>) -> Result<Self> {
        let frame = Self { coords, confidence };
        frame.validate()?;
        Ok(frame)
    }

    /// Whole-body frame with every keypoint at `at` and full confidence.
    pub fn uniform(at: [T; 2]) -> Self {
        Self { coords: vec![at; NUM_KEYPOINTS], confidence: vec![T::one(); NUM_KEYPOINTS] }
    }

    pub fn num_keypoints(&self) -> usize {
        self.coords.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.len() != self.confidence.len() {
            return Err(Error::dim("skeleton frame confidence", self.coords.len(), self.confidence.len()));
        }
        for (i, (p, c)) in self.coords.iter().zip(&self.confidence).enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() || !c.is_finite() {
                return Err(Error::NonFinite { context: "skeleton frame", location: format!("keypoint {i}") });
            }
            if *c < T::zero() || *c > T::one() {
                return Err(Error::InvalidArgument(format!("confidence {c} of keypoint {i} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Ordered frames of one clip at [`FPS`].
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence<T> {
    pub frames: Vec<SkeletonFrame<T>>,
    pub fps: u32,
}

impl<T: Real> SkeletonSequence<T> {
    pub fn new(frames: Vec<SkeletonFrame<T>>) -> Result<Self> {
        let seq = Self { frames, fps: FPS };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn num_keypoints(&self) -> usize {
        self.frames.first().map_or(0, SkeletonFrame::num_keypoints)
    }

    /// Checks the sequence-level invariants plus every frame.
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidArgument("skeleton sequence has no frames".into()));
        }
        if self.fps != FPS {
            return Err(Error::InvalidArgument(format!("sequence fps {} (expected {FPS})", self.fps)));
        }
        let k = self.num_keypoints();
        for (f, frame) in self.frames.iter().enumerate() {
            if frame.num_keypoints() != k {
                return Err(Error::dim("keypoints per frame", k, format!("{} at frame {f}", frame.num_keypoints())));
            }
            frame.validate()?;
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate) but also requires the 133-point layout.
    pub fn validate_wholebody(&self) -> Result<()> {
        self.validate()?;
        if self.num_keypoints() != NUM_KEYPOINTS {
            return Err(Error::dim("whole-body keypoints", NUM_KEYPOINTS, self.num_keypoints()));
        }
        Ok(())
    }

    /// Frames `range` as a new sequence.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "frame range {range:?} outside sequence of {} frames",
                self.len()
            )));
        }
        Ok(Self { frames: self.frames[range].to_vec(), fps: self.fps })
    }
}

/// Euclidean distance between the two shoulder keypoints.
pub fn shoulder_width<T: Real>(frame: &SkeletonFrame<T>) -> T {
    let a = frame.coords[LEFT_SHOULDER];
    let b = frame.coords[RIGHT_SHOULDER];
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Restricts each frame to the 42 hand keypoints (left hand first).
pub fn extract_hand_skeletons<T: Real>(seq: &SkeletonSequence<T>) -> Result<SkeletonSequence<T>> {
    seq.validate_wholebody()?;
    let frames = seq
        .frames
        .iter()
        .map(|f| SkeletonFrame { coords: f.coords[HANDS].to_vec(), confidence: f.confidence[HANDS].to_vec() })
        .collect();
    Ok(SkeletonSequence { frames, fps: seq.fps })
}
