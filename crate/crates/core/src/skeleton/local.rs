//! Root-relative ("local") motion encoding.
//!
//! Face keypoints are stored relative to the face root, hand keypoints
//! relative to their wrist, and the remaining body keypoints (including the
//! face and wrist roots) relative to the body root. The body root itself is
//! the only absolute entry. With a shoulder-midpoint body root, the first
//! shoulder's slot carries the absolute midpoint since its offset is the
//! negation of the second shoulder's.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    SkeletonFrame, SkeletonSequence, BODY, FACE, FPS, LEFT_HAND, LEFT_SHOULDER, LEFT_WRIST, NOSE, NUM_KEYPOINTS,
    POSE_DIM, RIGHT_HAND, RIGHT_SHOULDER, RIGHT_WRIST,
};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyRoot {
    Keypoint(usize),
    /// Midpoint of two distinct body keypoints (a stand-in for a neck joint).
    Midpoint(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootMap {
    pub face_root: usize,
    pub left_hand_root: usize,
    pub right_hand_root: usize,
    pub body_root: BodyRoot,
}

impl Default for RootMap {
    fn default() -> Self {
        Self {
            face_root: NOSE,
            left_hand_root: LEFT_WRIST,
            right_hand_root: RIGHT_WRIST,
            body_root: BodyRoot::Midpoint(LEFT_SHOULDER, RIGHT_SHOULDER),
        }
    }
}

impl RootMap {
    /// Roots must be body keypoints so every group decodes from the body root.
    pub fn validate(&self) -> Result<()> {
        let in_body = |i: usize| BODY.contains(&i);
        let ok = in_body(self.face_root)
            && in_body(self.left_hand_root)
            && in_body(self.right_hand_root)
            && match self.body_root {
                BodyRoot::Keypoint(r) => in_body(r),
                BodyRoot::Midpoint(a, b) => in_body(a) && in_body(b) && a != b,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid root map {self:?}")))
        }
    }

    /// Root keypoint of `index`, or `None` for members of the body group.
    pub fn group_root(&self, index: usize) -> Option<usize> {
        if FACE.contains(&index) {
            Some(self.face_root)
        } else if LEFT_HAND.contains(&index) {
            Some(self.left_hand_root)
        } else if RIGHT_HAND.contains(&index) {
            Some(self.right_hand_root)
        } else {
            None
        }
    }
}

/// F × 266 root-relative coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMotionSequence<T> {
    pub values: Array2<T>,
    pub root_map: RootMap,
}

impl<T: Real> LocalMotionSequence<T> {
    pub fn new(values: Array2<T>, root_map: RootMap) -> Result<Self> {
        if values.ncols() != POSE_DIM || values.nrows() == 0 {
            return Err(Error::dim("local motion", format!("F x {POSE_DIM}"), format!("{:?}", values.dim())));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "local motion",
                location: format!("row {}, col {}", pos / POSE_DIM, pos % POSE_DIM),
            });
        }
        Ok(Self { values, root_map })
    }

    pub fn num_frames(&self) -> usize {
        self.values.nrows()
    }
}

fn body_root_point<T: Real>(frame: &SkeletonFrame<T>, root: BodyRoot) -> [T; 2] {
    match root {
        BodyRoot::Keypoint(r) => frame.coords[r],
        BodyRoot::Midpoint(a, b) => {
            let half = T::of(0.5);
            let (pa, pb) = (frame.coords[a], frame.coords[b]);
            [(pa[0] + pb[0]) * half, (pa[1] + pb[1]) * half]
        }
    }
}

pub fn to_local<T: Real>(seq: &SkeletonSequence<T>, roots: &RootMap) -> Result<LocalMotionSequence<T>> {
    seq.validate_wholebody()?;
    roots.validate()?;
    let mut values = Array2::zeros((seq.len(), POSE_DIM));
    let absolute_slot = match roots.body_root {
        BodyRoot::Keypoint(r) => r,
        BodyRoot::Midpoint(a, _) => a,
    };
    for (frame, mut row) in seq.frames.iter().zip(values.rows_mut()) {
        let body = body_root_point(frame, roots.body_root);
        for i in 0..NUM_KEYPOINTS {
            let p = frame.coords[i];
            let origin = match roots.group_root(i) {
                Some(r) => frame.coords[r],
                None if i == absolute_slot => [T::zero(); 2],
                None => body,
            };
            let v = if i == absolute_slot { body } else { p };
            row[2 * i] = v[0] - origin[0];
            row[2 * i + 1] = v[1] - origin[1];
        }
    }
    Ok(LocalMotionSequence { values, root_map: *roots })
}

/// Exact inverse of [`to_local`]; decoded frames carry confidence 1.
pub fn from_local<T: Real>(lm: &LocalMotionSequence<T>, roots: &RootMap) -> Result<SkeletonSequence<T>> {
    if lm.root_map != *roots {
        return Err(Error::InvalidArgument(format!(
            "root map mismatch: sequence encoded with {:?}, decoding with {roots:?}",
            lm.root_map
        )));
    }
    roots.validate()?;
    if lm.values.ncols() != POSE_DIM {
        return Err(Error::dim("local motion width", POSE_DIM, lm.values.ncols()));
    }
    let two = T::of(2.0);
    let mut frames = Vec::with_capacity(lm.num_frames());
    for row in lm.values.rows() {
        let slot = |i: usize| [row[2 * i], row[2 * i + 1]];
        let mut coords = vec![[T::zero(); 2]; NUM_KEYPOINTS];
        let body = match roots.body_root {
            BodyRoot::Keypoint(r) => {
                coords[r] = slot(r);
                slot(r)
            }
            BodyRoot::Midpoint(a, b) => {
                let m = slot(a);
                let ob = slot(b);
                let pb = [ob[0] + m[0], ob[1] + m[1]];
                coords[b] = pb;
                coords[a] = [two * m[0] - pb[0], two * m[1] - pb[1]];
                m
            }
        };
        let fixed = |i: usize| match roots.body_root {
            BodyRoot::Keypoint(r) => i == r,
            BodyRoot::Midpoint(a, b) => i == a || i == b,
        };
        for i in BODY.filter(|&i| !fixed(i)) {
            let o = slot(i);
            coords[i] = [o[0] + body[0], o[1] + body[1]];
        }
        for i in FACE.chain(LEFT_HAND).chain(RIGHT_HAND) {
            let r = coords[roots.group_root(i).expect("non-body index has a root")];
            let o = slot(i);
            coords[i] = [o[0] + r[0], o[1] + r[1]];
        }
        frames.push(SkeletonFrame { coords, confidence: vec![T::one(); NUM_KEYPOINTS] });
    }
    Ok(SkeletonSequence { frames, fps: FPS })
}
