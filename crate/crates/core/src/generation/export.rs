//! Line-based pose export.
//!
//! ```text
//! # gesture-skel pose v1
//! id <clip id>
//! fps <fps>
//! frames <F>
//! keypoints <K>
//! variant full_body|hands_only
//! x y c x y c ...        (one line per frame, K triples)
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::{extract_hand_skeletons, read_skeleton_file, SkeletonFrame, SkeletonSequence};

pub const POSE_TEXT_MAGIC: &str = "# gesture-skel pose v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseVariant {
    FullBody,
    /// The 42 hand keypoints, left hand first.
    HandsOnly,
}

impl PoseVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PoseVariant::FullBody => "full_body",
            PoseVariant::HandsOnly => "hands_only",
        }
    }
}

impl FromStr for PoseVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_body" => Ok(PoseVariant::FullBody),
            "hands_only" => Ok(PoseVariant::HandsOnly),
            other => Err(Error::InvalidArgument(format!("unknown pose variant {other:?}"))),
        }
    }
}

pub fn write_pose_text<T: Real>(id: &str, seq: &SkeletonSequence<T>, variant: PoseVariant) -> Result<String> {
    let seq = match variant {
        PoseVariant::FullBody => {
            seq.validate_wholebody()?;
            seq.clone()
        }
        PoseVariant::HandsOnly => extract_hand_skeletons(seq)?,
    };
    if id.contains(char::is_whitespace) {
        return Err(Error::InvalidArgument(format!("clip id {id:?} contains whitespace")));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{POSE_TEXT_MAGIC}");
    let _ = writeln!(out, "id {id}");
    let _ = writeln!(out, "fps {}", seq.fps);
    let _ = writeln!(out, "frames {}", seq.len());
    let _ = writeln!(out, "keypoints {}", seq.num_keypoints());
    let _ = writeln!(out, "variant {}", variant.as_str());
    for frame in &seq.frames {
        let mut first = true;
        for (p, c) in frame.coords.iter().zip(&frame.confidence) {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{} {} {}", p[0], p[1], c);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export_pose<T: Real>(id: &str, seq: &SkeletonSequence<T>, path: &Path, variant: PoseVariant) -> Result<()> {
    let text = write_pose_text(id, seq, variant)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_pose_text<T: Real>(text: &str, path: &Path) -> Result<(String, SkeletonSequence<T>)> {
    let bad = |reason: String| Error::format("pose", path, reason);
    let mut lines = text.lines();
    if lines.next() != Some(POSE_TEXT_MAGIC) {
        return Err(bad("missing pose header".into()));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad(format!("missing {key} line")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected {key}, found {line:?}")))
    };
    let id = field("id")?;
    let fps: u32 = field("fps")?.parse().map_err(|e| bad(format!("fps: {e}")))?;
    let frames: usize = field("frames")?.parse().map_err(|e| bad(format!("frames: {e}")))?;
    let keypoints: usize = field("keypoints")?.parse().map_err(|e| bad(format!("keypoints: {e}")))?;
    let variant: PoseVariant = field("variant")?.parse()?;
    let expected_k = match variant {
        PoseVariant::FullBody => crate::skeleton::NUM_KEYPOINTS,
        PoseVariant::HandsOnly => 42,
    };
    if keypoints != expected_k {
        return Err(bad(format!(
            "{} pose must have {expected_k} keypoints, header says {keypoints}",
            variant.as_str()
        )));
    }
    let mut out = Vec::with_capacity(frames);
    for (f, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let values = line
            .split_ascii_whitespace()
            .map(|v| v.parse::<f64>().map(T::of))
            .collect::<std::result::Result<Vec<T>, _>>()
            .map_err(|e| bad(format!("frame {f}: {e}")))?;
        if values.len() != keypoints * 3 {
            return Err(bad(format!("frame {f} has {} values, expected {}", values.len(), keypoints * 3)));
        }
        out.push(SkeletonFrame {
            coords: values.chunks_exact(3).map(|c| [c[0], c[1]]).collect(),
            confidence: values.chunks_exact(3).map(|c| c[2]).collect(),
        });
    }
    if out.len() != frames {
        return Err(bad(format!("header says {frames} frames, found {}", out.len())));
    }
    let seq = SkeletonSequence { frames: out, fps };
    seq.validate()?;
    Ok((id, seq))
}

/// Reads a text pose file or the first record of a binary skeleton file.
pub fn import_pose<T: Real>(path: &Path) -> Result<(String, SkeletonSequence<T>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(POSE_TEXT_MAGIC.as_bytes()) {
        let text = String::from_utf8(bytes).map_err(|e| Error::format("pose", path, e))?;
        return read_pose_text(&text, path);
    }
    let rec = read_skeleton_file::<T>(path)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::format("skeleton", path, "no records"))?;
    Ok((rec.clip_id, rec.sequence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{write_skeleton_file, SkeletonRecord};
    use rand::{Rng, SeedableRng};

    fn random_seq(frames: usize, seed: u64) -> SkeletonSequence<f32> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        SkeletonSequence {
            frames: (0..frames)
                .map(|_| SkeletonFrame {
                    coords: (0..133).map(|_| [rng.random::<f32>(), rng.random::<f32>() * 3.0 - 1.0]).collect(),
                    confidence: (0..133).map(|_| rng.random::<f32>()).collect(),
                })
                .collect(),
            fps: 25,
        }
    }

    #[test]
    fn text_roundtrip_within_tolerance() {
        let dir = tempfile::tempdir().unwrap();
        let seq = random_seq(7, 3);
        for variant in [PoseVariant::FullBody, PoseVariant::HandsOnly] {
            let path = dir.path().join(format!("{}.pose", variant.as_str()));
            export_pose("clip_a", &seq, &path, variant).unwrap();
            let (id, back) = import_pose::<f32>(&path).unwrap();
            assert_eq!(id, "clip_a");
            let expect = match variant {
                PoseVariant::FullBody => seq.clone(),
                PoseVariant::HandsOnly => extract_hand_skeletons(&seq).unwrap(),
            };
            assert_eq!(back.num_keypoints(), if variant == PoseVariant::FullBody { 133 } else { 42 });
            for (a, b) in back.frames.iter().zip(&expect.frames) {
                for (p, q) in a.coords.iter().zip(&b.coords) {
                    assert!((p[0] - q[0]).abs() <= 1e-6 && (p[1] - q[1]).abs() <= 1e-6);
                }
                for (p, q) in a.confidence.iter().zip(&b.confidence) {
                    assert!((p - q).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn imports_binary_skeletons_too() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.skel");
        let seq = random_seq(3, 4);
        write_skeleton_file(&path, &[SkeletonRecord { clip_id: "b".into(), sequence: seq.clone() }]).unwrap();
        let (id, back) = import_pose::<f32>(&path).unwrap();
        assert_eq!(id, "b");
        assert_eq!(back, seq);
    }

    #[test]
    fn malformed_text_is_rejected() {
        let seq = random_seq(2, 5);
        let text = write_pose_text("x", &seq, PoseVariant::FullBody).unwrap();
        let truncated: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
        assert!(read_pose_text::<f32>(&truncated, Path::new("t")).is_err());
        let wrong = text.replace("keypoints 133", "keypoints 42");
        assert!(read_pose_text::<f32>(&wrong, Path::new("t")).is_err());
        assert!(write_pose_text("has space", &seq, PoseVariant::FullBody).is_err());
    }
}
