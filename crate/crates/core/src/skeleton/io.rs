//! Binary skeleton ingest format.
//!
//! A file is a concatenation of records, each laid out as
//!
//! ```text
//! u32 LE  clip id length in bytes
//! [u8]    clip id (UTF-8)
//! u32 LE  fps
//! u32 LE  frame count F
//! f32 LE  F × 133 × (x, y, confidence)
//! ```
//!
//! Next to it lives a text manifest (`<file>.txt`) with one
//! `clip_id<TAB>frames` line per record.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{SkeletonFrame, SkeletonSequence, NUM_KEYPOINTS};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonRecord<T> {
    pub clip_id: String,
    pub sequence: SkeletonSequence<T>,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

pub fn write_skeleton_file<T: Real>(path: &Path, records: &[SkeletonRecord<T>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    for rec in records {
        rec.sequence.validate_wholebody()?;
        put(&(rec.clip_id.len() as u32).to_le_bytes())?;
        put(rec.clip_id.as_bytes())?;
        put(&rec.sequence.fps.to_le_bytes())?;
        put(&(rec.sequence.len() as u32).to_le_bytes())?;
        for frame in &rec.sequence.frames {
            for (p, c) in frame.coords.iter().zip(&frame.confidence) {
                for v in [p[0], p[1], *c] {
                    put(&(v.f64() as f32).to_le_bytes())?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let entries: Vec<(String, usize)> = records.iter().map(|r| (r.clip_id.clone(), r.sequence.len())).collect();
    write_skeleton_manifest(&sidecar(path), &entries)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format("skeleton", self.path, format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_skeleton_file<T: Real>(path: &Path) -> Result<Vec<SkeletonRecord<T>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0, path };
    let mut records = Vec::new();
    while cur.pos < bytes.len() {
        let id_len = cur.u32()? as usize;
        let clip_id = String::from_utf8(cur.take(id_len)?.to_vec())
            .map_err(|_| Error::format("skeleton", path, "clip id is not UTF-8"))?;
        let fps = cur.u32()?;
        let n = cur.u32()? as usize;
        if n == 0 {
            return Err(Error::format("skeleton", path, format!("clip {clip_id} has no frames")));
        }
        let mut frames = Vec::with_capacity(n);
        for _ in 0..n {
            let mut coords = Vec::with_capacity(NUM_KEYPOINTS);
            let mut confidence = Vec::with_capacity(NUM_KEYPOINTS);
            for _ in 0..NUM_KEYPOINTS {
                let (x, y, c) = (cur.f32()?, cur.f32()?, cur.f32()?);
                coords.push([T::of(x as f64), T::of(y as f64)]);
                confidence.push(T::of(c as f64));
            }
            frames.push(SkeletonFrame { coords, confidence });
        }
        let sequence = SkeletonSequence { frames, fps };
        sequence.validate().map_err(|e| Error::format("skeleton", path, format!("clip {clip_id}: {e}")))?;
        records.push(SkeletonRecord { clip_id, sequence });
    }
    Ok(records)
}

pub fn write_skeleton_manifest(path: &Path, entries: &[(String, usize)]) -> Result<()> {
    let text: String = entries.iter().map(|(id, n)| format!("{id}\t{n}\n")).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_skeleton_manifest(path: &Path) -> Result<Vec<(String, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let (id, n) = line
                .split_once('\t')
                .ok_or_else(|| Error::format("skeleton manifest", path, format!("bad line {line:?}")))?;
            let n = n
                .trim()
                .parse()
                .map_err(|_| Error::format("skeleton manifest", path, format!("bad frame count in {line:?}")))?;
            Ok((id.to_string(), n))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clips.skel");
        let mut f = SkeletonFrame::uniform([0.25f32, 0.5]);
        f.confidence[4] = 0.125;
        f.coords[100] = [1.5, -0.25];
        let recs = vec![
            SkeletonRecord { clip_id: "a".into(), sequence: SkeletonSequence::new(vec![f.clone(); 3]).unwrap() },
            SkeletonRecord { clip_id: "speaker_b/07".into(), sequence: SkeletonSequence::new(vec![f; 1]).unwrap() },
        ];
        write_skeleton_file(&path, &recs).unwrap();
        assert_eq!(read_skeleton_file::<f32>(&path).unwrap(), recs);
        assert_eq!(
            read_skeleton_manifest(&dir.path().join("clips.skel.txt")).unwrap(),
            vec![("a".to_string(), 3), ("speaker_b/07".to_string(), 1)]
        );
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.skel");
        let recs = vec![SkeletonRecord {
            clip_id: "a".into(),
            sequence: SkeletonSequence::new(vec![SkeletonFrame::uniform([0.0f64, 0.0])]).unwrap(),
        }];
        write_skeleton_file(&path, &recs).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_skeleton_file::<f64>(&path), Err(Error::Format { .. })));
    }
}
