//! Training clips, fixed-length windows and condition dropout.

use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{align_to_frames, load_features, AudioFeatureSequence};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::{
    fit_normalization, normalize, read_skeleton_file, to_local, LocalMotionSequence, NormalizationStats, RootMap,
    SkeletonSequence,
};

/// A curated clip in model space: normalized local motion and frame-aligned audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip<T> {
    pub id: String,
    pub motion: Array2<T>,
    pub audio: Array2<T>,
}

impl<T: Real> Clip<T> {
    pub fn len(&self) -> usize {
        self.motion.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.motion.nrows() == 0
    }
}

/// One (x₀, audio, reference) training triple.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample<T> {
    pub x0: Array2<T>,
    pub audio: Array2<T>,
    pub reference: Array1<T>,
    pub clip_id: String,
    pub offset: usize,
}

/// Windows of `frames` frames every `stride` frames. The reference
/// skeleton is the window's first frame. Clips shorter than a window yield
/// nothing.
pub fn make_windows<T: Real>(clip: &Clip<T>, frames: usize, stride: usize) -> Vec<TrainingExample<T>> {
    if frames == 0 || stride == 0 || clip.len() < frames {
        if clip.len() < frames {
            tracing::debug!(clip = %clip.id, len = clip.len(), frames, "clip shorter than a training window");
        }
        return Vec::new();
    }
    (0..=clip.len() - frames)
        .step_by(stride)
        .map(|offset| {
            let range = offset..offset + frames;
            TrainingExample {
                x0: clip.motion.slice(s![range.clone(), ..]).to_owned(),
                audio: clip.audio.slice(s![range, ..]).to_owned(),
                reference: clip.motion.row(offset).to_owned(),
                clip_id: clip.id.clone(),
                offset,
            }
        })
        .collect()
}

/// Independent Bernoulli(`p`) null-condition flags, one per example.
pub fn drop_condition(batch_len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    (0..batch_len).map(|_| rng.random::<f64>() < p).collect()
}

/// Converts global skeletons and raw features into normalized clips and
/// fits the normalization on this corpus.
pub fn prepare_clips<T: Real>(
    raw: Vec<(String, SkeletonSequence<T>, AudioFeatureSequence<T>)>,
    roots: &RootMap,
) -> Result<(Vec<Clip<T>>, NormalizationStats<T>)> {
    let mut locals: Vec<LocalMotionSequence<T>> = Vec::with_capacity(raw.len());
    let mut audios = Vec::with_capacity(raw.len());
    let mut ids = Vec::with_capacity(raw.len());
    for (id, seq, feat) in raw {
        locals.push(to_local(&seq, roots)?);
        let aligned = if feat.num_rows() == seq.len() && feat.source_rate == crate::skeleton::FPS as f64 {
            feat
        } else {
            align_to_frames(&feat, seq.len())?
        };
        audios.push(aligned.values);
        ids.push(id);
    }
    let stats = fit_normalization(&locals)?;
    let clips = locals
        .iter()
        .zip(audios)
        .zip(ids)
        .map(|((lm, audio), id)| Ok(Clip { id, motion: normalize(lm, &stats)?.values, audio }))
        .collect::<Result<Vec<_>>>()?;
    Ok((clips, stats))
}

/// One line of a dataset manifest: `clip_id<TAB>skeleton file<TAB>feature file`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub clip_id: String,
    pub skeleton: PathBuf,
    pub features: PathBuf,
}

/// Relative paths resolve against the manifest's directory.
pub fn read_dataset_manifest(path: &Path) -> Result<Vec<DatasetEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::format("dataset manifest", path, format!("expected 3 fields in {line:?}")));
            }
            Ok(DatasetEntry {
                clip_id: fields[0].to_string(),
                skeleton: base.join(fields[1]),
                features: base.join(fields[2]),
            })
        })
        .collect()
}

pub fn write_dataset_manifest(path: &Path, entries: &[(String, String, String)]) -> Result<()> {
    let text: String = entries.iter().map(|(id, skel, feat)| format!("{id}\t{skel}\t{feat}\n")).collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads every manifest entry (first skeleton record of each file).
pub fn load_dataset<T: Real>(manifest: &Path, roots: &RootMap) -> Result<(Vec<Clip<T>>, NormalizationStats<T>)> {
    let entries = read_dataset_manifest(manifest)?;
    if entries.is_empty() {
        return Err(Error::InvalidArgument(format!("dataset manifest {} lists no clips", manifest.display())));
    }
    let mut raw = Vec::with_capacity(entries.len());
    for e in entries {
        let rec = read_skeleton_file::<T>(&e.skeleton)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::format("skeleton", &e.skeleton, "no records"))?;
        let feat = load_features::<T>(&e.features)?;
        raw.push((e.clip_id, rec.sequence, feat));
    }
    prepare_clips(raw, roots)
}
