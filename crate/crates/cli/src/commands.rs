use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gesture_skel::audio::{self, align_to_frames, load_features, write_features, AudioFeatureSequence};
use gesture_skel::dataset::{
    detect_shots, filter_clip, read_clip_manifest, read_histograms, segment_clips, transform_keypoints,
    write_clip_manifest, write_histograms, ClipManifest, FilterRules,
};
use gesture_skel::denoiser::ConditioningMode;
use gesture_skel::generation::{
    export_pose, generate, import_pose, render, write_frames, GenerationRequest, PoseVariant, RenderStyle,
};
use gesture_skel::metrics::{load_image, pjpe, psnr, ssim};
use gesture_skel::skeleton::{
    read_skeleton_file, smooth, write_skeleton_file, RootMap, SkeletonFrame, SkeletonRecord, SkeletonSequence,
};
use gesture_skel::synthetic::{shot_histograms, toy_clip, ToySpeaker};
use gesture_skel::trainer::{self, load_dataset, write_dataset_manifest, TrainConfig};

use crate::args::*;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess(a) => preprocess(&a),
        Command::FilterClips(a) => filter_clips(&a),
        Command::Train(a) => train(&a),
        Command::Generate(a) => generate_cmd(&a),
        Command::Render(a) => render_cmd(&a),
        Command::Eval(a) => eval(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("--out {}: cannot create directory", dir.display()))
}

/// Files in `dir` with extension `ext`, sorted by name.
fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn preprocess(a: &PreprocessArgs) -> Result<()> {
    create_dir(&a.out)?;
    let selection: Option<Vec<ClipManifest>> = a
        .clips
        .as_deref()
        .map(|p| read_clip_manifest(p).with_context(|| format!("--clips {}", p.display())))
        .transpose()?;
    let mut dataset = Vec::new();
    for skel_path in files_with_ext(&a.skeletons, "skel")? {
        let video = stem(&skel_path);
        let records = read_skeleton_file::<f32>(&skel_path)?;
        let feat_path = a.features.join(format!("{video}.feat"));
        let feat = load_features::<f32>(&feat_path).with_context(|| format!("features for video {video}"))?;
        let mut clips: Vec<(String, SkeletonSequence<f32>, std::ops::Range<usize>)> = Vec::new();
        match &selection {
            Some(manifest) => {
                for m in manifest.iter().filter(|m| m.video_id == video && m.accepted()) {
                    let rec = records.get(m.track).with_context(|| {
                        format!("clip {}: {} has no track {}", m.clip_id, skel_path.display(), m.track)
                    })?;
                    let mut seq = rec.sequence.slice(m.frames.clone())?;
                    if let Some(crop) = &m.verdict.crop {
                        seq = transform_keypoints(&seq, crop);
                    }
                    clips.push((m.clip_id.clone(), seq, m.frames.clone()));
                }
            }
            None => {
                for (k, rec) in records.iter().enumerate() {
                    clips.push((format!("{video}_p{k}"), rec.sequence.clone(), 0..rec.sequence.len()));
                }
            }
        }
        for (clip_id, seq, range) in clips {
            let video_frames = records.iter().map(|r| r.sequence.len()).max().unwrap_or(0);
            let aligned = align_to_frames(&feat, video_frames)?;
            let clip_feat = aligned.slice_rows(range.clone())?;
            let report = audio::validate(&clip_feat.values, seq.len());
            if !report.is_ok() {
                bail!("features {} for clip {clip_id}: {:?}", feat_path.display(), report.issues);
            }
            let seq = smooth(&seq, a.smooth_window, None)?;
            let skel_name = format!("{clip_id}.skel");
            let feat_name = format!("{clip_id}.feat");
            write_skeleton_file(
                &a.out.join(&skel_name),
                &[SkeletonRecord { clip_id: clip_id.clone(), sequence: seq }],
            )?;
            write_features(&a.out.join(&feat_name), &clip_feat)?;
            dataset.push((clip_id, skel_name, feat_name));
        }
    }
    if dataset.is_empty() {
        bail!("no clips found under --skeletons {}", a.skeletons.display());
    }
    let manifest = a.out.join("dataset.txt");
    write_dataset_manifest(&manifest, &dataset)?;
    tracing::info!(clips = dataset.len(), manifest = %manifest.display(), "preprocessed");
    Ok(())
}

fn filter_clips(a: &FilterArgs) -> Result<()> {
    let rules = match &a.rules {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("--rules {}", p.display()))?;
            FilterRules::from_toml_str(&text).with_context(|| format!("--rules {}", p.display()))?
        }
        None => FilterRules::default(),
    };
    let mut manifest = Vec::new();
    for skel_path in files_with_ext(&a.skeletons, "skel")? {
        let video = stem(&skel_path);
        let hist_path = a.histograms.join(format!("{video}.hist"));
        let hist = read_histograms(&hist_path).with_context(|| format!("histograms for video {video}"))?;
        let cuts = detect_shots(&hist, rules.shot_threshold);
        for (track, rec) in read_skeleton_file::<f64>(&skel_path)?.into_iter().enumerate() {
            if rec.sequence.len() != hist.len() {
                bail!(
                    "{}: track {track} has {} frames but {} has {}",
                    skel_path.display(),
                    rec.sequence.len(),
                    hist_path.display(),
                    hist.len()
                );
            }
            for range in segment_clips(&cuts, hist.len(), rules.fps as usize) {
                let verdict = filter_clip(&rec.sequence.slice(range.clone())?, &rules);
                manifest.push(ClipManifest {
                    clip_id: format!("{video}_p{track}_{:06}", range.start),
                    video_id: video.clone(),
                    track,
                    frames: range,
                    fps: rules.fps,
                    verdict,
                });
            }
        }
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_clip_manifest(&a.out, &manifest)?;
    let accepted = manifest.iter().filter(|m| m.accepted()).count();
    tracing::info!(clips = manifest.len(), accepted, out = %a.out.display(), "filtered");
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut config = TrainConfig::load(&a.config).with_context(|| format!("--config {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(steps) = a.steps {
        config.total_steps = steps;
    }
    config.validate()?;
    let roots = RootMap::default();
    let (clips, stats) =
        load_dataset::<f32>(&a.data, &roots).with_context(|| format!("--data {}", a.data.display()))?;
    create_dir(&a.out)?;
    fs::write(a.out.join("train.toml"), config.to_toml_string()).context("writing config echo")?;
    let summary = trainer::run(&config, &clips, &stats, &roots, &a.out, a.resume.as_deref())?;
    if let Some((step, loss)) = summary.losses.last() {
        tracing::info!(step, loss, checkpoints = summary.checkpoints.len(), "done");
    }
    Ok(())
}

fn reference_frame(path: &Path) -> Result<SkeletonFrame<f32>> {
    let (_, seq) = import_pose::<f32>(path).with_context(|| format!("--ref {}", path.display()))?;
    seq.frames.into_iter().next().with_context(|| format!("--ref {} has no frames", path.display()))
}

fn generate_cmd(a: &GenerateArgs) -> Result<()> {
    let req = GenerationRequest {
        checkpoint: a.ckpt.clone(),
        reference: reference_frame(&a.reference)?,
        audio: a.audio.clone(),
        alpha: a.alpha,
        seed: a.seed,
        frames: a.frames,
    };
    let seq = generate(&req).with_context(|| format!("--ckpt {} --audio {}", a.ckpt.display(), a.audio.display()))?;
    let id = a.id.clone().unwrap_or_else(|| stem(&a.audio));
    create_dir(&a.out)?;
    let path = a.out.join(format!("{id}.pose"));
    export_pose(&id, &seq, &path, PoseVariant::FullBody)?;
    if a.hands {
        export_pose(&id, &seq, &a.out.join(format!("{id}_hands.pose")), PoseVariant::HandsOnly)?;
    }
    tracing::info!(frames = seq.len(), out = %path.display(), "generated");
    Ok(())
}

fn render_cmd(a: &RenderArgs) -> Result<()> {
    let (_, seq) = import_pose::<f32>(&a.pose).with_context(|| format!("--pose {}", a.pose.display()))?;
    let style = RenderStyle {
        line_width: a.line_width,
        point_radius: a.point_radius,
        conf_threshold: a.conf_threshold,
        ..RenderStyle::default()
    };
    let frames = write_frames(&render(&seq, a.size, &style), &a.out)?;
    tracing::info!(frames = frames.len(), out = %a.out.display(), "rendered");
    Ok(())
}

fn find_pose(dir: &Path, name: &str) -> Option<PathBuf> {
    ["pose", "skel"].iter().map(|e| dir.join(format!("{name}.{e}"))).find(|p| p.is_file())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(&a.pred)
        .with_context(|| format!("--pred {}", a.pred.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let mut rows: Vec<(String, &'static str, f64)> = Vec::new();
    for path in entries {
        let name = stem(&path);
        if path.is_dir() {
            let gt_dir = a.gt.join(&name);
            if !gt_dir.is_dir() {
                tracing::warn!(pred = %path.display(), "no ground-truth frame directory, skipped");
                continue;
            }
            let (mut s, mut p, mut n) = (0.0, 0.0, 0usize);
            for frame in files_with_ext(&path, "png")? {
                let gt_frame = gt_dir.join(frame.file_name().unwrap());
                if !gt_frame.is_file() {
                    bail!("--gt has no frame {} for {}", gt_frame.display(), frame.display());
                }
                let (x, y) = (load_image(&frame)?, load_image(&gt_frame)?);
                s += ssim(&x, &y).with_context(|| format!("ssim on {}", frame.display()))?;
                p += psnr(&x, &y)?;
                n += 1;
            }
            if n > 0 {
                rows.push((name.clone(), "ssim", s / n as f64));
                rows.push((name, "psnr", p / n as f64));
            }
        } else if matches!(path.extension().and_then(|e| e.to_str()), Some("pose" | "skel")) {
            let Some(gt_path) = find_pose(&a.gt, &name) else {
                tracing::warn!(pred = %path.display(), "no ground-truth pose, skipped");
                continue;
            };
            let (_, pred) = import_pose::<f64>(&path)?;
            let (_, gt) = import_pose::<f64>(&gt_path)?;
            let err = pjpe(&pred, &gt).with_context(|| format!("{} vs {}", path.display(), gt_path.display()))?;
            rows.push((name, "pjpe", err.overall));
        }
    }
    if rows.is_empty() {
        bail!("--pred {} holds no pose files or frame directories matching --gt {}", a.pred.display(), a.gt.display());
    }
    let mut report = String::from("clip\tmetric\tvalue\n");
    let mut totals: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (clip, metric, value) in &rows {
        let _ = writeln!(report, "{clip}\t{metric}\t{value}");
        let t = totals.entry(metric).or_default();
        t.0 += value;
        t.1 += 1;
    }
    for (metric, (sum, n)) in totals {
        let _ = writeln!(report, "mean\t{metric}\t{}", sum / n as f64);
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    fs::write(&a.out, &report).with_context(|| format!("--out {}", a.out.display()))?;
    print!("{report}");
    Ok(())
}

/// Places a normalized toy pose inside a 1280×720 frame.
fn to_pixels(seq: &SkeletonSequence<f32>) -> SkeletonSequence<f32> {
    SkeletonSequence {
        frames: seq
            .frames
            .iter()
            .map(|f| SkeletonFrame {
                coords: f.coords.iter().map(|p| [390.0 + 500.0 * p[0], 20.0 + 500.0 * p[1]]).collect(),
                confidence: f.confidence.clone(),
            })
            .collect(),
        fps: seq.fps,
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    if a.frames < 250 {
        bail!("--frames {} is too short: each video holds two shots of at least 125 frames", a.frames);
    }
    let dirs = ["skeletons", "histograms", "features"].map(|d| a.out.join(d));
    for d in &dirs {
        create_dir(d)?;
    }
    for v in 0..a.videos {
        let video = format!("video{v:02}");
        let cut = if v % 2 == 0 { a.frames / 2 } else { a.frames };
        let mut frames = Vec::new();
        let mut rows: Vec<Vec<f32>> = Vec::new();
        for (k, len) in [cut, a.frames - cut].into_iter().enumerate().filter(|(_, l)| *l > 0) {
            let width = 0.2 + 0.1 * ((v * 2 + k) % 5) as f64 / 4.0;
            let seed = a.seed.wrapping_mul(1000).wrapping_add((v * 2 + k) as u64);
            let clip = toy_clip::<f32>(&video, &ToySpeaker::new(width), len, seed);
            let mut seq = to_pixels(&clip.skeleton);
            if v == 2 {
                // One motionless video so the quality rules have something to reject.
                let still = seq.frames[0].clone();
                seq.frames.iter_mut().for_each(|f| *f = still.clone());
            }
            frames.extend(seq.frames);
            for row in clip.features.values.rows() {
                rows.push(row.to_vec());
                rows.push(row.to_vec());
            }
        }
        let seq = SkeletonSequence { frames, fps: 25 };
        write_skeleton_file(
            &dirs[0].join(format!("{video}.skel")),
            &[SkeletonRecord { clip_id: video.clone(), sequence: seq }],
        )?;
        let cuts: Vec<usize> = (cut < a.frames).then_some(cut).into_iter().collect();
        write_histograms(&dirs[1].join(format!("{video}.hist")), &shot_histograms(a.frames, &cuts, a.seed + v as u64))?;
        let values = ndarray::Array2::from_shape_fn((rows.len(), rows[0].len()), |(i, j)| rows[i][j]);
        write_features(&dirs[2].join(format!("{video}.feat")), &AudioFeatureSequence::new(values, 50.0)?)?;
    }
    let rules = FilterRules::default();
    fs::write(a.out.join("rules.toml"), rules.to_toml_string())?;
    let config = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 8,
        total_steps: 200,
        window_frames: 32,
        window_stride: 16,
        seed: a.seed,
        diffusion_steps: 50,
        checkpoint_every: 100,
        log_every: 50,
        d_model: 32,
        n_layers: 2,
        n_heads: 4,
        time_embed_dim: 32,
        max_frames: 400,
        conditioning: ConditioningMode::FeatureConcat,
        ..TrainConfig::default()
    };
    fs::write(a.out.join("train.toml"), config.to_toml_string())?;
    tracing::info!(videos = a.videos, out = %a.out.display(), "synthetic corpus written");
    Ok(())
}
