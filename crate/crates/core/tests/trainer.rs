//! Training loop behavior on a small toy corpus.

mod common;

use gesture_skel::checkpoint::Checkpoint;
use gesture_skel::diffusion::ScheduleKind;
use gesture_skel::skeleton::{NormalizationStats, RootMap};
use gesture_skel::synthetic::toy_corpus;
use gesture_skel::trainer::{checkpoint_name, run, Clip, TrainConfig, Trainer};
use gesture_skel::Error;

use common::{prepare, windows};

fn small_config(total_steps: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 4,
        total_steps,
        window_frames: 16,
        window_stride: 8,
        seed: 5,
        schedule: ScheduleKind::Cosine,
        diffusion_steps: 50,
        checkpoint_every: 3,
        d_model: 32,
        n_layers: 2,
        n_heads: 4,
        time_embed_dim: 32,
        mlp_ratio: 2,
        max_frames: 16,
        ..TrainConfig::default()
    }
}

fn corpus() -> (Vec<Clip<f32>>, NormalizationStats<f32>) {
    prepare(&toy_corpus::<f32>(3, 40, 21))
}

#[test]
fn fixed_seed_fixes_the_loss_trajectory() {
    let (clips, _) = corpus();
    let config = small_config(6);
    let mut a = Trainer::new(config.clone(), windows(&clips, &config)).unwrap();
    let mut b = Trainer::new(config.clone(), windows(&clips, &config)).unwrap();
    for _ in 0..6 {
        assert_eq!(a.step().unwrap().to_bits(), b.step().unwrap().to_bits());
    }
    assert_eq!(a.model, b.model);

    let mut c = Trainer::new(TrainConfig { seed: 6, ..config.clone() }, windows(&clips, &config)).unwrap();
    let mut a2 = Trainer::new(config.clone(), windows(&clips, &config)).unwrap();
    assert_ne!(a2.step().unwrap(), c.step().unwrap());
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let (clips, _) = corpus();
    let config = TrainConfig { learning_rate: 0.0, ..small_config(3) };
    let mut trainer = Trainer::new(config.clone(), windows(&clips, &config)).unwrap();
    let before = trainer.model.clone();
    for _ in 0..3 {
        let loss = trainer.step().unwrap();
        assert!(loss.is_finite() && loss > 0.0);
    }
    assert_eq!(trainer.model, before);
}

#[test]
fn loss_is_finite_at_every_step() {
    let (clips, _) = corpus();
    let config = small_config(30);
    let mut trainer = Trainer::new(config.clone(), windows(&clips, &config)).unwrap();
    for step in 1..=30 {
        let loss = trainer.step().unwrap();
        assert!(loss.is_finite(), "step {step}: {loss}");
    }
}

#[test]
fn resuming_reproduces_the_uninterrupted_run() {
    let (clips, stats) = corpus();
    let roots = RootMap::default();
    let config = small_config(6);
    let full_dir = tempfile::tempdir().unwrap();
    let full = run(&config, &clips, &stats, &roots, full_dir.path(), None).unwrap();
    assert_eq!(full.losses.len(), 6);

    let resumed_dir = tempfile::tempdir().unwrap();
    let resumed = run(&config, &clips, &stats, &roots, resumed_dir.path(), Some(&full.checkpoints[0])).unwrap();
    assert_eq!(resumed.losses.len(), 3);
    for ((s1, l1), (s2, l2)) in full.losses[3..].iter().zip(&resumed.losses) {
        assert_eq!(s1, s2);
        assert!((l1 - l2).abs() < 1e-6, "step {s1}: {l1} vs {l2}");
    }
    let a = Checkpoint::<f32>::load(full.checkpoints.last().unwrap()).unwrap();
    let b = Checkpoint::<f32>::load(resumed.checkpoints.last().unwrap()).unwrap();
    assert_eq!(a.step, 6);
    assert_eq!(a.model, b.model);
}

#[test]
fn checkpoint_cadence() {
    let (clips, stats) = corpus();
    for (steps, every) in [(7u64, 3u64), (6, 3), (2, 5)] {
        let dir = tempfile::tempdir().unwrap();
        let config = TrainConfig { checkpoint_every: every, ..small_config(steps) };
        let summary = run(&config, &clips, &stats, &RootMap::default(), dir.path(), None).unwrap();
        assert_eq!(summary.checkpoints.len() as u64, steps.div_ceil(every), "{steps}/{every}");
        assert_eq!(summary.checkpoints.last().unwrap(), &dir.path().join(checkpoint_name(steps)));
        let files = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("ckpt_"))
            .count();
        assert_eq!(files as u64, steps.div_ceil(every));
        let log = std::fs::read_to_string(dir.path().join("loss.tsv")).unwrap();
        assert_eq!(log.lines().count() as u64, steps);
    }
}

#[test]
fn empty_dataset_is_an_error() {
    let (_, stats) = corpus();
    let dir = tempfile::tempdir().unwrap();
    let err = run::<f32>(&small_config(3), &[], &stats, &RootMap::default(), dir.path(), None);
    assert!(err.is_err());
    assert!(Trainer::<f32>::new(small_config(3), Vec::new()).is_err());

    let (clips, stats) = prepare(&toy_corpus::<f32>(2, 10, 1));
    let err = run(&small_config(3), &clips, &stats, &RootMap::default(), dir.path(), None);
    assert!(err.is_err(), "clips shorter than a window leave nothing to train on");
}

#[test]
fn io_failures_carry_the_step() {
    let (clips, stats) = corpus();
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join(checkpoint_name(3))).unwrap();
    let err = run(&small_config(6), &clips, &stats, &RootMap::default(), dir.path(), None).unwrap_err();
    assert!(matches!(err, Error::AtStep { step: 3, .. }), "{err}");
    assert!(err.to_string().contains("step 3"));
}

#[test]
fn normalized_corpus_has_unit_std() {
    let raw = toy_corpus::<f64>(6, 60, 2);
    let clips: Vec<_> = raw.iter().map(|c| (c.id.clone(), c.skeleton.clone(), c.features.clone())).collect();
    let (clips, stats) = gesture_skel::trainer::prepare_clips(clips, &RootMap::default()).unwrap();
    let rows: Vec<_> = clips.iter().flat_map(|c| c.motion.rows().into_iter().map(|r| r.to_owned())).collect();
    let n = rows.len() as f64;
    let mut checked = 0;
    for d in 0..stats.dim() {
        if stats.std[d] <= 1e-6 {
            continue;
        }
        let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
        let std = (rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 1.0).abs() < 0.05, "dim {d}: std {std}");
        assert!(mean.abs() < 1e-9, "dim {d}: mean {mean}");
        checked += 1;
    }
    assert!(checked >= 260, "only {checked} non-degenerate dims");
}

#[test]
fn config_file_parsing() {
    let config = TrainConfig::from_toml_str("learning_rate = 0.001\nbatch_size = 4\nschedule = \"linear\"\n").unwrap();
    assert_eq!(config.learning_rate, 1e-3);
    assert_eq!(config.batch_size, 4);
    assert_eq!(config.schedule, ScheduleKind::Linear);
    assert_eq!(config.dropout_prob, 0.1);
    assert_eq!(TrainConfig::from_toml_str(&config.to_toml_string()).unwrap(), config);

    assert!(TrainConfig::from_toml_str("learning_rat = 0.1").is_err());
    assert!(TrainConfig::from_toml_str("dropout_prob = 1.5").is_err());
    assert!(TrainConfig::from_toml_str("window_frames = 500\nmax_frames = 400").is_err());
}
