//! Windowed x₀-regression training with condition dropout, Adam and
//! resumable checkpoints.
//!
//! Every step draws its randomness from a generator keyed by
//! `(seed, step)`, so a run resumed from a checkpoint continues exactly as
//! the uninterrupted run would have.

mod adam;
mod data;

pub use adam::Adam;
pub use data::{
    drop_condition, load_dataset, make_windows, prepare_clips, read_dataset_manifest, write_dataset_manifest, Clip,
    DatasetEntry, TrainingExample,
};

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::denoiser::{AttentionMode, ConditioningMode, Denoiser, DenoiserConfig, DenoiserParams};
use crate::diffusion::{q_sample, standard_normal, Condition, NoiseSchedule, ScheduleDescriptor, ScheduleKind};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::{NormalizationStats, RootMap};

/// Flat key/value training configuration (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Full-scale training uses 128.
    pub batch_size: usize,
    /// Full-scale training runs 2 000 000 steps.
    pub total_steps: u64,
    pub dropout_prob: f64,
    pub window_frames: usize,
    pub window_stride: usize,
    pub seed: u64,
    pub schedule: ScheduleKind,
    pub diffusion_steps: usize,
    pub checkpoint_every: u64,
    /// 0 disables the parameter EMA.
    pub ema_decay: f64,
    pub log_every: u64,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub time_embed_dim: usize,
    pub mlp_ratio: usize,
    pub max_frames: usize,
    pub conditioning: ConditioningMode,
    pub use_reference: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let model = DenoiserConfig::default();
        Self {
            learning_rate: 5e-5,
            batch_size: 16,
            total_steps: 2_000_000,
            dropout_prob: 0.1,
            window_frames: 80,
            window_stride: 40,
            seed: 0,
            schedule: ScheduleKind::Cosine,
            diffusion_steps: 1000,
            checkpoint_every: 10_000,
            ema_decay: 0.0,
            log_every: 100,
            d_model: model.d_model,
            n_layers: model.n_layers,
            n_heads: model.n_heads,
            time_embed_dim: model.time_embed_dim,
            mlp_ratio: model.mlp_ratio,
            max_frames: model.max_frames,
            conditioning: model.conditioning,
            use_reference: model.use_reference,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::format("train config", path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return bad(format!("dropout_prob {} outside [0, 1]", self.dropout_prob));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad(format!("learning_rate {} must be finite and non-negative", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad(format!("ema_decay {} outside [0, 1)", self.ema_decay));
        }
        if self.batch_size == 0 || self.window_frames == 0 || self.window_stride == 0 || self.checkpoint_every == 0 {
            return bad("batch_size, window_frames, window_stride and checkpoint_every must be positive".into());
        }
        if self.window_frames > self.max_frames {
            return bad(format!("window_frames {} exceeds max_frames {}", self.window_frames, self.max_frames));
        }
        self.model_config().validate()?;
        self.schedule_descriptor().build().map(|_| ())
    }

    pub fn model_config(&self) -> DenoiserConfig {
        DenoiserConfig {
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            max_frames: self.max_frames,
            time_embed_dim: self.time_embed_dim,
            mlp_ratio: self.mlp_ratio,
            conditioning: self.conditioning,
            use_reference: self.use_reference,
            attention: AttentionMode::Full,
            ..DenoiserConfig::default()
        }
    }

    pub fn schedule_descriptor(&self) -> ScheduleDescriptor {
        ScheduleDescriptor { kind: self.schedule, steps: self.diffusion_steps }
    }
}

/// Randomness for optimizer step `step` (1-based).
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

/// One Adam update on the mean x₀ loss of `batch`. Per-example timesteps
/// and noise are drawn from `rng` in batch order; examples flagged in
/// `null_flags` see the learned null condition instead of their audio.
pub fn train_step<T: Real>(
    model: &mut Denoiser<T>,
    optimizer: &mut Adam<T>,
    batch: &[&TrainingExample<T>],
    null_flags: &[bool],
    sched: &NoiseSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if batch.is_empty() || batch.len() != null_flags.len() {
        return Err(Error::dim("null flags", batch.len(), null_flags.len()));
    }
    let draws: Vec<(usize, ndarray::Array2<T>)> = batch
        .iter()
        .map(|ex| {
            let t = rng.random_range(0..sched.steps());
            (t, standard_normal(rng, ex.x0.dim()))
        })
        .collect();
    let frozen = &*model;
    let results = batch
        .par_iter()
        .zip(null_flags.par_iter())
        .zip(draws.par_iter())
        .map(|((ex, &null), (t, eps))| {
            let x_t = q_sample(&ex.x0, *t, eps, sched)?;
            let condition = if null { Condition::Null } else { Condition::Audio(&ex.audio) };
            let input = frozen.assemble_tokens(&x_t, Some(&ex.reference), condition)?;
            frozen.loss_and_grad(&input, &ex.x0, *t)
        })
        .collect::<Result<Vec<_>>>()?;

    let inv = T::one() / T::of_usize(batch.len());
    let mut loss = T::zero();
    let mut grad = DenoiserParams::zeros(&model.config);
    for (l, g) in &results {
        loss += *l;
        grad.add_assign(g);
    }
    let loss = (loss * inv).f64();
    if !loss.is_finite() {
        return Err(Error::Diverged { step: optimizer.step + 1, loss });
    }
    grad.scale(inv);
    optimizer.update(&mut model.params, &grad);
    Ok(loss)
}

/// Training state over a fixed set of windows.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub config: TrainConfig,
    pub model: Denoiser<T>,
    pub optimizer: Adam<T>,
    pub ema: Option<DenoiserParams<T>>,
    pub schedule: NoiseSchedule,
    pub step: u64,
    examples: Vec<TrainingExample<T>>,
}

impl<T: Real> Trainer<T> {
    pub fn new(config: TrainConfig, examples: Vec<TrainingExample<T>>) -> Result<Self> {
        config.validate()?;
        if examples.is_empty() {
            return Err(Error::InvalidArgument(
                "no training windows: dataset empty or clips shorter than a window".into(),
            ));
        }
        let model = Denoiser::new(config.model_config(), config.seed)?;
        let optimizer = Adam::new(&model.config, config.learning_rate);
        let ema = (config.ema_decay > 0.0).then(|| model.params.clone());
        Ok(Self { schedule: config.schedule_descriptor().build()?, config, model, optimizer, ema, step: 0, examples })
    }

    /// Continues from a checkpoint written by a run with the same model
    /// configuration.
    pub fn resume(config: TrainConfig, examples: Vec<TrainingExample<T>>, ckpt: Checkpoint<T>) -> Result<Self> {
        let mut trainer = Self::new(config, examples)?;
        if ckpt.model.config != trainer.model.config {
            return Err(Error::Checkpoint("model configuration differs from the training config".into()));
        }
        if ckpt.schedule != trainer.config.schedule_descriptor() {
            return Err(Error::Checkpoint("noise schedule differs from the training config".into()));
        }
        let mut optimizer =
            ckpt.optimizer.ok_or_else(|| Error::Checkpoint("checkpoint has no optimizer state".into()))?;
        optimizer.lr = trainer.config.learning_rate;
        trainer.model = ckpt.model;
        trainer.optimizer = optimizer;
        trainer.step = ckpt.step;
        trainer.ema = match (trainer.config.ema_decay > 0.0, ckpt.ema) {
            (false, _) => None,
            (true, Some(ema)) => Some(ema),
            (true, None) => Some(trainer.model.params.clone()),
        };
        Ok(trainer)
    }

    pub fn examples(&self) -> &[TrainingExample<T>] {
        &self.examples
    }

    /// Runs the next optimizer step and returns its batch loss.
    pub fn step(&mut self) -> Result<f64> {
        let step = self.step + 1;
        let mut rng = step_rng(self.config.seed, step);
        let mut order: Vec<usize> = (0..self.examples.len()).collect();
        order.shuffle(&mut rng);
        let batch: Vec<&TrainingExample<T>> =
            order.iter().cycle().take(self.config.batch_size).map(|&i| &self.examples[i]).collect();
        let flags = drop_condition(batch.len(), self.config.dropout_prob, &mut rng);
        let loss = train_step(&mut self.model, &mut self.optimizer, &batch, &flags, &self.schedule, &mut rng).map_err(
            |e| match e {
                Error::Diverged { loss, .. } => Error::Diverged { step, loss },
                other => Error::AtStep { step, source: Box::new(other) },
            },
        )?;
        if let Some(ema) = &mut self.ema {
            let d = T::of(self.config.ema_decay);
            for (e, (_, p)) in ema.tensors_mut().into_iter().zip(self.model.params.tensors()) {
                for (a, &b) in e.iter_mut().zip(p) {
                    *a = d * *a + (T::one() - d) * b;
                }
            }
        }
        self.step = step;
        Ok(loss)
    }

    pub fn checkpoint(&self, stats: &NormalizationStats<T>, roots: &RootMap) -> Checkpoint<T> {
        Checkpoint {
            step: self.step,
            model: self.model.clone(),
            train: Some(self.config.clone()),
            schedule: self.config.schedule_descriptor(),
            root_map: *roots,
            stats: stats.clone(),
            optimizer: Some(self.optimizer.clone()),
            ema: self.ema.clone(),
        }
    }
}

pub fn checkpoint_name(step: u64) -> String {
    format!("ckpt_{step:08}.bin")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub checkpoints: Vec<PathBuf>,
    /// `(step, loss)` for the steps executed by this call.
    pub losses: Vec<(u64, f64)>,
}

/// Trains until `total_steps`, saving every `checkpoint_every` steps and at
/// the final step. Losses are appended to `loss.tsv` in `out_dir`.
pub fn run<T: Real>(
    config: &TrainConfig,
    clips: &[Clip<T>],
    stats: &NormalizationStats<T>,
    roots: &RootMap,
    out_dir: &Path,
    resume: Option<&Path>,
) -> Result<RunSummary> {
    if clips.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let examples: Vec<_> =
        clips.iter().flat_map(|c| make_windows(c, config.window_frames, config.window_stride)).collect();
    let mut trainer = match resume {
        Some(path) => Trainer::resume(config.clone(), examples, Checkpoint::load(path)?)?,
        None => Trainer::new(config.clone(), examples)?,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let log_path = out_dir.join("loss.tsv");
    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(resume.is_some())
        .write(true)
        .truncate(resume.is_none())
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    tracing::info!(
        windows = trainer.examples().len(),
        params = trainer.model.params.num_params(),
        start = trainer.step,
        total = config.total_steps,
        "training"
    );

    let mut summary = RunSummary { checkpoints: Vec::new(), losses: Vec::new() };
    while trainer.step < config.total_steps {
        let loss = trainer.step()?;
        let step = trainer.step;
        summary.losses.push((step, loss));
        writeln!(log, "{step}\t{loss}")
            .map_err(|e| Error::AtStep { step, source: Box::new(Error::io(&log_path, e)) })?;
        if step % config.log_every.max(1) == 0 {
            tracing::info!(step, loss, "train");
        }
        if step % config.checkpoint_every == 0 || step == config.total_steps {
            let path = out_dir.join(checkpoint_name(step));
            trainer.checkpoint(stats, roots).save(&path).map_err(|e| Error::AtStep { step, source: Box::new(e) })?;
            summary.checkpoints.push(path);
        }
    }
    Ok(summary)
}
