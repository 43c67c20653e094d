//! Binary checkpoint: magic, format version, a JSON header (configs,
//! schedule, root map, normalization stats, tensor index) and the tensors
//! as little-endian f64 in index order.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::denoiser::{Denoiser, DenoiserConfig, DenoiserParams};
use crate::diffusion::ScheduleDescriptor;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::skeleton::{NormalizationStats, RootMap};
use crate::trainer::{Adam, TrainConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GSKCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    step: u64,
    model: DenoiserConfig,
    train: Option<TrainConfig>,
    schedule: ScheduleDescriptor,
    root_map: RootMap,
    stats_mean: Vec<f64>,
    stats_std: Vec<f64>,
    adam_step: Option<u64>,
    adam_lr: Option<f64>,
    has_ema: bool,
    tensors: Vec<TensorEntry>,
}

/// Everything needed to resume training or to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub step: u64,
    pub model: Denoiser<T>,
    pub train: Option<TrainConfig>,
    pub schedule: ScheduleDescriptor,
    pub root_map: RootMap,
    pub stats: NormalizationStats<T>,
    pub optimizer: Option<Adam<T>>,
    pub ema: Option<DenoiserParams<T>>,
}

impl<T: Real> Checkpoint<T> {
    /// Weights used for inference: the EMA copy when present.
    pub fn inference_model(&self) -> Denoiser<T> {
        match &self.ema {
            Some(ema) => Denoiser { config: self.model.config.clone(), params: ema.clone() },
            None => self.model.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut tensors: Vec<(String, &[T])> = self.model.params.tensors();
        if let Some(opt) = &self.optimizer {
            tensors.extend(opt.m.tensors().into_iter().map(|(n, t)| (format!("adam.m.{n}"), t)));
            tensors.extend(opt.v.tensors().into_iter().map(|(n, t)| (format!("adam.v.{n}"), t)));
        }
        if let Some(ema) = &self.ema {
            tensors.extend(ema.tensors().into_iter().map(|(n, t)| (format!("ema.{n}"), t)));
        }
        let header = Header {
            format_version: FORMAT_VERSION,
            step: self.step,
            model: self.model.config.clone(),
            train: self.train.clone(),
            schedule: self.schedule,
            root_map: self.root_map,
            stats_mean: self.stats.mean.iter().map(|v| v.f64()).collect(),
            stats_std: self.stats.std.iter().map(|v| v.f64()).collect(),
            adam_step: self.optimizer.as_ref().map(|o| o.step),
            adam_lr: self.optimizer.as_ref().map(|o| o.lr),
            has_ema: self.ema.is_some(),
            tensors: tensors.iter().map(|(n, t)| TensorEntry { name: n.clone(), len: t.len() }).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let total: usize = tensors.iter().map(|(_, t)| t.len()).sum();
        let mut buf = Vec::with_capacity(24 + json.len() + total * 8);
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        for (_, t) in &tensors {
            for v in t.iter() {
                buf.extend_from_slice(&v.f64().to_le_bytes());
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::format("checkpoint", path, reason);
        if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("missing checkpoint magic".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..20 + hlen).ok_or_else(|| bad("truncated header".into()))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| bad(e.to_string()))?;
        header.model.validate()?;

        let mut data = &bytes[20 + hlen..];
        let total: usize = header.tensors.iter().map(|t| t.len).sum();
        if data.len() != total * 8 {
            return Err(bad(format!("expected {} tensor bytes, found {}", total * 8, data.len())));
        }
        let mut take = |len: usize| -> Vec<f64> {
            let (head, rest) = data.split_at(len * 8);
            data = rest;
            head.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
        };
        let mut entries = header.tensors.iter();
        let mut fill = |params: &mut DenoiserParams<T>, prefix: &str, template: &DenoiserParams<T>| -> Result<()> {
            let names: Vec<String> = template.tensors().into_iter().map(|(n, _)| n).collect();
            for (dst, name) in params.tensors_mut().into_iter().zip(names) {
                let e = entries.next().ok_or_else(|| Error::Checkpoint(format!("missing tensor {prefix}{name}")))?;
                if e.name != format!("{prefix}{name}") || e.len != dst.len() {
                    return Err(Error::Checkpoint(format!(
                        "tensor {} (len {}) does not match expected {prefix}{name} (len {})",
                        e.name,
                        e.len,
                        dst.len()
                    )));
                }
                for (d, v) in dst.iter_mut().zip(take(e.len)) {
                    *d = T::of(v);
                }
            }
            Ok(())
        };
        let template = DenoiserParams::<T>::zeros(&header.model);
        let mut params = template.clone();
        fill(&mut params, "", &template)?;
        let optimizer = match header.adam_step {
            Some(step) => {
                let mut opt = Adam::new(&header.model, header.adam_lr.unwrap_or(0.0));
                opt.step = step;
                fill(&mut opt.m, "adam.m.", &template)?;
                fill(&mut opt.v, "adam.v.", &template)?;
                Some(opt)
            }
            None => None,
        };
        let ema = if header.has_ema {
            let mut ema = template.clone();
            fill(&mut ema, "ema.", &template)?;
            Some(ema)
        } else {
            None
        };
        if header.stats_mean.len() != header.model.pose_dim || header.stats_std.len() != header.model.pose_dim {
            return Err(Error::Checkpoint("normalization stats width does not match the model".into()));
        }
        let stats = NormalizationStats::new(
            Array1::from_iter(header.stats_mean.iter().map(|&v| T::of(v))),
            Array1::from_iter(header.stats_std.iter().map(|&v| T::of(v))),
        )?;
        Ok(Self {
            step: header.step,
            model: Denoiser::from_parts(header.model, params)?,
            train: header.train,
            schedule: header.schedule,
            root_map: header.root_map,
            stats,
            optimizer,
            ema,
        })
    }
}
