use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::layers::{Attention, Linear};
use super::{ConditioningMode, DenoiserConfig};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    /// SiLU(c) → shift, scale, gate for attention and MLP (6·d outputs).
    pub modulation: Linear<T>,
    pub attn: Attention<T>,
    pub cross_attn: Option<Attention<T>>,
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
}

/// Every learnable tensor of the denoiser, including the null condition.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams<T> {
    pub input: Linear<T>,
    pub audio_proj: Option<Linear<T>>,
    pub time1: Linear<T>,
    pub time2: Linear<T>,
    pub null_condition: Array1<T>,
    pub blocks: Vec<Block<T>>,
    pub final_modulation: Linear<T>,
    pub output: Linear<T>,
}

fn xavier<T: Real>(rng: &mut ChaCha8Rng, input: usize, output: usize, gain: f64) -> Linear<T> {
    let bound = gain * (6.0 / (input + output) as f64).sqrt();
    Linear {
        w: Array2::from_shape_simple_fn((input, output), || T::of(rng.random_range(-bound..bound))),
        b: Array1::zeros(output),
    }
}

/// Output projection gain; near zero so early predictions sit at the data mean.
const OUTPUT_GAIN: f64 = 1e-2;
const MODULATION_GAIN: f64 = 0.1;

impl<T: Real> DenoiserParams<T> {
    /// Zero tensors shaped for `config` (gradient and optimizer buffers).
    pub fn zeros(config: &DenoiserConfig) -> Self {
        let d = config.d_model;
        let cross = config.conditioning == ConditioningMode::CrossAttention;
        Self {
            input: Linear::zeros(config.token_width(), d),
            audio_proj: cross.then(|| Linear::zeros(config.audio_dim, d)),
            time1: Linear::zeros(config.time_embed_dim, d),
            time2: Linear::zeros(d, d),
            null_condition: Array1::zeros(config.audio_dim),
            blocks: (0..config.n_layers)
                .map(|_| Block {
                    modulation: Linear::zeros(d, 6 * d),
                    attn: Attention::zeros(d),
                    cross_attn: cross.then(|| Attention::zeros(d)),
                    fc1: Linear::zeros(d, config.mlp_dim()),
                    fc2: Linear::zeros(config.mlp_dim(), d),
                })
                .collect(),
            final_modulation: Linear::zeros(d, 2 * d),
            output: Linear::zeros(d, config.pose_dim),
        }
    }

    /// Deterministic initialization from `seed`.
    pub fn init(config: &DenoiserConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let m = config.mlp_dim();
        let cross = config.conditioning == ConditioningMode::CrossAttention;
        let r = &mut rng;
        let attention = |r: &mut ChaCha8Rng| Attention {
            q: xavier(r, d, d, 1.0),
            k: xavier(r, d, d, 1.0),
            v: xavier(r, d, d, 1.0),
            o: xavier(r, d, d, 1.0),
        };
        let input = xavier(r, config.token_width(), d, 1.0);
        let audio_proj = cross.then(|| xavier(r, config.audio_dim, d, 1.0));
        let time1 = xavier(r, config.time_embed_dim, d, 1.0);
        let time2 = xavier(r, d, d, 1.0);
        let null_condition = Array1::from_shape_simple_fn(config.audio_dim, || {
            let z: f64 = StandardNormal.sample(r);
            T::of(z)
        });
        let blocks = (0..config.n_layers)
            .map(|_| Block {
                modulation: xavier(r, d, 6 * d, MODULATION_GAIN),
                attn: attention(r),
                cross_attn: cross.then(|| attention(r)),
                fc1: xavier(r, d, m, 1.0),
                fc2: xavier(r, m, d, 1.0),
            })
            .collect();
        let final_modulation = xavier(r, d, 2 * d, MODULATION_GAIN);
        let output = xavier(r, d, config.pose_dim, OUTPUT_GAIN);
        Self { input, audio_proj, time1, time2, null_condition, blocks, final_modulation, output }
    }

    /// Named views of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = Vec::new();
        fn lin<'a, T>(out: &mut Vec<(String, &'a [T])>, name: &str, l: &'a Linear<T>) {
            out.push((format!("{name}.weight"), l.w.as_slice().expect("contiguous")));
            out.push((format!("{name}.bias"), l.b.as_slice().expect("contiguous")));
        }
        fn att<'a, T>(out: &mut Vec<(String, &'a [T])>, name: &str, a: &'a Attention<T>) {
            for (n, l) in [("q", &a.q), ("k", &a.k), ("v", &a.v), ("o", &a.o)] {
                lin(out, &format!("{name}.{n}"), l);
            }
        }
        lin(&mut out, "input", &self.input);
        if let Some(a) = &self.audio_proj {
            lin(&mut out, "audio_proj", a);
        }
        lin(&mut out, "time1", &self.time1);
        lin(&mut out, "time2", &self.time2);
        out.push(("null_condition".into(), self.null_condition.as_slice().expect("contiguous")));
        for (i, b) in self.blocks.iter().enumerate() {
            lin(&mut out, &format!("blocks.{i}.modulation"), &b.modulation);
            att(&mut out, &format!("blocks.{i}.attn"), &b.attn);
            if let Some(c) = &b.cross_attn {
                att(&mut out, &format!("blocks.{i}.cross_attn"), c);
            }
            lin(&mut out, &format!("blocks.{i}.fc1"), &b.fc1);
            lin(&mut out, &format!("blocks.{i}.fc2"), &b.fc2);
        }
        lin(&mut out, "final_modulation", &self.final_modulation);
        lin(&mut out, "output", &self.output);
        out
    }

    /// Mutable counterpart of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        fn lin<'a, T>(out: &mut Vec<&'a mut [T]>, l: &'a mut Linear<T>) {
            out.push(l.w.as_slice_mut().expect("contiguous"));
            out.push(l.b.as_slice_mut().expect("contiguous"));
        }
        fn att<'a, T>(out: &mut Vec<&'a mut [T]>, a: &'a mut Attention<T>) {
            lin(out, &mut a.q);
            lin(out, &mut a.k);
            lin(out, &mut a.v);
            lin(out, &mut a.o);
        }
        lin(&mut out, &mut self.input);
        if let Some(a) = &mut self.audio_proj {
            lin(&mut out, a);
        }
        lin(&mut out, &mut self.time1);
        lin(&mut out, &mut self.time2);
        out.push(self.null_condition.as_slice_mut().expect("contiguous"));
        for b in &mut self.blocks {
            lin(&mut out, &mut b.modulation);
            att(&mut out, &mut b.attn);
            if let Some(c) = &mut b.cross_attn {
                att(&mut out, c);
            }
            lin(&mut out, &mut b.fc1);
            lin(&mut out, &mut b.fc2);
        }
        lin(&mut out, &mut self.final_modulation);
        lin(&mut out, &mut self.output);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, &b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }

    pub fn cast<U: Real>(&self, config: &DenoiserConfig) -> DenoiserParams<U> {
        let mut out = DenoiserParams::<U>::zeros(config);
        for (dst, (_, src)) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (a, &b) in dst.iter_mut().zip(src) {
                *a = U::of(b.f64());
            }
        }
        out
    }
}
