use ndarray::{s, Array1, Array2, Axis};

use super::layers::{
    attention_backward, attention_forward, gelu, gelu_grad, layer_norm, layer_norm_backward, modulate,
    modulate_backward, positional_encoding, silu, silu_grad, timestep_embedding, AttentionCache,
};
use super::params::DenoiserParams;
use super::{AttentionMode, ConditioningMode, DenoiserConfig};
use crate::real::Real;

/// One model evaluation's inputs after token assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserInput<T> {
    /// (F+1) × width with a reference token, F × width without.
    pub tokens: Array2<T>,
    /// F × audio_dim cross-attention memory (cross-attention mode only).
    pub memory: Option<Array2<T>>,
    /// Whether the null condition stands in for audio.
    pub null_condition: bool,
}

struct BlockCache<T> {
    modulation: Array1<T>,
    ln1: Array2<T>,
    ln1_rstd: Array1<T>,
    attn_in: Array2<T>,
    attn: AttentionCache<T>,
    attn_out: Array2<T>,
    cross: Option<(Array2<T>, Array1<T>, AttentionCache<T>)>,
    ln2: Array2<T>,
    ln2_rstd: Array1<T>,
    mlp_in: Array2<T>,
    fc1_out: Array2<T>,
    act: Array2<T>,
    mlp_out: Array2<T>,
}

pub(crate) struct ForwardCache<T> {
    temb: Array2<T>,
    time_hidden_pre: Array2<T>,
    time_hidden: Array2<T>,
    cond: Array2<T>,
    cond_act: Array2<T>,
    memory_in: Option<Array2<T>>,
    memory: Option<Array2<T>>,
    blocks: Vec<BlockCache<T>>,
    final_mod: Array1<T>,
    final_ln: Array2<T>,
    final_ln_rstd: Array1<T>,
    final_in: Array2<T>,
}

fn chunk<T: Real>(v: &Array1<T>, i: usize, d: usize) -> Array1<T> {
    v.slice(s![i * d..(i + 1) * d]).to_owned()
}

/// Evaluates the transformer on assembled tokens; returns predictions for
/// the frame tokens only (the reference token's output is dropped).
pub(crate) fn forward<T: Real>(
    config: &DenoiserConfig,
    params: &DenoiserParams<T>,
    input: &DenoiserInput<T>,
    t: usize,
) -> (Array2<T>, ForwardCache<T>) {
    let d = config.d_model;
    let heads = config.n_heads;
    let identity = config.attention == AttentionMode::Identity;
    let n = input.tokens.nrows();

    let temb = timestep_embedding::<T>(t as f64, config.time_embed_dim).insert_axis(Axis(0));
    let time_hidden_pre = params.time1.forward(&temb.view());
    let time_hidden = time_hidden_pre.mapv(silu);
    let cond = params.time2.forward(&time_hidden.view());
    let cond_act = cond.mapv(silu);

    let mut h = params.input.forward(&input.tokens.view());
    h += &positional_encoding::<T>(0, n, d);

    let (memory_in, memory) = match (&params.audio_proj, &input.memory) {
        (Some(proj), Some(mem)) => {
            let mut m = proj.forward(&mem.view());
            m += &positional_encoding::<T>(config.frame_offset(), mem.nrows(), d);
            (Some(mem.clone()), Some(m))
        }
        _ => (None, None),
    };

    let mut caches = Vec::with_capacity(params.blocks.len());
    for block in &params.blocks {
        let modulation = block.modulation.forward(&cond_act.view()).row(0).to_owned();
        let (shift1, scale1, gate1) = (chunk(&modulation, 0, d), chunk(&modulation, 1, d), chunk(&modulation, 2, d));
        let (shift2, scale2, gate2) = (chunk(&modulation, 3, d), chunk(&modulation, 4, d), chunk(&modulation, 5, d));

        let (ln1, ln1_rstd) = layer_norm(&h);
        let attn_in = modulate(&ln1, &shift1, &scale1);
        let (attn_out, attn) = attention_forward(&block.attn, &attn_in, &attn_in, heads, identity);
        h = &h + &(&attn_out * &gate1.view().insert_axis(Axis(0)));

        let cross = match (&block.cross_attn, &memory) {
            (Some(ca), Some(mem)) => {
                let (lnc, lnc_rstd) = layer_norm(&h);
                let (out, cache) = attention_forward(ca, &lnc, mem, heads, false);
                h += &out;
                Some((lnc, lnc_rstd, cache))
            }
            _ => None,
        };

        let (ln2, ln2_rstd) = layer_norm(&h);
        let mlp_in = modulate(&ln2, &shift2, &scale2);
        let fc1_out = block.fc1.forward(&mlp_in.view());
        let act = fc1_out.mapv(gelu);
        let mlp_out = block.fc2.forward(&act.view());
        h = &h + &(&mlp_out * &gate2.view().insert_axis(Axis(0)));

        caches.push(BlockCache {
            modulation,
            ln1,
            ln1_rstd,
            attn_in,
            attn,
            attn_out,
            cross,
            ln2,
            ln2_rstd,
            mlp_in,
            fc1_out,
            act,
            mlp_out,
        });
    }

    let final_mod = params.final_modulation.forward(&cond_act.view()).row(0).to_owned();
    let (shift, scale) = (chunk(&final_mod, 0, d), chunk(&final_mod, 1, d));
    let (final_ln, final_ln_rstd) = layer_norm(&h);
    let final_in = modulate(&final_ln, &shift, &scale);
    let out = params.output.forward(&final_in.view());
    let frames = out.slice(s![config.frame_offset().., ..]).to_owned();
    (
        frames,
        ForwardCache {
            temb,
            time_hidden_pre,
            time_hidden,
            cond,
            cond_act,
            memory_in,
            memory,
            blocks: caches,
            final_mod,
            final_ln,
            final_ln_rstd,
            final_in,
        },
    )
}

/// Backpropagates dL/d(frame predictions), accumulating into `grad`.
pub(crate) fn backward<T: Real>(
    config: &DenoiserConfig,
    params: &DenoiserParams<T>,
    input: &DenoiserInput<T>,
    cache: &ForwardCache<T>,
    d_frames: &Array2<T>,
    grad: &mut DenoiserParams<T>,
) {
    let d = config.d_model;
    let offset = config.frame_offset();
    let n = input.tokens.nrows();

    let mut dout = Array2::zeros((n, config.pose_dim));
    dout.slice_mut(s![offset.., ..]).assign(d_frames);
    let dfinal_in = params.output.backward(&cache.final_in.view(), &dout, &mut grad.output);
    let scale = chunk(&cache.final_mod, 1, d);
    let (dfinal_ln, dshift, dscale) = modulate_backward(&cache.final_ln, &scale, &dfinal_in);
    let mut dh = layer_norm_backward(&cache.final_ln, &cache.final_ln_rstd, &dfinal_ln);
    let mut dfinal_mod = Array1::zeros(2 * d);
    dfinal_mod.slice_mut(s![0..d]).assign(&dshift);
    dfinal_mod.slice_mut(s![d..2 * d]).assign(&dscale);
    let dfinal_mod = dfinal_mod.insert_axis(Axis(0));
    let mut dcond_act =
        params.final_modulation.backward(&cache.cond_act.view(), &dfinal_mod, &mut grad.final_modulation);

    let mut dmemory: Option<Array2<T>> = cache.memory.as_ref().map(|m| Array2::zeros(m.dim()));

    for ((block, bc), bgrad) in params.blocks.iter().zip(&cache.blocks).zip(grad.blocks.iter_mut()).rev() {
        let m = &bc.modulation;
        let (scale1, gate1) = (chunk(m, 1, d), chunk(m, 2, d));
        let (scale2, gate2) = (chunk(m, 4, d), chunk(m, 5, d));
        let mut dmod = Array1::<T>::zeros(6 * d);

        // MLP residual
        let dmlp_out = &dh * &gate2.view().insert_axis(Axis(0));
        dmod.slice_mut(s![5 * d..6 * d]).assign(&(&dh * &bc.mlp_out).sum_axis(Axis(0)));
        let dact = block.fc2.backward(&bc.act.view(), &dmlp_out, &mut bgrad.fc2);
        let dfc1 = &dact * &bc.fc1_out.mapv(gelu_grad);
        let dmlp_in = block.fc1.backward(&bc.mlp_in.view(), &dfc1, &mut bgrad.fc1);
        let (dln2, dshift2, dscale2) = modulate_backward(&bc.ln2, &scale2, &dmlp_in);
        dmod.slice_mut(s![3 * d..4 * d]).assign(&dshift2);
        dmod.slice_mut(s![4 * d..5 * d]).assign(&dscale2);
        dh += &layer_norm_backward(&bc.ln2, &bc.ln2_rstd, &dln2);

        // cross-attention residual
        if let (Some((lnc, lnc_rstd, ccache)), Some(ca), Some(cagrad), Some(mem), Some(dmem)) =
            (&bc.cross, &block.cross_attn, bgrad.cross_attn.as_mut(), cache.memory.as_ref(), dmemory.as_mut())
        {
            let (dq, dkv) = attention_backward(ca, ccache, lnc, mem, &dh, cagrad);
            *dmem += &dkv;
            dh += &layer_norm_backward(lnc, lnc_rstd, &dq);
        }

        // attention residual
        let dattn_out = &dh * &gate1.view().insert_axis(Axis(0));
        dmod.slice_mut(s![2 * d..3 * d]).assign(&(&dh * &bc.attn_out).sum_axis(Axis(0)));
        let (dq, dkv) =
            attention_backward(&block.attn, &bc.attn, &bc.attn_in, &bc.attn_in, &dattn_out, &mut bgrad.attn);
        let dattn_in = dq + dkv;
        let (dln1, dshift1, dscale1) = modulate_backward(&bc.ln1, &scale1, &dattn_in);
        dmod.slice_mut(s![0..d]).assign(&dshift1);
        dmod.slice_mut(s![d..2 * d]).assign(&dscale1);
        dh += &layer_norm_backward(&bc.ln1, &bc.ln1_rstd, &dln1);

        let dmod = dmod.insert_axis(Axis(0));
        dcond_act += &block.modulation.backward(&cache.cond_act.view(), &dmod, &mut bgrad.modulation);
    }

    // timestep MLP
    let dcond = &dcond_act * &cache.cond.mapv(silu_grad);
    let dtime_hidden = params.time2.backward(&cache.time_hidden.view(), &dcond, &mut grad.time2);
    let dtime_pre = &dtime_hidden * &cache.time_hidden_pre.mapv(silu_grad);
    params.time1.accumulate(&cache.temb.view(), &dtime_pre, &mut grad.time1);

    // input projection; the null vector receives the audio-column gradient
    params.input.accumulate(&input.tokens.view(), &dh, &mut grad.input);
    match (config.conditioning, &params.audio_proj, dmemory, &cache.memory_in) {
        (ConditioningMode::FeatureConcat, _, _, _) => {
            if input.null_condition {
                let summed = dh.slice(s![offset.., ..]).sum_axis(Axis(0)).insert_axis(Axis(0));
                let w_audio = params.input.w.slice(s![config.pose_dim.., ..]);
                grad.null_condition += &summed.dot(&w_audio.t()).row(0);
            }
        }
        (ConditioningMode::CrossAttention, Some(proj), Some(dmem), Some(mem_in)) => {
            let gproj = grad.audio_proj.as_mut().expect("cross-attention gradient buffer");
            proj.accumulate(&mem_in.view(), &dmem, gproj);
            if input.null_condition {
                let summed = dmem.sum_axis(Axis(0)).insert_axis(Axis(0));
                grad.null_condition += &summed.dot(&proj.w.t()).row(0);
            }
        }
        _ => {}
    }
}
