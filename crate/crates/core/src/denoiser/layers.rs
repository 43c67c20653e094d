//! Forward/backward primitives on row-major token matrices.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

use crate::real::Real;

pub(crate) const LN_EPS: f64 = 1e-6;

/// Affine map `x · w + b` with `w` stored input-major (in × out).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { w: Array2::zeros((input, output)), b: Array1::zeros(output) }
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &ArrayView2<T>) -> Array2<T> {
        let mut y = x.dot(&self.w);
        y += &self.b.view().insert_axis(Axis(0));
        y
    }

    /// Accumulates weight gradients into `grad` and returns dL/dx.
    pub fn backward(&self, x: &ArrayView2<T>, dy: &Array2<T>, grad: &mut Linear<T>) -> Array2<T> {
        self.accumulate(x, dy, grad);
        dy.dot(&self.w.t())
    }

    /// Weight gradients only, for layers whose input needs no gradient.
    pub fn accumulate(&self, x: &ArrayView2<T>, dy: &Array2<T>, grad: &mut Linear<T>) {
        ndarray::linalg::general_mat_mul(T::one(), &x.t(), dy, T::one(), &mut grad.w);
        grad.b += &dy.sum_axis(Axis(0));
    }
}

pub(crate) fn silu<T: Real>(x: T) -> T {
    x / (T::one() + (-x).exp())
}

pub(crate) fn silu_grad<T: Real>(x: T) -> T {
    let s = T::one() / (T::one() + (-x).exp());
    s * (T::one() + x * (T::one() - s))
}

// tanh approximation of GELU
pub(crate) fn gelu<T: Real>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let k = T::of(0.044715);
    let half = T::of(0.5);
    half * x * (T::one() + (c * (x + k * x * x * x)).tanh())
}

pub(crate) fn gelu_grad<T: Real>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let k = T::of(0.044715);
    let half = T::of(0.5);
    let inner = c * (x + k * x * x * x);
    let th = inner.tanh();
    let sech2 = T::one() - th * th;
    half * (T::one() + th) + half * x * sech2 * c * (T::one() + T::of(3.0) * k * x * x)
}

/// Parameter-free layer norm over the feature axis; returns (output, 1/σ per row).
pub(crate) fn layer_norm<T: Real>(x: &Array2<T>) -> (Array2<T>, Array1<T>) {
    let d = T::of_usize(x.ncols());
    let eps = T::of(LN_EPS);
    let mut y = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in y.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<T>() / d;
        *r = T::one() / (var + eps).sqrt();
        let rr = *r;
        row.mapv_inplace(|v| v * rr);
    }
    (y, rstd)
}

pub(crate) fn layer_norm_backward<T: Real>(y: &Array2<T>, rstd: &Array1<T>, dy: &Array2<T>) -> Array2<T> {
    let d = T::of_usize(y.ncols());
    let mut dx = dy.clone();
    for ((mut out, yr), &r) in dx.rows_mut().into_iter().zip(y.rows()).zip(rstd) {
        let mean_dy = out.sum() / d;
        let mean_dyy = out.iter().zip(yr).map(|(&a, &b)| a * b).sum::<T>() / d;
        Zip::from(&mut out).and(&yr).for_each(|g, &yv| *g = r * (*g - mean_dy - yv * mean_dyy));
    }
    dx
}

/// `x ⊙ (1 + scale) + shift` with row vectors broadcast over tokens.
pub(crate) fn modulate<T: Real>(x: &Array2<T>, shift: &Array1<T>, scale: &Array1<T>) -> Array2<T> {
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        Zip::from(&mut row).and(scale).and(shift).for_each(|v, &sc, &sh| *v = *v * (T::one() + sc) + sh);
    }
    y
}

/// Returns (dx, dshift, dscale).
pub(crate) fn modulate_backward<T: Real>(
    x: &Array2<T>,
    scale: &Array1<T>,
    dy: &Array2<T>,
) -> (Array2<T>, Array1<T>, Array1<T>) {
    let dshift = dy.sum_axis(Axis(0));
    let dscale = (dy * x).sum_axis(Axis(0));
    let mut dx = dy.clone();
    for mut row in dx.rows_mut() {
        Zip::from(&mut row).and(scale).for_each(|v, &sc| *v *= T::one() + sc);
    }
    (dx, dshift, dscale)
}

/// Sinusoidal embedding of a scalar (timestep), `[cos | sin]` halves.
pub(crate) fn timestep_embedding<T: Real>(t: f64, dim: usize) -> Array1<T> {
    let half = dim / 2;
    let mut out = Array1::zeros(dim);
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
        out[i] = T::of((t * freq).cos());
        out[half + i] = T::of((t * freq).sin());
    }
    out
}

/// Standard sinusoidal position table for token positions `start..start + n`.
pub(crate) fn positional_encoding<T: Real>(start: usize, n: usize, dim: usize) -> Array2<T> {
    Array2::from_shape_fn((n, dim), |(p, j)| {
        let pos = (start + p) as f64;
        let rate = 10_000f64.powf(-((j / 2 * 2) as f64) / dim as f64);
        T::of(if j % 2 == 0 { (pos * rate).sin() } else { (pos * rate).cos() })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention<T> {
    pub q: Linear<T>,
    pub k: Linear<T>,
    pub v: Linear<T>,
    pub o: Linear<T>,
}

impl<T: Real> Attention<T> {
    pub fn zeros(d: usize) -> Self {
        Self { q: Linear::zeros(d, d), k: Linear::zeros(d, d), v: Linear::zeros(d, d), o: Linear::zeros(d, d) }
    }
}

pub(crate) struct AttentionCache<T> {
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    /// Softmax weights per head (empty in identity mode).
    probs: Vec<Array2<T>>,
    mixed: Array2<T>,
}

/// Multi-head attention from `queries` onto `keys_values`. With
/// `identity` set every token attends only to itself.
pub(crate) fn attention_forward<T: Real>(
    p: &Attention<T>,
    queries: &Array2<T>,
    keys_values: &Array2<T>,
    heads: usize,
    identity: bool,
) -> (Array2<T>, AttentionCache<T>) {
    let v = p.v.forward(&keys_values.view());
    if identity {
        let out = p.o.forward(&v.view());
        let cache = AttentionCache {
            q: Array2::zeros((0, 0)),
            k: Array2::zeros((0, 0)),
            mixed: v.clone(),
            v,
            probs: Vec::new(),
        };
        return (out, cache);
    }
    let q = p.q.forward(&queries.view());
    let k = p.k.forward(&keys_values.view());
    let d = q.ncols();
    let dh = d / heads;
    let scale = T::one() / T::of_usize(dh).sqrt();
    let mut mixed = Array2::zeros((q.nrows(), d));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t());
        for mut row in scores.rows_mut() {
            let max = row.fold(T::neg_infinity(), |m, &v| m.max(v));
            row.mapv_inplace(|v| ((v - max) * scale).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        mixed.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }
    let out = p.o.forward(&mixed.view());
    (out, AttentionCache { q, k, v, probs, mixed })
}

/// Returns (d queries, d keys_values); the two alias the same tensor for
/// self-attention and must then be summed by the caller.
pub(crate) fn attention_backward<T: Real>(
    p: &Attention<T>,
    cache: &AttentionCache<T>,
    queries: &Array2<T>,
    keys_values: &Array2<T>,
    dout: &Array2<T>,
    grad: &mut Attention<T>,
) -> (Array2<T>, Array2<T>) {
    let dmixed = p.o.backward(&cache.mixed.view(), dout, &mut grad.o);
    if cache.probs.is_empty() {
        let dkv = p.v.backward(&keys_values.view(), &dmixed, &mut grad.v);
        return (Array2::zeros(queries.dim()), dkv);
    }
    let heads = cache.probs.len();
    let d = cache.q.ncols();
    let dh = d / heads;
    let scale = T::one() / T::of_usize(dh).sqrt();
    let mut dq = Array2::zeros(cache.q.dim());
    let mut dk = Array2::zeros(cache.k.dim());
    let mut dv = Array2::zeros(cache.v.dim());
    for (h, probs) in cache.probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let dm = dmixed.slice(cols);
        let mut dscores = dm.dot(&cache.v.slice(cols).t());
        dv.slice_mut(cols).assign(&probs.t().dot(&dm));
        for (mut ds, pr) in dscores.rows_mut().into_iter().zip(probs.rows()) {
            let dot = ds.iter().zip(pr).map(|(&a, &b)| a * b).sum::<T>();
            Zip::from(&mut ds).and(&pr).for_each(|g, &pv| *g = pv * (*g - dot) * scale);
        }
        dq.slice_mut(cols).assign(&dscores.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&dscores.t().dot(&cache.q.slice(cols)));
    }
    let dqueries = p.q.backward(&queries.view(), &dq, &mut grad.q);
    let mut dkv = p.k.backward(&keys_values.view(), &dk, &mut grad.k);
    dkv += &p.v.backward(&keys_values.view(), &dv, &mut grad.v);
    (dqueries, dkv)
}
