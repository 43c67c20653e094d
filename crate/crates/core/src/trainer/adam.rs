use crate::denoiser::{DenoiserConfig, DenoiserParams};
use crate::real::Real;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moment buffers with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub step: u64,
    pub m: DenoiserParams<T>,
    pub v: DenoiserParams<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: &DenoiserConfig, lr: f64) -> Self {
        Self { lr, step: 0, m: DenoiserParams::zeros(config), v: DenoiserParams::zeros(config) }
    }

    pub fn update(&mut self, params: &mut DenoiserParams<T>, grad: &DenoiserParams<T>) {
        self.step += 1;
        let (b1, b2) = (T::of(BETA1), T::of(BETA2));
        let c1 = T::of(1.0 - BETA1.powf(self.step as f64));
        let c2 = T::of(1.0 - BETA2.powf(self.step as f64));
        let lr = T::of(self.lr);
        let eps = T::of(EPSILON);
        let grads = grad.tensors();
        for (((p, m), v), (_, g)) in
            params.tensors_mut().into_iter().zip(self.m.tensors_mut()).zip(self.v.tensors_mut()).zip(grads)
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
