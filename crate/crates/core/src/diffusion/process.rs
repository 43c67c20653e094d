use ndarray::{Array2, Zip};

use super::NoiseSchedule;
use crate::error::{Error, Result};
use crate::real::Real;

fn same_shape<T>(context: &'static str, a: &Array2<T>, b: &Array2<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::dim(context, format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    Ok(())
}

/// x_t = √ᾱ_t · x₀ + √(1 − ᾱ_t) · ε
pub fn q_sample<T: Real>(x0: &Array2<T>, t: usize, eps: &Array2<T>, sched: &NoiseSchedule) -> Result<Array2<T>> {
    sched.check_step(t)?;
    same_shape("q_sample noise", x0, eps)?;
    let a = T::of(sched.alpha_bar[t].sqrt());
    let s = T::of((1.0 - sched.alpha_bar[t]).sqrt());
    Ok(Zip::from(x0).and(eps).map_collect(|&x, &e| a * x + s * e))
}

/// Mean squared error over all entries.
pub fn x0_loss<T: Real>(x0: &Array2<T>, x0_hat: &Array2<T>) -> Result<T> {
    same_shape("x0 loss", x0, x0_hat)?;
    if x0.is_empty() {
        return Ok(T::zero());
    }
    let sum = Zip::from(x0).and(x0_hat).fold(T::zero(), |acc, &a, &b| acc + (a - b) * (a - b));
    Ok(sum / T::of_usize(x0.len()))
}

/// One ancestral step x_t → x_{t-1} of the Gaussian posterior q(x_{t-1} | x_t, x̂₀).
///
/// `noise` is required for t > 0 (pass zeros for a deterministic step) and
/// must be absent or all-zero at t = 0, where the result is x̂₀ itself.
pub fn posterior_step<T: Real>(
    x_t: &Array2<T>,
    x0_hat: &Array2<T>,
    t: usize,
    sched: &NoiseSchedule,
    noise: Option<&Array2<T>>,
) -> Result<Array2<T>> {
    sched.check_step(t)?;
    same_shape("posterior step", x_t, x0_hat)?;
    if t == 0 {
        if noise.is_some_and(|n| n.iter().any(|v| !v.is_zero())) {
            return Err(Error::InvalidArgument("nonzero noise requested at t = 0".into()));
        }
        return Ok(x0_hat.clone());
    }
    let c0 = T::of(sched.posterior_coef_x0[t]);
    let ct = T::of(sched.posterior_coef_xt[t]);
    let mut mean = Zip::from(x0_hat).and(x_t).map_collect(|&x0, &xt| c0 * x0 + ct * xt);
    match noise {
        Some(n) => {
            same_shape("posterior noise", x_t, n)?;
            let sd = T::of(sched.posterior_var[t].sqrt());
            Zip::from(&mut mean).and(n).for_each(|m, &z| *m += sd * z);
        }
        None => {
            return Err(Error::InvalidArgument(format!("posterior step at t = {t} needs a noise draw")));
        }
    }
    Ok(mean)
}

/// Classifier-free guidance, written as (1 − α)·u + α·c so that α = 0 and
/// α = 1 reproduce the unconditional and conditional branches bit for bit.
pub fn cfg_combine<T: Real>(uncond: &Array2<T>, cond: &Array2<T>, alpha: T) -> Result<Array2<T>> {
    same_shape("guidance branches", uncond, cond)?;
    let keep = T::one() - alpha;
    Ok(Zip::from(uncond).and(cond).map_collect(|&u, &c| keep * u + alpha * c))
}
