use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Cosine,
    Linear,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "linear" => Ok(Self::Linear),
            other => Err(Error::InvalidArgument(format!("unknown schedule kind {other:?}"))),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cosine => "cosine",
            Self::Linear => "linear",
        })
    }
}

/// What gets persisted with a checkpoint; the table is rebuilt from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleDescriptor {
    pub kind: ScheduleKind,
    pub steps: usize,
}

impl Default for ScheduleDescriptor {
    fn default() -> Self {
        Self { kind: ScheduleKind::Cosine, steps: 1000 }
    }
}

impl ScheduleDescriptor {
    pub fn build(&self) -> Result<NoiseSchedule> {
        make_schedule(self.kind, self.steps)
    }
}

/// Per-step coefficient table, kept in `f64` regardless of the state scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub beta: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    pub posterior_var: Vec<f64>,
    /// Weight of x̂₀ in the posterior mean.
    pub posterior_coef_x0: Vec<f64>,
    /// Weight of x_t in the posterior mean.
    pub posterior_coef_xt: Vec<f64>,
    pub descriptor: Option<ScheduleDescriptor>,
}

impl NoiseSchedule {
    /// Builds the table from explicit betas, each in (0, 1).
    pub fn from_betas(beta: Vec<f64>) -> Result<Self> {
        if beta.len() < 2 {
            return Err(Error::InvalidArgument(format!("schedule needs T >= 2, got {}", beta.len())));
        }
        if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::InvalidArgument(format!("beta {b} outside (0, 1)")));
        }
        let n = beta.len();
        let mut alpha_bar = Vec::with_capacity(n);
        let mut acc = 1.0;
        for b in &beta {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        let mut posterior_var = Vec::with_capacity(n);
        let mut coef_x0 = Vec::with_capacity(n);
        let mut coef_xt = Vec::with_capacity(n);
        // t = 0 is exact: the posterior collapses onto x̂₀
        posterior_var.push(0.0);
        coef_x0.push(1.0);
        coef_xt.push(0.0);
        for t in 1..n {
            let prev = alpha_bar[t - 1];
            let one_minus = 1.0 - alpha_bar[t];
            posterior_var.push(beta[t] * (1.0 - prev) / one_minus);
            coef_x0.push(prev.sqrt() * beta[t] / one_minus);
            coef_xt.push((1.0 - beta[t]).sqrt() * (1.0 - prev) / one_minus);
        }
        Ok(Self {
            beta,
            alpha_bar,
            posterior_var,
            posterior_coef_x0: coef_x0,
            posterior_coef_xt: coef_xt,
            descriptor: None,
        })
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub(crate) fn check_step(&self, t: usize) -> Result<()> {
        if t >= self.steps() {
            return Err(Error::InvalidArgument(format!("timestep {t} outside [0, {})", self.steps())));
        }
        Ok(())
    }

    /// Strict monotonicity plus the endpoint bounds expected of a full
    /// schedule (ᾱ₀ > 0.99, ᾱ_{T-1} < 0.01).
    pub fn satisfies_endpoint_bounds(&self) -> bool {
        self.alpha_bar.windows(2).all(|w| w[1] < w[0])
            && self.alpha_bar[0] > 0.99
            && *self.alpha_bar.last().unwrap() < 0.01
    }
}

const COSINE_OFFSET: f64 = 0.008;
const MAX_BETA: f64 = 0.999;
pub const LINEAR_BETA_START: f64 = 1e-4;
pub const LINEAR_BETA_END: f64 = 0.02;

/// Cosine schedule ᾱ(t) = cos²(((t/T) + s)/(1 + s) · π/2) normalized by its
/// value at 0, or linear betas from 1e-4 to 0.02.
pub fn make_schedule(kind: ScheduleKind, steps: usize) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("schedule needs T >= 2, got {steps}")));
    }
    let beta: Vec<f64> = match kind {
        ScheduleKind::Cosine => {
            let f = |t: f64| (((t / steps as f64) + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * FRAC_PI_2).cos().powi(2);
            (0..steps).map(|t| (1.0 - f(t as f64 + 1.0) / f(t as f64)).clamp(1e-12, MAX_BETA)).collect()
        }
        ScheduleKind::Linear => (0..steps)
            .map(|t| LINEAR_BETA_START + (LINEAR_BETA_END - LINEAR_BETA_START) * t as f64 / (steps - 1) as f64)
            .collect(),
    };
    let mut sched = NoiseSchedule::from_betas(beta)?;
    sched.descriptor = Some(ScheduleDescriptor { kind, steps });
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_thousand_steps_bounds() {
        let s = make_schedule(ScheduleKind::Cosine, 1000).unwrap();
        assert!(s.satisfies_endpoint_bounds());
        assert!(s.beta.iter().all(|b| *b > 0.0 && *b < 1.0));
    }

    #[test]
    fn linear_first_term() {
        let s = make_schedule(ScheduleKind::Linear, 10).unwrap();
        assert_eq!(s.alpha_bar[0], 1.0 - 1e-4);
        assert!((s.beta[9] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn alpha_bar_is_running_product() {
        for s in [make_schedule(ScheduleKind::Cosine, 257).unwrap(), make_schedule(ScheduleKind::Linear, 1000).unwrap()]
        {
            let mut p = 1.0f64;
            for t in 0..s.steps() {
                p *= 1.0 - s.beta[t];
                assert!((s.alpha_bar[t] - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(make_schedule(ScheduleKind::Cosine, 1).is_err());
        assert!(NoiseSchedule::from_betas(vec![0.1, 1.0]).is_err());
        assert!("quadratic".parse::<ScheduleKind>().is_err());
        assert_eq!("cosine".parse::<ScheduleKind>().unwrap(), ScheduleKind::Cosine);
    }

    #[test]
    fn terminal_posterior_variance_is_zero() {
        let s = make_schedule(ScheduleKind::Cosine, 50).unwrap();
        assert_eq!(s.posterior_var[0], 0.0);
        assert_eq!(s.posterior_coef_x0[0], 1.0);
        assert_eq!(s.posterior_coef_xt[0], 0.0);
    }
}
