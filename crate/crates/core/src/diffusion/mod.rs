//! Gaussian diffusion in x₀ parametrization: schedule, forward corruption,
//! posterior (ancestral) step, classifier-free guidance and the sampling loop.

mod process;
mod sampler;
mod schedule;

pub use process::{cfg_combine, posterior_step, q_sample, x0_loss};
pub use sampler::{sample, standard_normal, Condition, Denoise, GuidanceConfig, DEFAULT_GUIDANCE};
pub use schedule::{make_schedule, NoiseSchedule, ScheduleDescriptor, ScheduleKind};
