//! Continuous-time LTI systems: representation, exact sampled simulation,
//! frequency response and system norms.

mod freq;
mod lyapunov;
mod norms;
mod signal;
mod sim;
mod statespace;

pub use freq::{freq_response, freq_response_siso, FrequencyEvaluator};
pub use lyapunov::solve_lyapunov;
pub use norms::{
    h2_norm, linf_norm, poles, spectral_abscissa, LinfNorm, DEFAULT_POINTS_PER_DECADE,
};
pub use signal::SampledSignal;
pub use sim::{foh, simulate_zoh, sinusoid_discretization, zoh, Discretization, Hold, Simulator};
pub use statespace::StateSpace;
