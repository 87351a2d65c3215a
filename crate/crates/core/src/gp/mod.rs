//! Gaussian-process surrogate with Matérn-5/2 ARD kernel.

mod acquisition;
mod kernel;
mod model;

pub use acquisition::{
    ei_from_moments, expected_improvement, normal_cdf, normal_pdf, suggest, suggest_top_k,
    CandidateSource, Direction, ScoredCandidate, REFINE_ITERATIONS,
};
pub use kernel::{
    matern52, KernelParams, LengthscaleBox, DEFAULT_LENGTHSCALE_BOUNDS, NOISE_BOUNDS, SIGNAL_BOUNDS,
};
pub use model::{fit_invocations, log_marginal_likelihood, GpModel, GpSnapshot};
