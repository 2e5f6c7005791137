//! Gaussian and Gaussian-mixture densities, fitting, and conditioning.

mod conditional;
mod em;
mod gaussian;
mod mixture;

pub use conditional::{
    gaussian_conditional, gmm_conditional, GaussianBackwardKernel, JointBlocks,
    MixtureBackwardKernel,
};
pub use em::{fit_gmm, fit_gmm_with, EmInit, EmOptions, GmmFit, EMPTY_COMPONENT_MASS};
pub(crate) use gaussian::weighted_moments;
pub use gaussian::{fit_gaussian, GaussianParams};
pub use mixture::{GmmParams, WEIGHT_SUM_TOL};
