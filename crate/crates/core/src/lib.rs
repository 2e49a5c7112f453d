//! Plug-and-Play reconstruction with linear kernel denoisers.
//!
//! The crate builds kernel denoisers `W = D^{-1} K` from a guide image, runs
//! PnP-ISTA and PnP-ADMM together with their variants scaled by `D`, measures
//! the contraction factor of each update operator by power iteration, and
//! evaluates the closed-form contraction bounds.
//!
//! With the default `parallel` feature, kernel construction and operator
//! applications run on rayon; without it the same code runs sequentially and
//! produces identical results.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod denoiser;
pub mod error;
pub mod forward;
pub mod image;
pub mod linop;
pub mod par;
pub mod solver;
pub mod spectral;

pub use denoiser::{DenoiserMode, KernelDenoiser, KernelParams, WindowProfile};
pub use error::{Error, Result};
pub use forward::{BlurKernel, ForwardModel, InpaintingMask, Subsampler, Task};
pub use linop::{d_inner, d_norm, DiagonalWeights, LinearMap, VecImage};
pub use solver::{Algorithm, Init, LossSpec, SolverConfig, Trajectory};
pub use spectral::{PowerConfig, SpectralReport};
