//! Deformable 3-D image registration driven by a differentiable
//! Parzen-window mutual-information loss.
//!
//! The crate is organised around five pieces:
//!
//! - [`volume`]: scalar volumes, displacement fields, normalisation,
//!   block-mean downsampling and NIfTI-1 / raw file I/O.
//! - [`losses`]: similarity terms (Parzen MI, NCC, MSE), the smoothness
//!   regulariser and the assembled objective, each with analytic gradients.
//! - [`warp`]: trilinear resampling through a displacement field together
//!   with the spatial Jacobian used for back-propagation.
//! - [`registration`]: coarse-to-fine adaptive-moment optimisation of the
//!   dense field.
//! - [`simeval`]: synthetic phase-encode distortions, inter-modality pairs
//!   and the evaluation metrics (binned MI, NCC, SSIM).
//!
//! Memory layout is shared by every module: voxel `(x, y, z)` lives at flat
//! index `x + nx * (y + ny * z)`, i.e. `x` varies fastest and `z` slowest
//! (the NIfTI on-disk order).

pub mod error;
pub mod losses;
pub mod registration;
pub mod rng;
pub mod simeval;
pub mod volume;
pub mod warp;

pub use error::{Error, Result};
pub use volume::{Dims, DisplacementField, NormalizationSpec, Volume3D};
