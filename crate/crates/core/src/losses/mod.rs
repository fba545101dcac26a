//! Similarity terms, the smoothness regulariser and the assembled
//! registration objective.
//!
//! Similarity gradients are taken with respect to the second (warped moving)
//! image only; the fixed image never depends on the displacement field.

mod intensity;
mod parzen;
mod smoothness;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::volume::{DisplacementField, Volume3D};
use crate::warp::{chain_to_field, WarpedVolume};

pub use intensity::{mse_loss, ncc_loss, pearson};
pub use parzen::{
    dmi_loss, entropy, gaussian_window, parzen_joint, parzen_marginal, HistogramPair, ParzenConfig,
    LOG_FLOOR,
};
pub use smoothness::smoothness_loss;

/// A loss value with its gradient; `G` is `f64` for per-voxel intensity
/// gradients and `[f64; 3]` for per-voxel field gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValueGrad<G> {
    pub value: f64,
    pub grad: Vec<G>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    Dmi,
    Ncc,
    Mse,
}

impl SimilarityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Dmi => "dmi",
            Self::Ncc => "ncc",
            Self::Mse => "mse",
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dmi" => Ok(Self::Dmi),
            "ncc" => Ok(Self::Ncc),
            "mse" => Ok(Self::Mse),
            other => Err(Error::InvalidConfig(format!(
                "similarity `{other}` (expected dmi, ncc or mse)"
            ))),
        }
    }
}

pub fn similarity_loss(
    kind: SimilarityKind,
    parzen: &ParzenConfig,
    fixed: &Volume3D,
    warped: &Volume3D,
) -> Result<LossValueGrad<f64>> {
    match kind {
        SimilarityKind::Dmi => dmi_loss(fixed, warped, parzen),
        SimilarityKind::Ncc => ncc_loss(fixed, warped),
        SimilarityKind::Mse => mse_loss(fixed, warped),
    }
}

/// Objective value split into its terms, with the gradient w.r.t. the field.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub similarity: f64,
    pub smoothness: f64,
    pub grad: Vec<[f64; 3]>,
}

/// `similarity(fixed, warped) + lambda * smoothness(field)`.
pub fn total_loss(
    fixed: &Volume3D,
    warped: &WarpedVolume,
    field: &DisplacementField,
    kind: SimilarityKind,
    parzen: &ParzenConfig,
    lambda: f64,
) -> Result<TotalLoss> {
    if field.dims() != fixed.dims() {
        return Err(Error::DimensionMismatch(fixed.dims(), field.dims()));
    }
    let sim = similarity_loss(kind, parzen, fixed, &warped.warped)?;
    let smooth = smoothness_loss(field);
    let mut grad = chain_to_field(&sim.grad, &warped.jacobian)?;
    for (g, s) in grad.iter_mut().zip(&smooth.grad) {
        for c in 0..3 {
            g[c] += lambda * s[c];
        }
    }
    Ok(TotalLoss {
        value: sim.value + lambda * smooth.value,
        similarity: sim.value,
        smoothness: smooth.value,
        grad,
    })
}

/// Objective with its hyper-parameters bound, evaluated on a moving image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub similarity: SimilarityKind,
    pub parzen: ParzenConfig,
    pub lambda: f64,
}

impl Objective {
    pub fn evaluate(
        &self,
        fixed: &Volume3D,
        moving: &Volume3D,
        field: &DisplacementField,
    ) -> Result<TotalLoss> {
        let warped = crate::warp::warp_with_jacobian(moving, field)?;
        total_loss(
            fixed,
            &warped,
            field,
            self.similarity,
            &self.parzen,
            self.lambda,
        )
    }
}
