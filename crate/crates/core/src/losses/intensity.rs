//! Intensity-difference and global correlation similarity terms.

use crate::error::{Error, Result};
use crate::losses::LossValueGrad;
use crate::volume::Volume3D;

/// Mean squared difference; gradient with respect to `b`.
pub fn mse_loss(a: &Volume3D, b: &Volume3D) -> Result<LossValueGrad<f64>> {
    a.ensure_same_dims(b)?;
    let n = a.len() as f64;
    let mut value = 0.0;
    let grad = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = y - x;
            value += d * d;
            2.0 * d / n
        })
        .collect();
    Ok(LossValueGrad {
        value: value / n,
        grad,
    })
}

/// Centred intensities and their sum of squares.
pub(crate) fn centered(v: &Volume3D) -> (Vec<f64>, f64) {
    let mean = v.mean();
    let c: Vec<f64> = v.data().iter().map(|x| x - mean).collect();
    let ss = c.iter().map(|x| x * x).sum();
    (c, ss)
}

/// Zero-variance threshold on the per-voxel variance.
const MIN_VARIANCE: f64 = 1e-24;

/// Global Pearson correlation of two images.
pub fn pearson(a: &Volume3D, b: &Volume3D) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let n = a.len() as f64;
    let (ca, sa) = centered(a);
    let (cb, sb) = centered(b);
    if sa / n <= MIN_VARIANCE || sb / n <= MIN_VARIANCE {
        return Err(Error::ZeroVariance);
    }
    let cross: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
    Ok(cross / (sa * sb).sqrt())
}

/// Negative global normalised cross-correlation; gradient with respect to `b`.
pub fn ncc_loss(a: &Volume3D, b: &Volume3D) -> Result<LossValueGrad<f64>> {
    a.ensure_same_dims(b)?;
    let n = a.len() as f64;
    let (ca, sa) = centered(a);
    let (cb, sb) = centered(b);
    if sa / n <= MIN_VARIANCE || sb / n <= MIN_VARIANCE {
        return Err(Error::ZeroVariance);
    }
    let norm = (sa * sb).sqrt();
    let cross: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
    let ncc = cross / norm;
    // d ncc / d b_i = a'_i / norm - ncc * b'_i / sb; the mean terms cancel.
    let grad = ca
        .iter()
        .zip(&cb)
        .map(|(x, y)| -(x / norm - ncc * y / sb))
        .collect();
    Ok(LossValueGrad { value: -ncc, grad })
}
