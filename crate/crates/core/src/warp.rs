//! Trilinear resampling of a moving volume through a displacement field.
//!
//! Coordinates outside the grid clamp to the nearest edge voxel. The spatial
//! gradient of the interpolant is taken from the cell that contains the
//! point; a point lying exactly on a cell face belongs to the lower cell.
//! Along an axis where the point was clamped the gradient is zero, since the
//! clamped interpolant is constant there.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{DisplacementField, Volume3D};

/// Continuous position in voxel units of the moving grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SamplePoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Lower corner, fractional offset and whether the coordinate was in range.
#[inline]
fn cell(coord: f64, n: usize) -> (usize, usize, f64, f64) {
    if n == 1 {
        return (0, 0, 0.0, 0.0);
    }
    let top = (n - 1) as f64;
    let inside = (0.0..=top).contains(&coord);
    let c = coord.clamp(0.0, top);
    let i0 = (c.ceil() - 1.0).clamp(0.0, top - 1.0);
    let t = c - i0;
    let i0 = i0 as usize;
    (i0, i0 + 1, t, if inside { 1.0 } else { 0.0 })
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a * (1.0 - t) + b * t
}

/// Interpolated intensity and its partial derivatives w.r.t. `(x, y, z)`.
pub fn trilinear_sample(m: &Volume3D, p: SamplePoint) -> (f64, [f64; 3]) {
    let d = m.dims();
    let data = m.data();
    let (x0, x1, tx, gx_mask) = cell(p.x, d.nx);
    let (y0, y1, ty, gy_mask) = cell(p.y, d.ny);
    let (z0, z1, tz, gz_mask) = cell(p.z, d.nz);

    let at = |x, y, z| data[d.index(x, y, z)];
    let c000 = at(x0, y0, z0);
    let c100 = at(x1, y0, z0);
    let c010 = at(x0, y1, z0);
    let c110 = at(x1, y1, z0);
    let c001 = at(x0, y0, z1);
    let c101 = at(x1, y0, z1);
    let c011 = at(x0, y1, z1);
    let c111 = at(x1, y1, z1);

    let c00 = lerp(c000, c100, tx);
    let c10 = lerp(c010, c110, tx);
    let c01 = lerp(c001, c101, tx);
    let c11 = lerp(c011, c111, tx);
    let c0 = lerp(c00, c10, ty);
    let c1 = lerp(c01, c11, ty);
    let value = lerp(c0, c1, tz);

    let gx = lerp(
        lerp(c100 - c000, c110 - c010, ty),
        lerp(c101 - c001, c111 - c011, ty),
        tz,
    );
    let gy = lerp(c10 - c00, c11 - c01, tz);
    let gz = c1 - c0;
    (value, [gx * gx_mask, gy * gy_mask, gz * gz_mask])
}

/// Resampled moving image together with `d warped(v) / d field(v)`.
#[derive(Debug, Clone)]
pub struct WarpedVolume {
    pub warped: Volume3D,
    pub jacobian: Vec<[f64; 3]>,
}

fn sample_all<T: Send>(
    m: &Volume3D,
    field: &DisplacementField,
    f: impl Fn(f64, [f64; 3]) -> T + Sync,
) -> Vec<T> {
    let d = field.dims();
    let slice = d.nx * d.ny;
    let vectors = field.vectors();
    (0..d.nz)
        .into_par_iter()
        .flat_map_iter(|z| {
            let f = &f;
            (0..slice).map(move |j| {
                let i = z * slice + j;
                let (x, y, _) = d.coords(i);
                let u = vectors[i];
                let p = SamplePoint::new(x as f64 + u[0], y as f64 + u[1], z as f64 + u[2]);
                let (v, g) = trilinear_sample(m, p);
                f(v, g)
            })
        })
        .collect()
}

/// `out(v) = m(v + field(v))`, on the field's grid.
pub fn warp(m: &Volume3D, field: &DisplacementField) -> Result<Volume3D> {
    let data = sample_all(m, field, |v, _| v);
    Volume3D::new(field.dims(), m.spacing(), data)
}

pub fn warp_with_jacobian(m: &Volume3D, field: &DisplacementField) -> Result<WarpedVolume> {
    let (data, jacobian): (Vec<f64>, Vec<[f64; 3]>) =
        sample_all(m, field, |v, g| (v, g)).into_iter().unzip();
    Ok(WarpedVolume {
        warped: Volume3D::new(field.dims(), m.spacing(), data)?,
        jacobian,
    })
}

/// Chain a per-voxel intensity gradient through the warp Jacobian.
pub fn chain_to_field(intensity_grad: &[f64], jacobian: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    if intensity_grad.len() != jacobian.len() {
        return Err(Error::InvalidField(format!(
            "{} intensity gradients for {} Jacobian entries",
            intensity_grad.len(),
            jacobian.len()
        )));
    }
    Ok(intensity_grad
        .iter()
        .zip(jacobian)
        .map(|(&g, j)| [g * j[0], g * j[1], g * j[2]])
        .collect())
}
