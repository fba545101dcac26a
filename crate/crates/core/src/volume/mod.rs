//! Scalar volumes, displacement fields and the operations that prepare them
//! for registration.

mod io;
mod nifti;
mod raw;

use std::fmt;

use crate::error::{Error, Result};

pub use io::{encode_volume, read_volume, write_files_atomic, write_volume};
pub use nifti::{read_nifti, write_nifti};
pub use raw::{read_raw, write_raw};

/// Grid extent in voxels. Flat index of `(x, y, z)` is `x + nx * (y + ny * z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub const fn cube(n: usize) -> Self {
        Self::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn from_array(d: [usize; 3]) -> Self {
        Self::new(d[0], d[1], d[2])
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let x = i % self.nx;
        let yz = i / self.nx;
        (x, yz % self.ny, yz / self.ny)
    }

    /// Stride between neighbours along `axis` (0 = x, 1 = y, 2 = z).
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.nx,
            _ => self.nx * self.ny,
        }
    }

    pub fn ceil_div(&self, factor: usize) -> Self {
        Self::new(
            self.nx.div_ceil(factor),
            self.ny.div_ceil(factor),
            self.nz.div_ceil(factor),
        )
    }

    fn check(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::InvalidVolume(format!("zero extent in {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// A scalar 3-D image: extent, voxel spacing in mm and one finite intensity
/// per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    spacing: [f64; 3],
    data: Vec<f64>,
}

impl Volume3D {
    pub fn new(dims: Dims, spacing: [f64; 3], data: Vec<f64>) -> Result<Self> {
        dims.check()?;
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "{} intensities for a {dims} grid",
                data.len()
            )));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidVolume(format!(
                "spacing {spacing:?} must be positive"
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidVolume(format!(
                "non-finite intensity at voxel {:?}",
                dims.coords(i)
            )));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    /// Unit-spacing volume from a function of voxel coordinates.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        dims.check()?;
        let data = (0..dims.len())
            .map(|i| {
                let (x, y, z) = dims.coords(i);
                f(x, y, z)
            })
            .collect();
        Self::new(dims, [1.0; 3], data)
    }

    pub fn filled(dims: Dims, value: f64) -> Result<Self> {
        dims.check()?;
        Self::new(dims, [1.0; 3], vec![value; dims.len()])
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidVolume(format!(
                "spacing {spacing:?} must be positive"
            )));
        }
        self.spacing = spacing;
        Ok(self)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Same grid and spacing, new intensities.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.dims, self.spacing, data)
    }

    /// Errors unless every intensity lies in `[0, 1]`.
    pub fn ensure_normalized(&self) -> Result<()> {
        let (lo, hi) = self.min_max();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::NotNormalized(format!(
                "intensity range [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    pub fn ensure_same_dims(&self, other: &Volume3D) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(self.dims, other.dims));
        }
        Ok(())
    }
}

/// Per-voxel displacement in voxel units of the moving grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    dims: Dims,
    vectors: Vec<[f64; 3]>,
}

impl DisplacementField {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            vectors: vec![[0.0; 3]; dims.len()],
        }
    }

    pub fn new(dims: Dims, vectors: Vec<[f64; 3]>) -> Result<Self> {
        dims.check()?;
        if vectors.len() != dims.len() {
            return Err(Error::InvalidField(format!(
                "{} vectors for a {dims} grid",
                vectors.len()
            )));
        }
        if vectors.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidField("non-finite component".into()));
        }
        Ok(Self { dims, vectors })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> [f64; 3]) -> Result<Self> {
        dims.check()?;
        let vectors = (0..dims.len())
            .map(|i| {
                let (x, y, z) = dims.coords(i);
                f(x, y, z)
            })
            .collect();
        Self::new(dims, vectors)
    }

    /// Assemble from three per-axis component volumes of identical extent.
    pub fn from_components(dx: &Volume3D, dy: &Volume3D, dz: &Volume3D) -> Result<Self> {
        dx.ensure_same_dims(dy)?;
        dx.ensure_same_dims(dz)?;
        let vectors = dx
            .data()
            .iter()
            .zip(dy.data())
            .zip(dz.data())
            .map(|((&a, &b), &c)| [a, b, c])
            .collect();
        Self::new(dx.dims(), vectors)
    }

    /// One component as a volume (`axis` 0, 1, 2 = x, y, z).
    pub fn component(&self, axis: usize, spacing: [f64; 3]) -> Result<Volume3D> {
        let data = self.vectors.iter().map(|v| v[axis]).collect();
        Volume3D::new(self.dims, spacing, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn vectors(&self) -> &[[f64; 3]] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.vectors
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        self.vectors[self.dims.index(x, y, z)]
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .sum::<f64>()
            / self.vectors.len() as f64
    }

    pub fn max_abs_component(&self) -> f64 {
        self.vectors
            .iter()
            .flatten()
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Mean Euclidean distance between corresponding vectors.
    pub fn mean_endpoint_error(&self, other: &DisplacementField) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(self.dims, other.dims));
        }
        let total: f64 = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| {
                let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            })
            .sum();
        Ok(total / self.vectors.len() as f64)
    }
}

/// Percentile-clamped affine intensity rescaling.
///
/// Intensities at or below the `low` percentile map to `min_intensity`, at or
/// above the `high` percentile to `max_intensity`, linearly in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationSpec {
    pub min_intensity: f64,
    pub max_intensity: f64,
    pub clamp_percentiles: (f64, f64),
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        Self {
            min_intensity: 0.0,
            max_intensity: 1.0,
            clamp_percentiles: (0.5, 99.5),
        }
    }
}

impl NormalizationSpec {
    pub fn with_percentiles(low: f64, high: f64) -> Self {
        Self {
            clamp_percentiles: (low, high),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.clamp_percentiles;
        let ok = self.min_intensity.is_finite()
            && self.max_intensity.is_finite()
            && self.min_intensity < self.max_intensity
            && (0.0..=100.0).contains(&lo)
            && (0.0..=100.0).contains(&hi)
            && lo < hi;
        if !ok {
            return Err(Error::InvalidConfig(format!("normalization spec {self:?}")));
        }
        Ok(())
    }
}

/// Percentile of already-sorted values, linear interpolation between ranks.
pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] + t * (sorted[hi] - sorted[lo])
}

pub fn normalize_intensities(v: &Volume3D, spec: &NormalizationSpec) -> Result<Volume3D> {
    spec.validate()?;
    let mut sorted = v.data.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let lo = percentile_sorted(&sorted, spec.clamp_percentiles.0);
    let hi = percentile_sorted(&sorted, spec.clamp_percentiles.1);
    if hi <= lo {
        return Err(Error::DegenerateRange);
    }
    let (out_lo, out_hi) = (spec.min_intensity, spec.max_intensity);
    let data = v
        .data
        .iter()
        .map(|&x| {
            if x <= lo {
                out_lo
            } else if x >= hi {
                out_hi
            } else {
                (out_lo + (x - lo) / (hi - lo) * (out_hi - out_lo)).clamp(out_lo, out_hi)
            }
        })
        .collect();
    v.with_data(data)
}

/// Block-mean downsampling; partial blocks at the far boundary average the
/// voxels they contain.
pub fn downsample(v: &Volume3D, factor: usize) -> Result<Volume3D> {
    if factor == 0 {
        return Err(Error::InvalidConfig(
            "downsample factor must be >= 1".into(),
        ));
    }
    if factor == 1 {
        return Ok(v.clone());
    }
    let src = v.dims;
    let dst = src.ceil_div(factor);
    let mut sums = vec![0.0; dst.len()];
    let mut counts = vec![0u32; dst.len()];
    for z in 0..src.nz {
        for y in 0..src.ny {
            let row = dst.index(0, y / factor, z / factor);
            for x in 0..src.nx {
                let o = row + x / factor;
                sums[o] += v.get(x, y, z);
                counts[o] += 1;
            }
        }
    }
    let data = sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| s / c as f64)
        .collect();
    let f = factor as f64;
    Volume3D::new(
        dst,
        [v.spacing[0] * f, v.spacing[1] * f, v.spacing[2] * f],
        data,
    )
}
