//! Parzen-window intensity densities and the differentiable MI loss.
//!
//! Every sampled voxel spreads one unit of probability mass over the
//! histogram bins, weighted by a Gaussian of its distance to each bin
//! centre and renormalised per voxel. With this per-sample normalisation
//! the joint histogram sums to one by construction and its row and column
//! sums coincide with the marginal estimates, so the three densities stay
//! mutually consistent regardless of how much Gaussian tail falls outside
//! `[0, 1]`.
//!
//! Window weights below `exp(-50)` of the nearest-bin weight are dropped.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::losses::LossValueGrad;
use crate::volume::{Dims, Volume3D};

/// Floor added inside every logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Window support cutoff, in units of `2 sigma^2` of squared distance.
const SUPPORT_EXPONENT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParzenConfig {
    /// Bin centres sit at `(k + 0.5) / num_bins`.
    pub num_bins: usize,
    /// Gaussian bandwidth in normalised-intensity units.
    pub sigma: f64,
    /// Only voxels whose coordinates are all multiples of the stride are used.
    pub sample_stride: usize,
}

impl Default for ParzenConfig {
    fn default() -> Self {
        Self::with_bins(32)
    }
}

impl ParzenConfig {
    /// `num_bins` bins with a one-bin-width bandwidth and no subsampling.
    pub fn with_bins(num_bins: usize) -> Self {
        Self {
            num_bins,
            sigma: 1.0 / num_bins as f64,
            sample_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_bins = {} (need >= 2)",
                self.num_bins
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma = {} (need > 0)",
                self.sigma
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidConfig("sample_stride = 0 (need >= 1)".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.num_bins as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.num_bins).map(|k| self.bin_center(k)).collect()
    }

    fn sampled_dims(&self, dims: Dims) -> Dims {
        dims.ceil_div(self.sample_stride)
    }
}

/// Gaussian kernel `exp(-d^2 / (2 sigma^2)) / (sigma sqrt(2 pi))`.
pub fn gaussian_window(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Normalised window of one intensity sample over the bins.
struct Window {
    start: usize,
    len: usize,
    /// Weighted mean bin centre, used by the derivative.
    mean: f64,
}

impl Window {
    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Fills `buf[start..start+len]` with weights summing to one.
fn window(cfg: &ParzenConfig, s: f64, buf: &mut [f64]) -> Window {
    let b = cfg.num_bins;
    let inv_two_var = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    let nearest = ((s * b as f64).floor().max(0.0) as usize).min(b - 1);
    let d0 = cfg.bin_center(nearest) - s;
    let base = d0 * d0;
    let in_support = |k: usize| {
        let d = cfg.bin_center(k) - s;
        (d * d - base) * inv_two_var <= SUPPORT_EXPONENT
    };
    let mut lo = nearest;
    while lo > 0 && in_support(lo - 1) {
        lo -= 1;
    }
    let mut hi = nearest + 1;
    while hi < b && in_support(hi) {
        hi += 1;
    }
    let mut total = 0.0;
    for (k, slot) in buf.iter_mut().enumerate().take(hi).skip(lo) {
        let d = cfg.bin_center(k) - s;
        *slot = (-(d * d - base) * inv_two_var).exp();
        total += *slot;
    }
    let mut mean = 0.0;
    for (k, slot) in buf.iter_mut().enumerate().take(hi).skip(lo) {
        *slot /= total;
        mean += *slot * cfg.bin_center(k);
    }
    Window {
        start: lo,
        len: hi - lo,
        mean,
    }
}

/// Sampled flat indices of one z-slice, in increasing order.
fn slice_samples(dims: Dims, stride: usize, z: usize) -> impl Iterator<Item = usize> {
    (0..dims.ny).step_by(stride).flat_map(move |y| {
        (0..dims.nx)
            .step_by(stride)
            .map(move |x| dims.index(x, y, z))
    })
}

fn sampled_slices(dims: Dims, stride: usize) -> Vec<usize> {
    (0..dims.nz).step_by(stride).collect()
}

/// Parzen estimate of one image's intensity distribution.
pub fn parzen_marginal(img: &Volume3D, cfg: &ParzenConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let b = cfg.num_bins;
    let dims = img.dims();
    let data = img.data();
    let partials: Vec<Vec<f64>> = sampled_slices(dims, cfg.sample_stride)
        .into_par_iter()
        .map(|z| {
            let mut acc = vec![0.0; b];
            let mut buf = vec![0.0; b];
            for i in slice_samples(dims, cfg.sample_stride, z) {
                let w = window(cfg, data[i], &mut buf);
                for k in w.range() {
                    acc[k] += buf[k];
                }
            }
            acc
        })
        .collect();
    let n = cfg.sampled_dims(dims).len() as f64;
    let mut p = vec![0.0; b];
    for part in &partials {
        for (pk, v) in p.iter_mut().zip(part) {
            *pk += v;
        }
    }
    p.iter_mut().for_each(|v| *v /= n);
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

/// Joint and marginal densities of an image pair.
///
/// `joint[j * num_bins + k]` pairs bin `j` of the first image with bin `k` of
/// the second; `marginal_a` holds the row sums and `marginal_b` the column
/// sums.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramPair {
    pub num_bins: usize,
    pub marginal_a: Vec<f64>,
    pub marginal_b: Vec<f64>,
    pub joint: Vec<f64>,
}

impl HistogramPair {
    #[inline]
    pub fn joint_at(&self, j: usize, k: usize) -> f64 {
        self.joint[j * self.num_bins + k]
    }

    fn from_joint(num_bins: usize, mut joint: Vec<f64>) -> Self {
        let total: f64 = joint.iter().sum();
        joint.iter_mut().for_each(|v| *v /= total);
        let mut marginal_a = vec![0.0; num_bins];
        let mut marginal_b = vec![0.0; num_bins];
        for j in 0..num_bins {
            for k in 0..num_bins {
                let p = joint[j * num_bins + k];
                marginal_a[j] += p;
                marginal_b[k] += p;
            }
        }
        Self {
            num_bins,
            marginal_a,
            marginal_b,
            joint,
        }
    }

    /// `sum p(a,b) log p(a,b) / (p(a) p(b))`, floored inside each log.
    pub fn mutual_information(&self) -> f64 {
        let plogp = |p: &f64| p * (p + LOG_FLOOR).ln();
        self.joint.iter().map(plogp).sum::<f64>()
            - self.marginal_a.iter().map(plogp).sum::<f64>()
            - self.marginal_b.iter().map(plogp).sum::<f64>()
    }

    /// `d MI / d joint[j, k]` with marginals tied to the joint.
    fn mi_sensitivity(&self) -> Vec<f64> {
        let dplogp = |p: f64| (p + LOG_FLOOR).ln() + p / (p + LOG_FLOOR);
        let b = self.num_bins;
        let da: Vec<f64> = self.marginal_a.iter().map(|&p| dplogp(p)).collect();
        let db: Vec<f64> = self.marginal_b.iter().map(|&p| dplogp(p)).collect();
        (0..b * b)
            .map(|i| dplogp(self.joint[i]) - da[i / b] - db[i % b])
            .collect()
    }
}

/// Shannon entropy (nats) of a probability vector, floored inside the log.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&v| v * (v + LOG_FLOOR).ln()).sum::<f64>()
}

fn accumulate_joint(a: &Volume3D, b: &Volume3D, cfg: &ParzenConfig) -> Vec<f64> {
    let nb = cfg.num_bins;
    let dims = a.dims();
    let (da, db) = (a.data(), b.data());
    let partials: Vec<Vec<f64>> = sampled_slices(dims, cfg.sample_stride)
        .into_par_iter()
        .map(|z| {
            let mut acc = vec![0.0; nb * nb];
            let mut wa = vec![0.0; nb];
            let mut wb = vec![0.0; nb];
            for i in slice_samples(dims, cfg.sample_stride, z) {
                let ra = window(cfg, da[i], &mut wa);
                let rb = window(cfg, db[i], &mut wb);
                for j in ra.range() {
                    let row = &mut acc[j * nb..(j + 1) * nb];
                    let wj = wa[j];
                    for k in rb.range() {
                        row[k] += wj * wb[k];
                    }
                }
            }
            acc
        })
        .collect();
    let n = cfg.sampled_dims(dims).len() as f64;
    let mut joint = vec![0.0; nb * nb];
    for part in &partials {
        for (j, v) in joint.iter_mut().zip(part) {
            *j += v;
        }
    }
    joint.iter_mut().for_each(|v| *v /= n);
    joint
}

pub fn parzen_joint(a: &Volume3D, b: &Volume3D, cfg: &ParzenConfig) -> Result<HistogramPair> {
    cfg.validate()?;
    a.ensure_same_dims(b)?;
    Ok(HistogramPair::from_joint(
        cfg.num_bins,
        accumulate_joint(a, b, cfg),
    ))
}

/// Negative Parzen MI and its gradient with respect to each voxel of `b`.
///
/// Voxels skipped by `sample_stride` receive a zero gradient.
pub fn dmi_loss(a: &Volume3D, b: &Volume3D, cfg: &ParzenConfig) -> Result<LossValueGrad<f64>> {
    let hist = parzen_joint(a, b, cfg)?;
    let nb = cfg.num_bins;
    let sens = hist.mi_sensitivity();
    let dims = a.dims();
    let (da, db) = (a.data(), b.data());
    let n = cfg.sampled_dims(dims).len() as f64;
    let inv_var = 1.0 / (cfg.sigma * cfg.sigma);
    let centers = cfg.bin_centers();

    let mut grad = vec![0.0; dims.len()];
    let slices = sampled_slices(dims, cfg.sample_stride);
    let slice_len = dims.nx * dims.ny;
    let per_slice: Vec<Vec<(usize, f64)>> = slices
        .par_iter()
        .map(|&z| {
            let mut wa = vec![0.0; nb];
            let mut wb = vec![0.0; nb];
            let mut out = Vec::with_capacity(slice_len);
            for i in slice_samples(dims, cfg.sample_stride, z) {
                let ra = window(cfg, da[i], &mut wa);
                let rb = window(cfg, db[i], &mut wb);
                let mut d = 0.0;
                for k in rb.range() {
                    let mut s = 0.0;
                    for j in ra.range() {
                        s += sens[j * nb + k] * wa[j];
                    }
                    d += s * wb[k] * (centers[k] - rb.mean);
                }
                out.push((i, -d * inv_var / n));
            }
            out
        })
        .collect();
    for (i, g) in per_slice.into_iter().flatten() {
        grad[i] = g;
    }
    Ok(LossValueGrad {
        value: -hist.mutual_information(),
        grad,
    })
}
