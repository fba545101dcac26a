//! Evaluation metrics. MI here is hard-binned and distinct from the Parzen
//! training loss.

use crate::error::{Error, Result};
use crate::losses::pearson;
use crate::volume::{Dims, Volume3D};

pub const DEFAULT_MI_BINS: usize = 32;
/// Edge length of the cubic SSIM window.
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Bin of a `[0, 1]` intensity; out-of-range values fall in the edge bins.
#[inline]
pub fn hard_bin(v: f64, num_bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * num_bins as f64) as usize).min(num_bins - 1)
}

fn check_bins(num_bins: usize) -> Result<()> {
    if num_bins < 2 {
        return Err(Error::InvalidConfig(format!(
            "num_bins = {num_bins} (need >= 2)"
        )));
    }
    Ok(())
}

/// Mutual information (nats) of the hard-binned joint histogram over `[0, 1]`.
pub fn metric_mi(a: &Volume3D, b: &Volume3D, num_bins: usize) -> Result<f64> {
    check_bins(num_bins)?;
    a.ensure_same_dims(b)?;
    let mut joint = vec![0u64; num_bins * num_bins];
    for (&x, &y) in a.data().iter().zip(b.data()) {
        joint[hard_bin(x, num_bins) * num_bins + hard_bin(y, num_bins)] += 1;
    }
    let n = a.len() as f64;
    let mut pa = vec![0u64; num_bins];
    let mut pb = vec![0u64; num_bins];
    for j in 0..num_bins {
        for k in 0..num_bins {
            pa[j] += joint[j * num_bins + k];
            pb[k] += joint[j * num_bins + k];
        }
    }
    let mut mi = 0.0;
    for j in 0..num_bins {
        for k in 0..num_bins {
            let c = joint[j * num_bins + k];
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (pa[j] as f64 * pb[k] as f64)).ln();
            }
        }
    }
    // Rounding can leave -1e-17 for independent images.
    Ok(mi.max(0.0))
}

/// Entropy (nats) of the hard-binned intensity histogram.
pub fn binned_entropy(a: &Volume3D, num_bins: usize) -> Result<f64> {
    check_bins(num_bins)?;
    let mut counts = vec![0u64; num_bins];
    for &x in a.data() {
        counts[hard_bin(x, num_bins)] += 1;
    }
    let n = a.len() as f64;
    Ok(-counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>())
}

/// Global Pearson correlation; errors on a zero-variance image.
pub fn metric_ncc(a: &Volume3D, b: &Volume3D) -> Result<f64> {
    pearson(a, b)
}

/// Valid-mode box sums of width `w` along one axis.
fn box_sum_axis(src: &[f64], dims: Dims, axis: usize, w: usize) -> (Vec<f64>, Dims) {
    let mut out_extent = dims.as_array();
    out_extent[axis] -= w - 1;
    let out_dims = Dims::from_array(out_extent);
    let stride = dims.stride(axis);
    let mut out = Vec::with_capacity(out_dims.len());
    for o in 0..out_dims.len() {
        let (x, y, z) = out_dims.coords(o);
        let base = dims.index(x, y, z);
        let mut s = 0.0;
        for t in 0..w {
            s += src[base + t * stride];
        }
        out.push(s);
    }
    (out, out_dims)
}

fn box_mean(src: Vec<f64>, dims: Dims, w: usize) -> Vec<f64> {
    let (s, d) = box_sum_axis(&src, dims, 0, w);
    let (s, d) = box_sum_axis(&s, d, 1, w);
    let (s, _) = box_sum_axis(&s, d, 2, w);
    let n = (w * w * w) as f64;
    s.into_iter().map(|v| v / n).collect()
}

/// Mean local SSIM over every position of a 7x7x7 uniform window that fits
/// inside the volume, with dynamic range 1 and population (1/N) moments.
pub fn metric_ssim(a: &Volume3D, b: &Volume3D) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let dims = a.dims();
    if dims.as_array().iter().any(|&n| n < SSIM_WINDOW) {
        return Err(Error::WindowTooLarge {
            window: SSIM_WINDOW,
            dims,
        });
    }
    let (da, db) = (a.data(), b.data());
    let w = SSIM_WINDOW;
    let mu_a = box_mean(da.to_vec(), dims, w);
    let mu_b = box_mean(db.to_vec(), dims, w);
    let aa = box_mean(da.iter().map(|x| x * x).collect(), dims, w);
    let bb = box_mean(db.iter().map(|x| x * x).collect(), dims, w);
    let ab = box_mean(da.iter().zip(db).map(|(x, y)| x * y).collect(), dims, w);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    Ok(total / mu_a.len() as f64)
}

/// MI, NCC and SSIM of a pair. NCC is `None` for a flat image and SSIM is
/// `None` when the volume is smaller than the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSnapshot {
    pub mi: f64,
    pub ncc: Option<f64>,
    pub ssim: Option<f64>,
}

pub fn evaluate_pair(a: &Volume3D, b: &Volume3D, num_bins: usize) -> Result<MetricSnapshot> {
    let mi = metric_mi(a, b, num_bins)?;
    let ncc = match metric_ncc(a, b) {
        Ok(v) => Some(v),
        Err(Error::ZeroVariance) => None,
        Err(e) => return Err(e),
    };
    let ssim = match metric_ssim(a, b) {
        Ok(v) => Some(v),
        Err(Error::WindowTooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricSnapshot { mi, ncc, ssim })
}
