//! Synthetic test data: phantoms, phase-encode distortions and
//! inter-modality intensity remaps.
//!
//! Everything is drawn from [`SplitMix64`](crate::rng::SplitMix64) in a fixed
//! order so the data can be regenerated elsewhere.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simeval::metrics::{binned_entropy, metric_mi, metric_ncc, DEFAULT_MI_BINS};
use crate::volume::{Dims, DisplacementField, Volume3D};
use crate::warp::{trilinear_sample, SamplePoint};

/// Number of cosine modes summed by [`simulate_distortion`].
pub const DISTORTION_MODES: usize = 8;
/// Standard deviation of the additive noise in [`make_inter_modality_pair`].
pub const PAIR_NOISE_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["x", "y", "z"][self.index()])
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidConfig(format!(
                "axis `{other}` (expected x, y or z)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionSpec {
    /// The only axis along which voxels are displaced.
    pub phase_axis: Axis,
    /// Largest absolute displacement on the grid, in voxels.
    pub max_magnitude: f64,
    /// Shortest wavelength of the field, in voxels.
    pub smoothness_scale: f64,
    pub seed: u64,
}

impl DistortionSpec {
    fn validate(&self) -> Result<()> {
        if !(self.max_magnitude.is_finite() && self.max_magnitude >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "max_magnitude = {}",
                self.max_magnitude
            )));
        }
        if !(self.smoothness_scale.is_finite() && self.smoothness_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "smoothness_scale = {}",
                self.smoothness_scale
            )));
        }
        Ok(())
    }
}

/// One plane-wave term `amplitude * cos(wavevector . v + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineMode {
    pub amplitude: f64,
    /// Radians per voxel.
    pub wavevector: [f64; 3],
    pub phase: f64,
}

impl CosineMode {
    fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        let k = self.wavevector;
        self.amplitude * (k[0] * x + k[1] * y + k[2] * z + self.phase).cos()
    }
}

/// The modes behind a distortion, in draw order. Per mode: a direction from
/// three standard normals (redrawn while its norm is below 1e-6), then
/// `|k| = 2 pi / scale * U(0.25, 1)`, phase `U(0, 2 pi)` and amplitude
/// `U(0.5, 1)`.
pub fn distortion_modes(spec: &DistortionSpec) -> Vec<CosineMode> {
    let mut rng = SplitMix64::new(spec.seed);
    let k_max = TAU / spec.smoothness_scale;
    (0..DISTORTION_MODES)
        .map(|_| {
            let dir = loop {
                let d = [
                    rng.standard_normal(),
                    rng.standard_normal(),
                    rng.standard_normal(),
                ];
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if norm > 1e-6 {
                    break [d[0] / norm, d[1] / norm, d[2] / norm];
                }
            };
            let k = k_max * rng.uniform(0.25, 1.0);
            let phase = rng.uniform(0.0, TAU);
            let amplitude = rng.uniform(0.5, 1.0);
            CosineMode {
                amplitude,
                wavevector: [dir[0] * k, dir[1] * k, dir[2] * k],
                phase,
            }
        })
        .collect()
}

/// Smooth displacement along `spec.phase_axis`, zero in the other two
/// components, scaled so its largest absolute value on the grid is exactly
/// `spec.max_magnitude`.
pub fn simulate_distortion(dims: Dims, spec: &DistortionSpec) -> Result<DisplacementField> {
    spec.validate()?;
    if spec.max_magnitude == 0.0 {
        return Ok(DisplacementField::zeros(dims));
    }
    let modes = distortion_modes(spec);
    let raw: Vec<f64> = (0..dims.len())
        .map(|i| {
            let (x, y, z) = dims.coords(i);
            let (x, y, z) = (x as f64, y as f64, z as f64);
            modes.iter().map(|m| m.eval(x, y, z)).sum()
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(DisplacementField::zeros(dims));
    }
    let scale = spec.max_magnitude / peak;
    let axis = spec.phase_axis.index();
    let vectors = raw
        .into_iter()
        .map(|r| {
            let mut v = [0.0; 3];
            v[axis] = r * scale;
            v
        })
        .collect();
    DisplacementField::new(dims, vectors)
}

/// The field `psi` with `psi(v) = -phi(v + psi(v))`, so that warping a
/// volume distorted by `phi` through `psi` undoes the distortion. Found by
/// fixed-point iteration, which converges when the largest forward
/// difference of `phi` is below one voxel.
pub fn inverse_field(phi: &DisplacementField, max_iters: usize) -> Result<DisplacementField> {
    let dims = phi.dims();
    let comps = (0..3)
        .map(|c| phi.component(c, [1.0; 3]))
        .collect::<Result<Vec<_>>>()?;
    let mut psi: Vec<[f64; 3]> = phi
        .vectors()
        .iter()
        .map(|v| [-v[0], -v[1], -v[2]])
        .collect();
    for _ in 0..max_iters {
        let mut change = 0.0f64;
        for (i, p) in psi.iter_mut().enumerate() {
            let (x, y, z) = dims.coords(i);
            let at = SamplePoint::new(x as f64 + p[0], y as f64 + p[1], z as f64 + p[2]);
            for c in 0..3 {
                let next = -trilinear_sample(&comps[c], at).0;
                change = change.max((next - p[c]).abs());
                p[c] = next;
            }
        }
        if change < 1e-12 {
            break;
        }
    }
    DisplacementField::new(dims, psi)
}

/// Piecewise-linear intensity map on `[0, 1]`, defined by knots with strictly
/// increasing abscissae from 0 to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityRemap {
    knots: Vec<(f64, f64)>,
}

impl IntensityRemap {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let ok = knots.len() >= 2
            && knots.first().map(|k| k.0) == Some(0.0)
            && knots.last().map(|k| k.0) == Some(1.0)
            && knots.windows(2).all(|w| w[0].0 < w[1].0)
            && knots.iter().all(|k| k.1.is_finite());
        if !ok {
            return Err(Error::InvalidConfig(format!("remap knots {knots:?}")));
        }
        Ok(Self { knots })
    }

    pub fn identity() -> Self {
        Self {
            knots: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    pub fn inverted() -> Self {
        Self {
            knots: vec![(0.0, 1.0), (1.0, 0.0)],
        }
    }

    /// Four interior breakpoints `(i + 1) / 5 + U(-0.08, 0.08)`, then six
    /// knot values alternating between `U(0, 0.25)` and `U(0.75, 1)`
    /// starting low, so the map rises and falls steeply several times.
    pub fn seeded(rng: &mut SplitMix64) -> Self {
        let mut knots = vec![(0.0, rng.uniform(0.0, 0.25))];
        for i in 0..4 {
            let x = (i + 1) as f64 / 5.0 + rng.uniform(-0.08, 0.08);
            let y = if i % 2 == 0 {
                rng.uniform(0.75, 1.0)
            } else {
                rng.uniform(0.0, 0.25)
            };
            knots.push((x, y));
        }
        knots.push((1.0, rng.uniform(0.75, 1.0)));
        Self { knots }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn apply(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        let seg = self
            .knots
            .windows(2)
            .find(|w| v <= w[1].0)
            .unwrap_or(&self.knots[self.knots.len() - 2..]);
        let ((x0, y0), (x1, y1)) = (seg[0], seg[1]);
        y0 + (v - x0) / (x1 - x0) * (y1 - y0)
    }
}

/// `(base, clamp(remap(base) + noise))` with Gaussian noise drawn from
/// `SplitMix64::new(seed)` in voxel order.
pub fn make_pair_with(
    base: &Volume3D,
    remap: &IntensityRemap,
    noise_std: f64,
    seed: u64,
) -> Result<(Volume3D, Volume3D)> {
    base.ensure_normalized()?;
    let mut rng = SplitMix64::new(seed);
    let data = base
        .data()
        .iter()
        .map(|&v| {
            let noise = if noise_std > 0.0 {
                noise_std * rng.standard_normal()
            } else {
                0.0
            };
            (remap.apply(v) + noise).clamp(0.0, 1.0)
        })
        .collect();
    Ok((base.clone(), base.with_data(data)?))
}

/// Attempts [`make_inter_modality_pair`] makes before giving up.
pub const PAIR_MAX_DRAWS: usize = 256;

/// A T1-like / B0-like stand-in: the base itself and a seeded non-monotone
/// remap of it with low-amplitude noise.
///
/// Remaps are drawn in sequence from `SplitMix64::new(seed)`; the first one
/// whose noise-free image has `|NCC| < 0.9` against the base and binned MI
/// above half the binned entropy of the base is used. Noise comes from the
/// stream seeded with `seed + 1`.
pub fn make_inter_modality_pair(base: &Volume3D, seed: u64) -> Result<(Volume3D, Volume3D)> {
    base.ensure_normalized()?;
    let mut rng = SplitMix64::new(seed);
    let entropy = binned_entropy(base, DEFAULT_MI_BINS)?;
    for _ in 0..PAIR_MAX_DRAWS {
        let remap = IntensityRemap::seeded(&mut rng);
        let (_, clean) = make_pair_with(base, &remap, 0.0, 0)?;
        let ncc = match metric_ncc(base, &clean) {
            Ok(v) => v,
            Err(Error::ZeroVariance) => continue,
            Err(e) => return Err(e),
        };
        if ncc.abs() < 0.9 && metric_mi(base, &clean, DEFAULT_MI_BINS)? > 0.5 * entropy {
            return make_pair_with(base, &remap, PAIR_NOISE_STD, seed.wrapping_add(1));
        }
    }
    Err(Error::InvalidVolume(format!(
        "no remap among {PAIR_MAX_DRAWS} draws decorrelates this base"
    )))
}

/// Fixed-point iterations used for [`SyntheticCase::correction`].
pub const INVERSE_ITERS: usize = 200;

/// A distorted inter-modality pair with its known ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub t1: Volume3D,
    /// The undistorted remapped image.
    pub b0: Volume3D,
    /// `warp(b0, truth)`; the image handed to registration.
    pub b0_distorted: Volume3D,
    /// The simulated distortion.
    pub truth: DisplacementField,
    /// The field a perfect registration of `b0_distorted` onto `t1` returns.
    pub correction: DisplacementField,
}

impl SyntheticCase {
    /// Pair seed and distortion seed are both `spec.seed`.
    pub fn generate(base: &Volume3D, spec: &DistortionSpec) -> Result<Self> {
        let (t1, b0) = make_inter_modality_pair(base, spec.seed)?;
        let truth = simulate_distortion(base.dims(), spec)?;
        let b0_distorted = crate::warp::warp(&b0, &truth)?;
        let correction = inverse_field(&truth, INVERSE_ITERS)?;
        Ok(Self {
            t1,
            b0,
            b0_distorted,
            truth,
            correction,
        })
    }

    /// Mean endpoint error of `field` against the correction, and the same for
    /// the zero field.
    pub fn endpoint_errors(&self, field: &DisplacementField) -> Result<(f64, f64)> {
        let zero = DisplacementField::zeros(self.correction.dims());
        Ok((
            field.mean_endpoint_error(&self.correction)?,
            zero.mean_endpoint_error(&self.correction)?,
        ))
    }
}

/// Intensities of the background and the three shells of [`ellipsoid_phantom`],
/// outermost first.
pub const PHANTOM_LEVELS: [f64; 4] = [0.0, 0.3, 0.6, 0.9];

/// Three nested axis-aligned ellipsoids centred in the grid, with semi-axes
/// of (0.49, 0.46, 0.48), (0.34, 0.30, 0.32) and (0.18, 0.15, 0.17) times
/// the extent per axis.
pub fn ellipsoid_phantom(dims: Dims) -> Result<Volume3D> {
    const SHELLS: [[f64; 3]; 3] = [[0.49, 0.46, 0.48], [0.34, 0.30, 0.32], [0.18, 0.15, 0.17]];
    let ext = dims.as_array().map(|n| n as f64);
    let centre = ext.map(|n| (n - 1.0) / 2.0);
    Volume3D::from_fn(dims, |x, y, z| {
        let p = [x as f64, y as f64, z as f64];
        let mut level = 0;
        for (s, semi) in SHELLS.iter().enumerate() {
            let r2: f64 = (0..3)
                .map(|a| ((p[a] - centre[a]) / (semi[a] * ext[a])).powi(2))
                .sum();
            if r2 <= 1.0 {
                level = s + 1;
            }
        }
        PHANTOM_LEVELS[level]
    })
}
