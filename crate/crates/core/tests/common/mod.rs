//! Shared fixtures and brute-force oracles for the integration tests. Nothing
//! here calls into the library's own numerics beyond constructors.

#![allow(dead_code)]

use dmireg::losses::ParzenConfig;
use dmireg::{Dims, DisplacementField, Volume3D};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_volume(rng: &mut StdRng, dims: Dims) -> Volume3D {
    Volume3D::from_fn(dims, |_, _, _| rng.gen::<f64>()).unwrap()
}

/// Smooth-ish random image: a blob plus noise, kept inside (0, 1).
pub fn textured_volume(rng: &mut StdRng, dims: Dims) -> Volume3D {
    let c = [
        rng.gen_range(1.0..4.0),
        rng.gen_range(1.0..4.0),
        rng.gen_range(1.0..4.0),
    ];
    Volume3D::from_fn(dims, |x, y, z| {
        let r2 = (x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (z as f64 - c[2]).powi(2);
        (0.15 + 0.6 * (-r2 / 6.0).exp() + 0.2 * rng.gen::<f64>()).clamp(0.0, 1.0)
    })
    .unwrap()
}

/// Components drawn from `±U(0.1, 0.9)`, so every warped coordinate sits at
/// least 0.1 voxel away from a cell face.
pub fn off_grid_field(rng: &mut StdRng, dims: Dims) -> DisplacementField {
    DisplacementField::from_fn(dims, |_, _, _| {
        let mut v = [0.0; 3];
        for c in &mut v {
            let mag = rng.gen_range(0.1..0.9);
            *c = if rng.gen::<bool>() { mag } else { -mag };
        }
        v
    })
    .unwrap()
}

pub fn random_field(rng: &mut StdRng, dims: Dims, amp: f64) -> DisplacementField {
    DisplacementField::from_fn(dims, |_, _, _| {
        [
            rng.gen_range(-amp..amp),
            rng.gen_range(-amp..amp),
            rng.gen_range(-amp..amp),
        ]
    })
    .unwrap()
}

/// Largest entrywise relative error. Entries are compared against
/// `max(|a|, |b|, floor * max|b|)` so that components which are zero up to
/// rounding do not dominate.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            (a - n).abs()
                / a.abs()
                    .max(n.abs())
                    .max(floor * scale)
                    .max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// Central differences of `f` with respect to every intensity of `b`.
pub fn fd_intensity(b: &Volume3D, h: f64, f: impl Fn(&Volume3D) -> f64) -> Vec<f64> {
    let mut data = b.data().to_vec();
    (0..data.len())
        .map(|i| {
            let orig = data[i];
            data[i] = orig + h;
            let plus = f(&b.with_data(data.clone()).unwrap());
            data[i] = orig - h;
            let minus = f(&b.with_data(data.clone()).unwrap());
            data[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Central differences of `f` with respect to every field component, flattened
/// as `[v0.x, v0.y, v0.z, v1.x, ...]`.
pub fn fd_field(
    field: &DisplacementField,
    h: f64,
    f: impl Fn(&DisplacementField) -> f64,
) -> Vec<f64> {
    let mut work = field.clone();
    let mut out = Vec::with_capacity(3 * field.dims().len());
    for i in 0..field.dims().len() {
        for c in 0..3 {
            let orig = work.vectors()[i][c];
            work.vectors_mut()[i][c] = orig + h;
            let plus = f(&work);
            work.vectors_mut()[i][c] = orig - h;
            let minus = f(&work);
            work.vectors_mut()[i][c] = orig;
            out.push((plus - minus) / (2.0 * h));
        }
    }
    out
}

pub fn flatten(v: &[[f64; 3]]) -> Vec<f64> {
    v.iter().flatten().copied().collect()
}

pub fn gauss(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Window of one sample over the bin centres, scaled to unit mass.
pub fn unit_window(s: f64, cfg: &ParzenConfig) -> Vec<f64> {
    let b = cfg.num_bins;
    let w: Vec<f64> = (0..b)
        .map(|k| gauss((k as f64 + 0.5) / b as f64 - s, cfg.sigma))
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Brute-force joint: double loop over sampled voxels and every bin pair.
/// Returns `(joint[j*B + k], marginal_a, marginal_b)`.
pub fn brute_joint(
    a: &Volume3D,
    b: &Volume3D,
    cfg: &ParzenConfig,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nb = cfg.num_bins;
    let d = a.dims();
    let st = cfg.sample_stride;
    let mut joint = vec![0.0; nb * nb];
    let mut ma = vec![0.0; nb];
    let mut mb = vec![0.0; nb];
    let mut n = 0.0;
    for z in (0..d.nz).step_by(st) {
        for y in (0..d.ny).step_by(st) {
            for x in (0..d.nx).step_by(st) {
                let wa = unit_window(a.get(x, y, z), cfg);
                let wb = unit_window(b.get(x, y, z), cfg);
                for j in 0..nb {
                    ma[j] += wa[j];
                    mb[j] += wb[j];
                    for k in 0..nb {
                        joint[j * nb + k] += wa[j] * wb[k];
                    }
                }
                n += 1.0;
            }
        }
    }
    for p in joint.iter_mut().chain(&mut ma).chain(&mut mb) {
        *p /= n;
    }
    (joint, ma, mb)
}

pub fn plogp_mi(joint: &[f64], ma: &[f64], mb: &[f64]) -> f64 {
    let nb = ma.len();
    let mut mi = 0.0;
    for j in 0..nb {
        for k in 0..nb {
            let p = joint[j * nb + k];
            if p > 0.0 {
                mi += p * (p / (ma[j] * mb[k])).ln();
            }
        }
    }
    mi
}

/// Hard-binned MI from an explicit contingency table.
pub fn contingency_mi(a: &Volume3D, b: &Volume3D, bins: usize) -> f64 {
    let bin = |v: f64| ((v * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
    let mut table = vec![vec![0usize; bins]; bins];
    for (&x, &y) in a.data().iter().zip(b.data()) {
        table[bin(x)][bin(y)] += 1;
    }
    let n = a.len() as f64;
    let rows: Vec<f64> = table
        .iter()
        .map(|r| r.iter().sum::<usize>() as f64)
        .collect();
    let cols: Vec<f64> = (0..bins)
        .map(|k| table.iter().map(|r| r[k]).sum::<usize>() as f64)
        .collect();
    let mut mi = 0.0;
    for j in 0..bins {
        for k in 0..bins {
            let c = table[j][k] as f64;
            if c > 0.0 {
                mi += c / n * (c * n / (rows[j] * cols[k])).ln();
            }
        }
    }
    mi
}

pub fn direct_ncc(a: &Volume3D, b: &Volume3D) -> f64 {
    let n = a.len() as f64;
    let ma = a.data().iter().sum::<f64>() / n;
    let mb = b.data().iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Mean SSIM over every 7x7x7 window fully inside the volume, each window's
/// moments summed directly.
pub fn direct_ssim(a: &Volume3D, b: &Volume3D) -> f64 {
    const W: usize = 7;
    let (c1, c2) = (1e-4, 9e-4);
    let d = a.dims();
    let mut total = 0.0;
    let mut count = 0.0;
    for z0 in 0..=d.nz - W {
        for y0 in 0..=d.ny - W {
            for x0 in 0..=d.nx - W {
                let mut s = [0.0f64; 5];
                for z in z0..z0 + W {
                    for y in y0..y0 + W {
                        for x in x0..x0 + W {
                            let (p, q) = (a.get(x, y, z), b.get(x, y, z));
                            s[0] += p;
                            s[1] += q;
                            s[2] += p * p;
                            s[3] += q * q;
                            s[4] += p * q;
                        }
                    }
                }
                let n = (W * W * W) as f64;
                let (ma, mb) = (s[0] / n, s[1] / n);
                let va = s[2] / n - ma * ma;
                let vb = s[3] / n - mb * mb;
                let cov = s[4] / n - ma * mb;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1.0;
            }
        }
    }
    total / count
}

/// Trilinear value by explicitly weighting the 8 surrounding voxels after
/// clamping the point into the grid.
pub fn corner_blend(m: &Volume3D, p: [f64; 3]) -> f64 {
    let d = m.dims().as_array();
    let mut lo = [0usize; 3];
    let mut t = [0.0; 3];
    for a in 0..3 {
        let top = (d[a] - 1) as f64;
        let c = p[a].clamp(0.0, top);
        let i = (c.floor() as usize).min(d[a].saturating_sub(2));
        lo[a] = i;
        t[a] = if d[a] == 1 { 0.0 } else { c - i as f64 };
    }
    let mut v = 0.0;
    for corner in 0..8 {
        let mut idx = [0usize; 3];
        let mut w = 1.0;
        for a in 0..3 {
            let up = (corner >> a) & 1 == 1;
            idx[a] = (lo[a] + up as usize).min(d[a] - 1);
            w *= if up { t[a] } else { 1.0 - t[a] };
        }
        v += w * m.get(idx[0], idx[1], idx[2]);
    }
    v
}

/// Sum of squared forward differences over all axes and components, divided
/// by the voxel count.
pub fn brute_smoothness(f: &DisplacementField) -> f64 {
    let d = f.dims();
    let mut s = 0.0;
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                let here = f.get(x, y, z);
                let nbrs = [
                    (x + 1 < d.nx).then(|| f.get(x + 1, y, z)),
                    (y + 1 < d.ny).then(|| f.get(x, y + 1, z)),
                    (z + 1 < d.nz).then(|| f.get(x, y, z + 1)),
                ];
                for n in nbrs.into_iter().flatten() {
                    for c in 0..3 {
                        s += (n[c] - here[c]).powi(2);
                    }
                }
            }
        }
    }
    s / d.len() as f64
}

/// Block mean with explicit handling of the partial blocks at the far edges.
pub fn brute_downsample(v: &Volume3D, f: usize) -> Vec<f64> {
    let d = v.dims();
    let out = [d.nx.div_ceil(f), d.ny.div_ceil(f), d.nz.div_ceil(f)];
    let mut res = Vec::new();
    for bz in 0..out[2] {
        for by in 0..out[1] {
            for bx in 0..out[0] {
                let mut s = 0.0;
                let mut n = 0.0;
                for z in bz * f..((bz + 1) * f).min(d.nz) {
                    for y in by * f..((by + 1) * f).min(d.ny) {
                        for x in bx * f..((bx + 1) * f).min(d.nx) {
                            s += v.get(x, y, z);
                            n += 1.0;
                        }
                    }
                }
                res.push(s / n);
            }
        }
    }
    res
}

/// Central-difference step shared by the gradient checks.
pub const FD_STEP: f64 = 1e-4;

/// Entries smaller than this fraction of the largest finite difference are
/// judged against that floor instead of their own size. At h = 1e-4 the
/// truncation error of such entries is comparable to their value.
pub const GRAD_FLOOR: f64 = 1e-2;

/// Relative gradient errors for one seeded 6³ pair, in the order
/// dmi, ncc, mse, smoothness, total_loss. dmi, ncc and mse are differentiated
/// w.r.t. the second image; smoothness and total_loss w.r.t. the field.
pub fn gradient_errors(seed: u64, floor: f64) -> [f64; 5] {
    use dmireg::losses::{
        dmi_loss, mse_loss, ncc_loss, smoothness_loss, Objective, SimilarityKind,
    };
    let mut r = rng(seed);
    let dims = Dims::cube(6);
    let a = textured_volume(&mut r, dims);
    let b = textured_volume(&mut r, dims);
    let cfg = ParzenConfig::default();
    let mut out = [0.0; 5];

    let dmi = dmi_loss(&a, &b, &cfg).unwrap();
    out[0] = max_rel_err(
        &dmi.grad,
        &fd_intensity(&b, FD_STEP, |bb| dmi_loss(&a, bb, &cfg).unwrap().value),
        floor,
    );
    let ncc = ncc_loss(&a, &b).unwrap();
    out[1] = max_rel_err(
        &ncc.grad,
        &fd_intensity(&b, FD_STEP, |bb| ncc_loss(&a, bb).unwrap().value),
        floor,
    );
    let mse = mse_loss(&a, &b).unwrap();
    out[2] = max_rel_err(
        &mse.grad,
        &fd_intensity(&b, FD_STEP, |bb| mse_loss(&a, bb).unwrap().value),
        floor,
    );

    let field = off_grid_field(&mut r, dims);
    let sm = smoothness_loss(&field);
    out[3] = max_rel_err(
        &flatten(&sm.grad),
        &fd_field(&field, FD_STEP, |f| smoothness_loss(f).value),
        floor,
    );

    let obj = Objective {
        similarity: SimilarityKind::Dmi,
        parzen: cfg,
        lambda: 0.3,
    };
    let total = obj.evaluate(&a, &b, &field).unwrap();
    let fd = fd_field(&field, FD_STEP, |f| obj.evaluate(&a, &b, f).unwrap().value);
    out[4] = max_rel_err(&flatten(&total.grad), &fd, floor);
    out
}
