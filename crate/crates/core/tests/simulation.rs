mod common;

use common::corner_blend;
use dmireg::simeval::{
    binned_entropy, distortion_modes, ellipsoid_phantom, inverse_field, make_inter_modality_pair,
    make_pair_with, metric_mi, metric_ncc, simulate_distortion, Axis, DistortionSpec,
    IntensityRemap, SyntheticCase, DEFAULT_MI_BINS, PHANTOM_LEVELS,
};
use dmireg::warp::warp;
use dmireg::{Dims, DisplacementField, Volume3D};

fn spec(axis: Axis, mag: f64, scale: f64, seed: u64) -> DistortionSpec {
    DistortionSpec {
        phase_axis: axis,
        max_magnitude: mag,
        smoothness_scale: scale,
        seed,
    }
}

fn max_forward_difference(f: &DisplacementField, c: usize) -> f64 {
    let d = f.dims();
    let mut worst = 0.0f64;
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                let v = f.get(x, y, z)[c];
                for (ok, n) in [
                    (x + 1 < d.nx, (x + 1, y, z)),
                    (y + 1 < d.ny, (x, y + 1, z)),
                    (z + 1 < d.nz, (x, y, z + 1)),
                ] {
                    if ok {
                        worst = worst.max((f.get(n.0, n.1, n.2)[c] - v).abs());
                    }
                }
            }
        }
    }
    worst
}

#[test]
fn field_respects_band_limit() {
    let s = spec(Axis::Y, 4.0, 8.0, 42);
    let dims = Dims::cube(16);
    let f = simulate_distortion(dims, &s).unwrap();
    let diff = max_forward_difference(&f, 1);
    assert!(
        diff <= std::f64::consts::TAU * s.max_magnitude / s.smoothness_scale,
        "{diff}"
    );

    // Rebuild the field from the modes and bound its slope mode by mode.
    let modes = distortion_modes(&s);
    let raw = |x: f64, y: f64, z: f64| -> f64 {
        modes
            .iter()
            .map(|m| {
                m.amplitude
                    * (m.wavevector[0] * x + m.wavevector[1] * y + m.wavevector[2] * z + m.phase)
                        .cos()
            })
            .sum()
    };
    let peak = (0..dims.len())
        .map(|i| {
            let (x, y, z) = dims.coords(i);
            raw(x as f64, y as f64, z as f64).abs()
        })
        .fold(0.0, f64::max);
    for i in 0..dims.len() {
        let (x, y, z) = dims.coords(i);
        assert!((f.vectors()[i][1] - 4.0 * raw(x as f64, y as f64, z as f64) / peak).abs() < 1e-12);
    }
    let slope: f64 = modes
        .iter()
        .map(|m| m.amplitude * m.wavevector.iter().fold(0.0f64, |a, k| a.max(k.abs())))
        .sum();
    assert!(diff <= 4.0 / peak * slope + 1e-12);
    for m in &modes {
        let k = m.wavevector.iter().map(|k| k * k).sum::<f64>().sqrt();
        assert!(k <= std::f64::consts::TAU / 8.0 + 1e-12);
    }
}

#[test]
fn distortion_examples() {
    let f = simulate_distortion(Dims::cube(8), &spec(Axis::Z, 0.0, 8.0, 3)).unwrap();
    assert_eq!(f.max_abs_component(), 0.0);
    let f = simulate_distortion(Dims::cube(12), &spec(Axis::X, 2.5, 6.0, 7)).unwrap();
    assert!((f.max_abs_component() - 2.5).abs() < 1e-12);
    assert!(f.vectors().iter().all(|v| v[1] == 0.0 && v[2] == 0.0));
    let g = simulate_distortion(Dims::cube(12), &spec(Axis::X, 2.5, 6.0, 8)).unwrap();
    assert_ne!(f, g);
    assert!(simulate_distortion(Dims::cube(4), &spec(Axis::X, -1.0, 6.0, 8)).is_err());
    assert!(simulate_distortion(Dims::cube(4), &spec(Axis::X, 1.0, 0.0, 8)).is_err());
}

#[test]
fn identity_pair_without_noise_is_exact() {
    let base = ellipsoid_phantom(Dims::cube(12)).unwrap();
    let (t1, b0) = make_pair_with(&base, &IntensityRemap::identity(), 0.0, 1).unwrap();
    assert_eq!(t1, base);
    assert_eq!(b0, base);
}

#[test]
fn inverted_pair_keeps_information() {
    let base = ellipsoid_phantom(Dims::cube(16)).unwrap();
    let (_, b0) = make_pair_with(&base, &IntensityRemap::inverted(), 0.0, 1).unwrap();
    assert!((metric_ncc(&base, &b0).unwrap() + 1.0).abs() < 1e-12);
    let self_mi = metric_mi(&base, &base, DEFAULT_MI_BINS).unwrap();
    assert!((metric_mi(&base, &b0, DEFAULT_MI_BINS).unwrap() - self_mi).abs() < 1e-12);
}

#[test]
fn seeded_pairs_are_informative_but_decorrelated() {
    for (n, seed) in [(24, 42), (24, 1), (32, 7), (48, 42)] {
        let base = ellipsoid_phantom(Dims::cube(n)).unwrap();
        let (t1, b0) = make_inter_modality_pair(&base, seed).unwrap();
        assert_eq!(t1, base);
        assert_eq!(
            (t1.clone(), b0.clone()),
            make_inter_modality_pair(&base, seed).unwrap()
        );
        let h = binned_entropy(&base, DEFAULT_MI_BINS).unwrap();
        let ncc = metric_ncc(&t1, &b0).unwrap();
        let mi = metric_mi(&t1, &b0, DEFAULT_MI_BINS).unwrap();
        assert!(ncc.abs() < 0.9, "n {n} seed {seed}: ncc {ncc}");
        assert!(mi > 0.5 * h, "n {n} seed {seed}: mi {mi} H {h}");
        let noise = b0
            .data()
            .iter()
            .zip(base.data())
            .filter(|(b, _)| **b > 0.0 && **b < 1.0)
            .count();
        assert!(noise > 0);
    }
}

#[test]
fn phantom_has_all_levels() {
    let p = ellipsoid_phantom(Dims::cube(48)).unwrap();
    for level in PHANTOM_LEVELS {
        assert!(p.data().contains(&level));
    }
    assert!(p.data().iter().all(|v| PHANTOM_LEVELS.contains(v)));
    let background = p.data().iter().filter(|v| **v == 0.0).count() as f64 / p.len() as f64;
    assert!(background < 0.6, "{background}");
}

#[test]
fn inverse_field_composes_to_identity() {
    let s = spec(Axis::Y, 4.0, 24.0, 42);
    let dims = Dims::cube(24);
    let phi = simulate_distortion(dims, &s).unwrap();
    let psi = inverse_field(&phi, 200).unwrap();
    let phi_y = phi.component(1, [1.0; 3]).unwrap();
    for i in 0..dims.len() {
        let (x, y, z) = dims.coords(i);
        let p = psi.vectors()[i];
        assert_eq!((p[0], p[2]), (0.0, 0.0));
        let at = [x as f64, y as f64 + p[1], z as f64];
        // Only check points whose preimage stays inside the grid.
        if at[1] >= 0.0 && at[1] <= (dims.ny - 1) as f64 {
            assert!((p[1] + corner_blend(&phi_y, at)).abs() < 1e-9);
        }
    }
}

#[test]
fn synthetic_case_is_consistent() {
    let base = ellipsoid_phantom(Dims::cube(24)).unwrap();
    let s = spec(Axis::Y, 3.0, 24.0, 5);
    let case = SyntheticCase::generate(&base, &s).unwrap();
    assert_eq!(case.b0_distorted, warp(&case.b0, &case.truth).unwrap());
    let (err, zero) = case.endpoint_errors(&case.correction).unwrap();
    assert_eq!(err, 0.0);
    assert!(zero > 0.5);
    let restored = warp(&case.b0_distorted, &case.correction).unwrap();
    let before = mean_abs(&case.b0_distorted, &case.b0);
    let after = mean_abs(&restored, &case.b0);
    assert!(after < 0.5 * before, "{after} vs {before}");
}

fn mean_abs(a: &Volume3D, b: &Volume3D) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / a.len() as f64
}
