//! Synthetic distortion generation and evaluation metrics.

mod distortion;
mod metrics;

pub use distortion::{
    distortion_modes, ellipsoid_phantom, inverse_field, make_inter_modality_pair, make_pair_with,
    simulate_distortion, Axis, CosineMode, DistortionSpec, IntensityRemap, SyntheticCase,
    DISTORTION_MODES, INVERSE_ITERS, PAIR_MAX_DRAWS, PAIR_NOISE_STD, PHANTOM_LEVELS,
};
pub use metrics::{
    binned_entropy, evaluate_pair, hard_bin, metric_mi, metric_ncc, metric_ssim, MetricSnapshot,
    DEFAULT_MI_BINS, SSIM_C1, SSIM_C2, SSIM_WINDOW,
};
