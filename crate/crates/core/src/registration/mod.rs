//! Coarse-to-fine optimisation of a dense displacement field.
//!
//! Both images are reduced to a pyramid by repeated 2x block averaging. The
//! field starts at zero on the coarsest grid; at each level it is refined by
//! adaptive-moment descent on `similarity + lambda * smoothness` and then
//! trilinearly upsampled (with its components doubled) to seed the next
//! level. Within a level the lowest-loss iterate is kept, so a level never
//! ends above its starting loss.

mod adam;
mod config;

use std::time::{Duration, Instant};

use log::debug;

use crate::error::{Error, Result};
use crate::losses::Objective;
use crate::simeval::{evaluate_pair, MetricSnapshot, DEFAULT_MI_BINS};
use crate::volume::{downsample, Dims, DisplacementField, Volume3D};
use crate::warp::{trilinear_sample, warp, SamplePoint};

pub use adam::Adam;
pub use config::{
    default_lambda, ConfigOverrides, RegistrationConfig, DEFAULT_LAMBDA_DMI, DEFAULT_LAMBDA_NCC,
};

/// Iterations over which the relative loss change is averaged before it is
/// compared with `converge_tol`. Adam oscillates, so two consecutive losses
/// can agree by chance long before the level has settled.
pub const CONVERGE_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub dims: Dims,
    /// Objective at every evaluated iterate, in order.
    pub loss_trace: Vec<f64>,
    /// Objective of the field handed to the next level.
    pub final_loss: f64,
    pub final_similarity: f64,
    pub final_smoothness: f64,
    pub converged: bool,
    /// Fixed vs. warped moving at this level, after optimisation.
    pub metrics: MetricSnapshot,
}

impl LevelReport {
    pub fn initial_loss(&self) -> f64 {
        self.loss_trace[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationReport {
    pub config: RegistrationConfig,
    /// Coarsest first.
    pub levels: Vec<LevelReport>,
    pub duration: Duration,
}

/// Resample a field onto a grid `factor` times finer, scaling its
/// components by `factor`. Voxel centres are aligned, so fine voxel `i` sits
/// at coarse coordinate `(i + 0.5) / factor - 0.5`.
pub fn upsample_field(
    field: &DisplacementField,
    target: Dims,
    factor: usize,
) -> Result<DisplacementField> {
    if factor == 0 {
        return Err(Error::InvalidConfig("upsample factor must be >= 1".into()));
    }
    let f = factor as f64;
    let components = (0..3)
        .map(|c| field.component(c, [1.0; 3]))
        .collect::<Result<Vec<_>>>()?;
    let to_coarse = |i: usize| (i as f64 + 0.5) / f - 0.5;
    DisplacementField::from_fn(target, |x, y, z| {
        let p = SamplePoint::new(to_coarse(x), to_coarse(y), to_coarse(z));
        let mut v = [0.0; 3];
        for (c, comp) in components.iter().enumerate() {
            v[c] = trilinear_sample(comp, p).0 * f;
        }
        v
    })
}

fn pyramid(v: &Volume3D, levels: usize) -> Result<Vec<Volume3D>> {
    let mut out = vec![v.clone()];
    for _ in 1..levels {
        let next = downsample(out.last().unwrap(), 2)?;
        out.push(next);
    }
    out.reverse();
    Ok(out)
}

/// Register `moving` onto `fixed`; both must share a grid and lie in `[0, 1]`.
pub fn register(
    fixed: &Volume3D,
    moving: &Volume3D,
    cfg: &RegistrationConfig,
) -> Result<(DisplacementField, RegistrationReport)> {
    cfg.validate()?;
    fixed.ensure_same_dims(moving)?;
    fixed.ensure_normalized()?;
    moving.ensure_normalized()?;
    let start = Instant::now();

    let objective = Objective {
        similarity: cfg.similarity,
        parzen: cfg.parzen,
        lambda: cfg.lambda,
    };
    let fixed_pyr = pyramid(fixed, cfg.levels)?;
    let moving_pyr = pyramid(moving, cfg.levels)?;

    let mut field = DisplacementField::zeros(fixed_pyr[0].dims());
    let mut reports = Vec::with_capacity(cfg.levels);

    for (level, (f, m)) in fixed_pyr.iter().zip(&moving_pyr).enumerate() {
        if level > 0 {
            field = upsample_field(&field, f.dims(), 2)?;
        }
        let mut adam = Adam::new(
            f.len(),
            cfg.step_size,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_eps,
        );
        let mut trace = Vec::with_capacity(cfg.iters_per_level + 1);
        let mut best: Option<(f64, f64, f64, DisplacementField)> = None;
        let mut converged = false;

        for it in 0..=cfg.iters_per_level {
            let eval = objective.evaluate(f, m, &field)?;
            if !eval.value.is_finite() {
                return Err(Error::InvalidField(format!(
                    "non-finite loss at level {level}, iteration {it}"
                )));
            }
            trace.push(eval.value);
            if best.as_ref().is_none_or(|b| eval.value < b.0) {
                best = Some((eval.value, eval.similarity, eval.smoothness, field.clone()));
            }
            if let Some(&p) = trace
                .len()
                .checked_sub(CONVERGE_WINDOW + 1)
                .map(|i| &trace[i])
            {
                let tol = cfg.converge_tol * CONVERGE_WINDOW as f64;
                if (p - eval.value).abs() <= tol * p.abs().max(f64::MIN_POSITIVE) {
                    converged = true;
                    break;
                }
            }
            if it == cfg.iters_per_level {
                break;
            }
            adam.step(field.vectors_mut(), &eval.grad);
        }

        let (final_loss, final_similarity, final_smoothness, best_field) =
            best.expect("at least one evaluation per level");
        field = best_field;
        let metrics = evaluate_pair(f, &warp(m, &field)?, DEFAULT_MI_BINS)?;
        debug!(
            "level {level} ({}): loss {:.6} -> {:.6} in {} evaluations, MI {:.4}",
            f.dims(),
            trace[0],
            final_loss,
            trace.len(),
            metrics.mi
        );
        reports.push(LevelReport {
            dims: f.dims(),
            loss_trace: trace,
            final_loss,
            final_similarity,
            final_smoothness,
            converged,
            metrics,
        });
    }

    Ok((
        field,
        RegistrationReport {
            config: *cfg,
            levels: reports,
            duration: start.elapsed(),
        },
    ))
}
