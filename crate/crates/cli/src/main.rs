//! `dmireg` command-line tool: simulate distorted pairs, register them and
//! score the result.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn};

use dmireg::losses::SimilarityKind;
use dmireg::registration::{register, ConfigOverrides};
use dmireg::simeval::{
    ellipsoid_phantom, evaluate_pair, Axis, DistortionSpec, SyntheticCase, DEFAULT_MI_BINS,
};
use dmireg::volume::{encode_volume, normalize_intensities, read_volume, write_files_atomic};
use dmireg::warp::warp;
use dmireg::{Dims, DisplacementField, NormalizationSpec, Volume3D};

use manifest::{fmt_metric, manifest_path, with_suffix, Manifest};

#[derive(Parser)]
#[command(
    name = "dmireg",
    version,
    about = "Deformable registration with a differentiable MI loss"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register a moving volume onto a fixed one.
    Register {
        #[arg(long)]
        fixed: PathBuf,
        #[arg(long)]
        moving: PathBuf,
        /// Flat key=value file; flags below take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Prefix for the field files (`<P>.dx.nii`, ...) and the manifest.
        /// A trailing `.nii` or `.f32raw` selects the format.
        #[arg(long)]
        out_field: PathBuf,
        #[arg(long)]
        out_warped: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        similarity: Option<SimilarityKind>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Build a distorted inter-modality pair from a base volume.
    Simulate {
        #[arg(long)]
        base: PathBuf,
        /// Phase-encoding axis.
        #[arg(long)]
        axis: Axis,
        /// Largest displacement, in voxels.
        #[arg(long)]
        magnitude: f64,
        /// Shortest wavelength of the distortion, in voxels.
        #[arg(long)]
        scale: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Print MI, |NCC| and SSIM between two volumes.
    Evaluate {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MI_BINS)]
        bins: usize,
    },
    /// Write the three-ellipsoid test phantom.
    Phantom {
        /// Edge length of the cubic grid.
        #[arg(long, default_value_t = 48)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Register {
            fixed,
            moving,
            config,
            out_field,
            out_warped,
            lambda,
            similarity,
            levels,
            iters,
        } => {
            let flags = ConfigOverrides {
                lambda,
                similarity,
                levels,
                iters_per_level: iters,
                ..Default::default()
            };
            cmd_register(
                &fixed,
                &moving,
                config.as_deref(),
                &flags,
                &out_field,
                &out_warped,
            )
        }
        Command::Simulate {
            base,
            axis,
            magnitude,
            scale,
            seed,
            out_prefix,
        } => {
            let spec = DistortionSpec {
                phase_axis: axis,
                max_magnitude: magnitude,
                smoothness_scale: scale,
                seed,
            };
            cmd_simulate(&base, &spec, &out_prefix)
        }
        Command::Evaluate { a, b, bins } => cmd_evaluate(&a, &b, bins),
        Command::Phantom { size, out } => cmd_phantom(size, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Reads a volume and maps it into `[0, 1]` with the default percentile
/// clamp unless it already lies there.
fn load_unit(path: &Path) -> Result<Volume3D> {
    let v = read_volume(path).with_context(|| format!("reading {}", path.display()))?;
    if v.ensure_normalized().is_ok() {
        return Ok(v);
    }
    warn!(
        "{}: intensities outside [0, 1], normalising",
        path.display()
    );
    normalize_intensities(&v, &NormalizationSpec::default())
        .with_context(|| format!("normalising {}", path.display()))
}

/// Fails early, before any heavy work, when an output directory is missing.
fn check_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            bail!("output directory {} does not exist", dir.display())
        }
        _ => Ok(()),
    }
}

/// Splits `path` into a prefix and a volume extension, defaulting to `.nii`.
fn split_ext(path: &Path) -> (PathBuf, &'static str) {
    match path.extension().and_then(|e| e.to_str()) {
        Some("nii") => (path.with_extension(""), ".nii"),
        Some("f32raw") => (path.with_extension(""), ".f32raw"),
        _ => (path.to_path_buf(), ".nii"),
    }
}

/// Staged output files, committed together.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn volume(&mut self, v: &Volume3D, path: PathBuf) -> Result<PathBuf> {
        self.files.extend(encode_volume(v, &path)?);
        Ok(path)
    }

    /// `<prefix>.dx<ext>`, `.dy`, `.dz`.
    fn field(
        &mut self,
        field: &DisplacementField,
        spacing: [f64; 3],
        prefix: &Path,
        ext: &str,
    ) -> Result<[PathBuf; 3]> {
        let mut paths = Vec::with_capacity(3);
        for (c, name) in ["dx", "dy", "dz"].iter().enumerate() {
            let path = with_suffix(prefix, &format!(".{name}{ext}"));
            paths.push(self.volume(&field.component(c, spacing)?, path)?);
        }
        Ok(paths.try_into().expect("three components"))
    }

    fn text(&mut self, path: PathBuf, text: String) {
        self.files.push((path, text.into_bytes()));
    }

    fn commit(self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (p, _) in &self.files {
            if !seen.insert(p) {
                bail!("output path {} is used twice", p.display());
            }
        }
        write_files_atomic(&self.files).context("writing outputs")?;
        Ok(())
    }
}

fn cmd_register(
    fixed_path: &Path,
    moving_path: &Path,
    config_path: Option<&Path>,
    flags: &ConfigOverrides,
    out_field: &Path,
    out_warped: &Path,
) -> Result<()> {
    let start = Instant::now();
    check_parent(out_field)?;
    check_parent(out_warped)?;
    let file = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            ConfigOverrides::parse(&text).with_context(|| format!("config {}", p.display()))?
        }
        None => ConfigOverrides::default(),
    };
    let cfg = file.merge(flags).resolve()?;

    let fixed = load_unit(fixed_path)?;
    let moving = load_unit(moving_path)?;
    fixed.ensure_same_dims(&moving)?;

    let before = evaluate_pair(&fixed, &moving, DEFAULT_MI_BINS)?;
    let (field, report) = register(&fixed, &moving, &cfg)?;
    let warped = warp(&moving, &field)?;
    let after = evaluate_pair(&fixed, &warped, DEFAULT_MI_BINS)?;

    let (prefix, ext) = split_ext(out_field);
    let mut out = Outputs::default();
    let field_paths = out.field(&field, fixed.spacing(), &prefix, ext)?;
    let warped_path = out.volume(&warped, out_warped.to_path_buf())?;

    let mut m = Manifest::new("register");
    m.path("fixed", fixed_path);
    m.path("moving", moving_path);
    m.push(
        "config",
        config_path.map_or("none".into(), |p| p.display().to_string()),
    );
    for (k, v) in cfg.kv_pairs() {
        m.push(k, v);
    }
    m.push("dims", fixed.dims());
    for (name, p) in ["field_dx", "field_dy", "field_dz"]
        .iter()
        .zip(&field_paths)
    {
        m.path(name, p);
    }
    m.path("warped", &warped_path);
    m.metrics("pre_", &before);
    m.metrics("post_", &after);
    for (i, level) in report.levels.iter().enumerate() {
        let key = |k: &str| format!("level{i}_{k}");
        m.push(key("dims"), level.dims);
        m.push(key("evaluations"), level.loss_trace.len());
        m.push(key("initial_loss"), format!("{:.6}", level.initial_loss()));
        m.push(key("final_loss"), format!("{:.6}", level.final_loss));
        m.push(
            key("final_similarity"),
            format!("{:.6}", level.final_similarity),
        );
        m.push(
            key("final_smoothness"),
            format!("{:.6}", level.final_smoothness),
        );
        m.push(key("converged"), level.converged);
        m.push(key("mi"), fmt_metric(Some(level.metrics.mi)));
    }
    m.push(
        "field_mean_magnitude",
        format!("{:.6}", field.mean_magnitude()),
    );
    m.push("seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    let manifest = manifest_path(&prefix);
    out.text(manifest.clone(), m.render());
    out.commit()?;

    info!(
        "MI {} -> {}, |NCC| {} -> {}, SSIM {} -> {}",
        fmt_metric(Some(before.mi)),
        fmt_metric(Some(after.mi)),
        fmt_metric(before.ncc.map(f64::abs)),
        fmt_metric(after.ncc.map(f64::abs)),
        fmt_metric(before.ssim),
        fmt_metric(after.ssim),
    );
    info!("manifest written to {}", manifest.display());
    Ok(())
}

fn cmd_simulate(base_path: &Path, spec: &DistortionSpec, prefix: &Path) -> Result<()> {
    check_parent(prefix)?;
    let base = load_unit(base_path)?;
    let case = SyntheticCase::generate(&base, spec)?;
    let spacing = base.spacing();

    let mut out = Outputs::default();
    let t1 = out.volume(&case.t1, with_suffix(prefix, ".t1.nii"))?;
    let b0 = out.volume(&case.b0, with_suffix(prefix, ".b0.nii"))?;
    let distorted = out.volume(&case.b0_distorted, with_suffix(prefix, ".b0_distorted.nii"))?;
    let truth = out.field(&case.truth, spacing, &with_suffix(prefix, ".field"), ".nii")?;
    let correction = out.field(
        &case.correction,
        spacing,
        &with_suffix(prefix, ".correction"),
        ".nii",
    )?;

    let before = evaluate_pair(&case.t1, &case.b0_distorted, DEFAULT_MI_BINS)?;
    let mut m = Manifest::new("simulate");
    m.path("base", base_path);
    m.push("axis", spec.phase_axis);
    m.push("magnitude", spec.max_magnitude);
    m.push("scale", spec.smoothness_scale);
    m.push("seed", spec.seed);
    m.push("dims", base.dims());
    m.path("t1", &t1);
    m.path("b0", &b0);
    m.path("b0_distorted", &distorted);
    for (name, p) in ["field_dx", "field_dy", "field_dz"].iter().zip(&truth) {
        m.path(name, p);
    }
    for (name, p) in ["correction_dx", "correction_dy", "correction_dz"]
        .iter()
        .zip(&correction)
    {
        m.path(name, p);
    }
    m.push(
        "field_max_abs",
        format!("{:.6}", case.truth.max_abs_component()),
    );
    m.metrics("distorted_", &before);
    out.text(manifest_path(prefix), m.render());
    out.commit()
}

fn cmd_evaluate(a_path: &Path, b_path: &Path, bins: usize) -> Result<()> {
    let a = load_unit(a_path)?;
    let b = load_unit(b_path)?;
    let m = evaluate_pair(&a, &b, bins)?;
    println!("mi={}", fmt_metric(Some(m.mi)));
    println!("abs_ncc={}", fmt_metric(m.ncc.map(f64::abs)));
    println!("ssim={}", fmt_metric(m.ssim));
    Ok(())
}

fn cmd_phantom(size: usize, out_path: &Path) -> Result<()> {
    let v = ellipsoid_phantom(Dims::cube(size))?;
    let mut out = Outputs::default();
    out.volume(&v, out_path.to_path_buf())?;
    out.commit()
}
