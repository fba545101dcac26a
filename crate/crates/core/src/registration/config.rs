//! Registration hyper-parameters and their flat `key=value` text form.
//!
//! Recognised keys are the field names of [`RegistrationConfig`], with the
//! Parzen settings flattened as `parzen_num_bins`, `parzen_sigma` and
//! `parzen_sample_stride`. Blank lines and `#` comments are skipped. An
//! unknown key or an empty value is an error.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::losses::{ParzenConfig, SimilarityKind};

pub const DEFAULT_LAMBDA_DMI: f64 = 0.3;
pub const DEFAULT_LAMBDA_NCC: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationConfig {
    /// Weight of the smoothness term.
    pub lambda: f64,
    /// Pyramid depth; each level halves the grid.
    pub levels: usize,
    pub iters_per_level: usize,
    pub step_size: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Relative change of the loss between iterations that ends a level.
    pub converge_tol: f64,
    pub similarity: SimilarityKind,
    pub parzen: ParzenConfig,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self::for_similarity(SimilarityKind::Dmi)
    }
}

/// Smoothness weight used when none is given.
pub fn default_lambda(kind: SimilarityKind) -> f64 {
    match kind {
        SimilarityKind::Ncc => DEFAULT_LAMBDA_NCC,
        SimilarityKind::Dmi | SimilarityKind::Mse => DEFAULT_LAMBDA_DMI,
    }
}

impl RegistrationConfig {
    pub fn for_similarity(similarity: SimilarityKind) -> Self {
        Self {
            lambda: default_lambda(similarity),
            levels: 3,
            iters_per_level: 100,
            step_size: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            converge_tol: 1e-5,
            similarity,
            parzen: ParzenConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidConfig(what));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda = {}", self.lambda));
        }
        if self.levels == 0 {
            return bad("levels = 0".into());
        }
        if self.iters_per_level == 0 {
            return bad("iters_per_level = 0".into());
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad(format!("step_size = {}", self.step_size));
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} = {b}"));
            }
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return bad(format!("adam_eps = {}", self.adam_eps));
        }
        if !(self.converge_tol.is_finite() && self.converge_tol >= 0.0) {
            return bad(format!("converge_tol = {}", self.converge_tol));
        }
        self.parzen.validate()
    }

    /// One `key=value` line per field, in declaration order.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.kv_pairs() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn kv_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("lambda", self.lambda.to_string()),
            ("levels", self.levels.to_string()),
            ("iters_per_level", self.iters_per_level.to_string()),
            ("step_size", self.step_size.to_string()),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
            ("converge_tol", self.converge_tol.to_string()),
            ("similarity", self.similarity.to_string()),
            ("parzen_num_bins", self.parzen.num_bins.to_string()),
            ("parzen_sigma", self.parzen.sigma.to_string()),
            (
                "parzen_sample_stride",
                self.parzen.sample_stride.to_string(),
            ),
        ]
    }
}

/// Partially specified configuration. Later layers override earlier ones;
/// [`resolve`](Self::resolve) fills the gaps with defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub lambda: Option<f64>,
    pub levels: Option<usize>,
    pub iters_per_level: Option<usize>,
    pub step_size: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub converge_tol: Option<f64>,
    pub similarity: Option<SimilarityKind>,
    pub parzen_num_bins: Option<usize>,
    pub parzen_sigma: Option<f64>,
    pub parzen_sample_stride: Option<usize>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("cannot parse `{value}` for `{key}`")))
}

impl ConfigOverrides {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        if value.is_empty() {
            return Err(Error::InvalidConfig(format!("missing value for `{key}`")));
        }
        match key {
            "lambda" => self.lambda = Some(parse_value(key, value)?),
            "levels" => self.levels = Some(parse_value(key, value)?),
            "iters_per_level" => self.iters_per_level = Some(parse_value(key, value)?),
            "step_size" => self.step_size = Some(parse_value(key, value)?),
            "adam_beta1" => self.adam_beta1 = Some(parse_value(key, value)?),
            "adam_beta2" => self.adam_beta2 = Some(parse_value(key, value)?),
            "adam_eps" => self.adam_eps = Some(parse_value(key, value)?),
            "converge_tol" => self.converge_tol = Some(parse_value(key, value)?),
            "similarity" => self.similarity = Some(value.parse()?),
            "parzen_num_bins" => self.parzen_num_bins = Some(parse_value(key, value)?),
            "parzen_sigma" => self.parzen_sigma = Some(parse_value(key, value)?),
            "parzen_sample_stride" => self.parzen_sample_stride = Some(parse_value(key, value)?),
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: `{line}` is not key=value", n + 1))
            })?;
            let key = key.trim();
            out.set(key, value)?;
            if !seen.insert(key) {
                return Err(Error::InvalidConfig(format!(
                    "line {}: `{key}` given twice",
                    n + 1
                )));
            }
        }
        Ok(out)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: &ConfigOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            lambda,
            levels,
            iters_per_level,
            step_size,
            adam_beta1,
            adam_beta2,
            adam_eps,
            converge_tol,
            similarity,
            parzen_num_bins,
            parzen_sigma,
            parzen_sample_stride
        );
        self
    }

    pub fn resolve(&self) -> Result<RegistrationConfig> {
        let similarity = self.similarity.unwrap_or(SimilarityKind::Dmi);
        let d = RegistrationConfig::for_similarity(similarity);
        let bins = self.parzen_num_bins.unwrap_or(d.parzen.num_bins);
        let mut parzen = ParzenConfig::with_bins(bins);
        if let Some(s) = self.parzen_sigma {
            parzen.sigma = s;
        }
        if let Some(s) = self.parzen_sample_stride {
            parzen.sample_stride = s;
        }
        let cfg = RegistrationConfig {
            lambda: self.lambda.unwrap_or(d.lambda),
            levels: self.levels.unwrap_or(d.levels),
            iters_per_level: self.iters_per_level.unwrap_or(d.iters_per_level),
            step_size: self.step_size.unwrap_or(d.step_size),
            adam_beta1: self.adam_beta1.unwrap_or(d.adam_beta1),
            adam_beta2: self.adam_beta2.unwrap_or(d.adam_beta2),
            adam_eps: self.adam_eps.unwrap_or(d.adam_eps),
            converge_tol: self.converge_tol.unwrap_or(d.converge_tol),
            similarity,
            parzen,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
