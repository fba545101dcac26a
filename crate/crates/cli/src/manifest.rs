use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dmireg::simeval::MetricSnapshot;

/// Ordered `key=value` record of one command run.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn path(&mut self, key: &str, path: &Path) {
        self.push(key, path.display());
    }

    pub fn metrics(&mut self, prefix: &str, m: &MetricSnapshot) {
        self.push(format!("{prefix}mi"), fmt_metric(Some(m.mi)));
        self.push(format!("{prefix}abs_ncc"), fmt_metric(m.ncc.map(f64::abs)));
        self.push(format!("{prefix}ssim"), fmt_metric(m.ssim));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Six decimals; `nan` when the metric is undefined for the inputs.
pub fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        _ => "nan".to_string(),
    }
}

pub fn manifest_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, ".manifest.txt")
}

/// `prefix` with `suffix` appended to its file name.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    prefix.with_file_name(name)
}
