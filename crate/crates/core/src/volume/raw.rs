//! Headerless little-endian float32 payload (`<name>.f32raw`) with a text
//! sidecar (`<name>.hdr.txt`):
//!
//! ```text
//! dims: 64 64 48
//! spacing: 1 1 1.5
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume3D};

pub(crate) fn sidecar_path(payload: &Path) -> PathBuf {
    let stem = payload
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    payload.with_file_name(format!("{stem}.hdr.txt"))
}

fn parse_triple<T: std::str::FromStr>(path: &Path, key: &str, value: &str) -> Result<[T; 3]> {
    let parts: Vec<T> = value
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("cannot parse `{key}: {value}`"),
        })?;
    <[T; 3]>::try_from(parts).map_err(|_| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: format!("`{key}` needs three values"),
    })
}

pub(crate) fn parse_sidecar(path: &Path, text: &str) -> Result<(Dims, [f64; 3])> {
    let mut dims = None;
    let mut spacing = None;
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("line `{line}` is not `key: value`"),
        })?;
        match key.trim() {
            "dims" => dims = Some(Dims::from_array(parse_triple(path, "dims", value)?)),
            "spacing" => spacing = Some(parse_triple(path, "spacing", value)?),
            other => {
                return Err(Error::MalformedHeader {
                    path: path.to_path_buf(),
                    reason: format!("unknown key `{other}`"),
                })
            }
        }
    }
    match (dims, spacing) {
        (Some(d), Some(s)) => Ok((d, s)),
        _ => Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "sidecar needs both `dims` and `spacing`".into(),
        }),
    }
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let hdr = sidecar_path(path);
    let (dims, spacing) = parse_sidecar(&hdr, &std::fs::read_to_string(&hdr)?)?;
    let bytes = std::fs::read(path)?;
    let expected = 4 * dims.len() as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Volume3D::new(dims, spacing, data)
}

/// Sidecar and payload, in that order.
pub(crate) fn encode(v: &Volume3D, path: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let d = v.dims();
    let s = v.spacing();
    let header = format!(
        "dims: {} {} {}\nspacing: {} {} {}\n",
        d.nx, d.ny, d.nz, s[0], s[1], s[2]
    );
    let payload: Vec<u8> = v
        .data()
        .iter()
        .flat_map(|&x| (x as f32).to_le_bytes())
        .collect();
    vec![
        (sidecar_path(path), header.into_bytes()),
        (path.to_path_buf(), payload),
    ]
}

pub fn write_raw(v: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    super::io::write_files_atomic(&encode(v, path.as_ref()))
}
