use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::{nifti, raw, Volume3D};

enum Format {
    Nifti,
    Raw,
}

fn format_of(path: &Path) -> Result<Format> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("nii") => Ok(Format::Nifti),
        Some("f32raw") => Ok(Format::Raw),
        _ => Err(Error::UnknownFormat(path.to_path_buf())),
    }
}

/// Reads a `.nii` (NIfTI-1 single file) or `.f32raw` (raw + sidecar) volume.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    match format_of(path)? {
        Format::Nifti => nifti::read_nifti(path),
        Format::Raw => raw::read_raw(path),
    }
}

/// Writes float32 data in the format chosen by the file extension.
pub fn write_volume(v: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    write_files_atomic(&encode_volume(v, path)?)
}

/// The files, with contents, that [`write_volume`] would create for `path`.
/// A `.f32raw` target yields its sidecar as well.
pub fn encode_volume(v: &Volume3D, path: impl AsRef<Path>) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let path = path.as_ref();
    Ok(match format_of(path)? {
        Format::Nifti => vec![(path.to_path_buf(), nifti::encode(v)?)],
        Format::Raw => raw::encode(v, path),
    })
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

/// Write every file to a hidden sibling, then rename them all into place.
/// On failure the temporaries and any targets already renamed are removed,
/// so either all files appear or none of them do.
pub fn write_files_atomic(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let temps: Vec<PathBuf> = files.iter().map(|(p, _)| temp_path(p)).collect();
    let mut renamed = 0;
    let result = (|| -> std::io::Result<()> {
        for ((_, bytes), tmp) in files.iter().zip(&temps) {
            let mut f = fs::File::create(tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        for ((path, _), tmp) in files.iter().zip(&temps) {
            fs::rename(tmp, path)?;
            renamed += 1;
        }
        Ok(())
    })();
    if result.is_err() {
        for tmp in &temps[renamed..] {
            let _ = fs::remove_file(tmp);
        }
        for (path, _) in &files[..renamed] {
            let _ = fs::remove_file(path);
        }
    }
    Ok(result?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_batch_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("a.txt");
        let bad = dir.path().join("missing").join("b.txt");
        let err = write_files_atomic(&[(ok.clone(), b"a".to_vec()), (bad, b"b".to_vec())]);
        assert!(err.is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        write_files_atomic(&[(ok.clone(), b"a".to_vec())]).unwrap();
        assert_eq!(fs::read(&ok).unwrap(), b"a");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
