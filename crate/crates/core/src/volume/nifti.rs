//! Minimal single-file NIfTI-1 (`.nii`, magic `n+1`) support.
//!
//! Reads 16-bit signed integer and 32-bit float payloads in either byte
//! order, applying `scl_slope`/`scl_inter`. Writes little-endian float32
//! with a 352-byte offset (348-byte header plus an empty extension flag).
//! Orientation fields are ignored on read and left zero on write.

use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume3D};

pub(crate) const HEADER_SIZE: usize = 348;
const DEFAULT_VOX_OFFSET: usize = 352;

const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

mod offset {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const MAGIC: usize = 344;
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Reader<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Reader<'_> {
    fn arr<const N: usize>(&self, at: usize) -> [u8; N] {
        self.bytes[at..at + N].try_into().unwrap()
    }

    fn i16(&self, at: usize) -> i16 {
        match self.endian {
            Endian::Little => i16::from_le_bytes(self.arr(at)),
            Endian::Big => i16::from_be_bytes(self.arr(at)),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        match self.endian {
            Endian::Little => f32::from_le_bytes(self.arr(at)),
            Endian::Big => f32::from_be_bytes(self.arr(at)),
        }
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    decode(path, &bytes)
}

pub(crate) fn decode(path: &Path, bytes: &[u8]) -> Result<Volume3D> {
    if bytes.len() < HEADER_SIZE {
        return Err(malformed(path, format!("only {} bytes", bytes.len())));
    }
    let size_le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let size_be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let endian = match (size_le, size_be) {
        (348, _) => Endian::Little,
        (_, 348) => Endian::Big,
        _ => return Err(malformed(path, format!("sizeof_hdr is {size_le}"))),
    };
    let r = Reader { bytes, endian };

    if &bytes[offset::MAGIC..offset::MAGIC + 4] != b"n+1\0" {
        return Err(malformed(path, "magic is not single-file n+1"));
    }

    let ndim = r.i16(offset::DIM);
    if !(1..=7).contains(&ndim) {
        return Err(malformed(path, format!("dim[0] = {ndim}")));
    }
    let mut extent = [1usize; 3];
    for (axis, e) in extent.iter_mut().enumerate().take(ndim.min(3) as usize) {
        let d = r.i16(offset::DIM + 2 * (axis + 1));
        if d < 1 {
            return Err(malformed(path, format!("dim[{}] = {d}", axis + 1)));
        }
        *e = d as usize;
    }
    for k in 4..=ndim as usize {
        let d = r.i16(offset::DIM + 2 * k);
        if d > 1 {
            return Err(malformed(
                path,
                format!("dim[{k}] = {d}; only 3-D volumes are supported"),
            ));
        }
    }
    let dims = Dims::from_array(extent);

    let datatype = r.i16(offset::DATATYPE);
    let bytes_per_voxel = match datatype {
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        other => return Err(Error::UnsupportedDatatype(other)),
    };

    let mut spacing = [1.0f64; 3];
    for (axis, s) in spacing.iter_mut().enumerate() {
        let p = r.f32(offset::PIXDIM + 4 * (axis + 1)).abs() as f64;
        if !p.is_finite() || p == 0.0 {
            return Err(malformed(path, format!("pixdim[{}] = {p}", axis + 1)));
        }
        *s = p;
    }

    let vox_offset = r.f32(offset::VOX_OFFSET);
    if !vox_offset.is_finite() || vox_offset < HEADER_SIZE as f32 || vox_offset.fract() != 0.0 {
        return Err(malformed(path, format!("vox_offset = {vox_offset}")));
    }
    let start = vox_offset as usize;
    let expected = (start + dims.len() * bytes_per_voxel) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }

    let slope = r.f32(offset::SCL_SLOPE) as f64;
    let inter = r.f32(offset::SCL_INTER) as f64;
    // slope 0 means "no scaling" in NIfTI-1.
    let scale = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);
    let inter = if inter.is_finite() { inter } else { 0.0 };

    let payload = Reader {
        bytes: &bytes[start..],
        endian,
    };
    let data = (0..dims.len())
        .map(|i| {
            let raw = match datatype {
                DT_INT16 => payload.i16(2 * i) as f64,
                _ => payload.f32(4 * i) as f64,
            };
            if scale {
                raw * slope + inter
            } else {
                raw
            }
        })
        .collect();
    Volume3D::new(dims, spacing, data)
}

pub(crate) fn encode(v: &Volume3D) -> Result<Vec<u8>> {
    let dims = v.dims();
    if dims.as_array().iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::InvalidVolume(format!(
            "{dims} exceeds NIfTI-1 extent limit"
        )));
    }
    let mut out = vec![0u8; DEFAULT_VOX_OFFSET + 4 * v.len()];
    let mut put = |at: usize, b: &[u8]| out[at..at + b.len()].copy_from_slice(b);

    put(offset::SIZEOF_HDR, &(HEADER_SIZE as i32).to_le_bytes());
    let dim: [i16; 8] = [
        3,
        dims.nx as i16,
        dims.ny as i16,
        dims.nz as i16,
        1,
        1,
        1,
        1,
    ];
    for (k, d) in dim.iter().enumerate() {
        put(offset::DIM + 2 * k, &d.to_le_bytes());
    }
    put(offset::DATATYPE, &DT_FLOAT32.to_le_bytes());
    put(offset::BITPIX, &32i16.to_le_bytes());
    let sp = v.spacing();
    let pixdim: [f32; 8] = [
        1.0,
        sp[0] as f32,
        sp[1] as f32,
        sp[2] as f32,
        1.0,
        1.0,
        1.0,
        1.0,
    ];
    for (k, p) in pixdim.iter().enumerate() {
        put(offset::PIXDIM + 4 * k, &p.to_le_bytes());
    }
    put(
        offset::VOX_OFFSET,
        &(DEFAULT_VOX_OFFSET as f32).to_le_bytes(),
    );
    put(offset::SCL_SLOPE, &1.0f32.to_le_bytes());
    put(offset::SCL_INTER, &0.0f32.to_le_bytes());
    // millimetres
    put(offset::XYZT_UNITS, &[2u8]);
    put(offset::MAGIC, b"n+1\0");

    for (i, &x) in v.data().iter().enumerate() {
        put(DEFAULT_VOX_OFFSET + 4 * i, &(x as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn write_nifti(v: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    super::io::write_files_atomic(&[(path.to_path_buf(), encode(v)?)])
}
