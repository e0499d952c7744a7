//! Single-channel Portable FloatMap (`Pf`) rasters.
//!
//! Rows are stored bottom-to-top. A negative scale marks little-endian
//! samples; this writer always emits `-1.0`.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major (top-to-bottom) float raster.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

pub fn encode(raster: &FloatRaster) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", raster.width, raster.height).into_bytes();
    out.reserve(raster.data.len() * 4);
    for row in raster.data.chunks(raster.width).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<FloatRaster> {
    let corrupt = |reason: &str| Error::CorruptHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    // Header: three whitespace-separated fields, then exactly one whitespace byte.
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            break;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| corrupt("non-ascii header"))?);
    }
    if fields.len() < 4 {
        return Err(corrupt("truncated header"));
    }
    match fields[0] {
        "Pf" => {}
        "PF" => return Err(corrupt("three-channel PFM is not a depth raster")),
        other => return Err(corrupt(&format!("bad magic `{other}`"))),
    }
    let width: usize = fields[1].parse().map_err(|_| corrupt("bad width"))?;
    let height: usize = fields[2].parse().map_err(|_| corrupt("bad height"))?;
    let scale: f64 = fields[3].parse().map_err(|_| corrupt("bad scale"))?;
    if width == 0 || height == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(corrupt("zero size or scale"));
    }
    pos += 1;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() != width * height * 4 {
        return Err(Error::InconsistentDimensions {
            path: path.to_path_buf(),
            reason: format!("{}x{} raster needs {} bytes, found {}", width, height, width * height * 4, payload.len()),
        });
    }
    let little = scale < 0.0;
    let mut data = vec![0f32; width * height];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (file_row, col) = (i / width, i % width);
        data[(height - 1 - file_row) * width + col] = v;
    }
    Ok(FloatRaster { width, height, data })
}

pub fn write(path: &Path, raster: &FloatRaster) -> Result<()> {
    std::fs::write(path, encode(raster)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<FloatRaster> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_stored_bottom_up() {
        let r = FloatRaster { width: 2, height: 2, data: vec![1.0, 2.0, 3.0, 4.0] };
        let bytes = encode(&r);
        let header = b"Pf\n2 2\n-1.0\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..header.len() + 4], &3.0f32.to_le_bytes());
        assert_eq!(decode(&bytes, Path::new("m")).unwrap(), r);
    }

    #[test]
    fn big_endian_input() {
        let mut bytes = b"Pf 1 1 1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(decode(&bytes, Path::new("m")).unwrap().data, vec![2.5]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(decode(b"P6\n1 1\n-1.0\n0000", Path::new("m")), Err(Error::CorruptHeader { .. })));
        assert!(matches!(decode(b"Pf\n2", Path::new("m")), Err(Error::CorruptHeader { .. })));
        assert!(matches!(decode(b"Pf\n2 2\n-1.0\n0000", Path::new("m")), Err(Error::InconsistentDimensions { .. })));
    }
}
