use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::MaskFrame;
use crate::error::{Error, Result};

/// Writes a mask as single-channel PNG, 8-bit when every label fits.
pub fn write_mask_png(path: &Path, mask: &MaskFrame) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let wide = mask.labels.iter().any(|&l| l > 255);
    let mut encoder = png::Encoder::new(BufWriter::new(file), mask.width as u32, mask.height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(if wide { png::BitDepth::Sixteen } else { png::BitDepth::Eight });
    let data: Vec<u8> = if wide {
        mask.labels.iter().flat_map(|l| l.to_be_bytes()).collect()
    } else {
        mask.labels.iter().map(|&l| l as u8).collect()
    };
    let png_err = |e: png::EncodingError| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(&data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

pub fn read_mask_png(path: &Path, frame_index: usize) -> Result<MaskFrame> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::CorruptHeader {
        path: path.to_path_buf(),
        reason,
    };
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| corrupt(e.to_string()))?;
    let size = reader.output_buffer_size().ok_or_else(|| corrupt("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| corrupt(e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(corrupt(format!("expected single-channel PNG, found {:?}", info.color_type)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let labels: Vec<u16> = match info.bit_depth {
        png::BitDepth::Eight => (0..h).flat_map(|y| buf[y * info.line_size..y * info.line_size + w].iter().map(|&b| b as u16)).collect(),
        png::BitDepth::Sixteen => (0..h)
            .flat_map(|y| {
                let row = &buf[y * info.line_size..y * info.line_size + 2 * w];
                row.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]))
            })
            .collect(),
        other => return Err(corrupt(format!("unsupported bit depth {other:?}"))),
    };
    Ok(MaskFrame::new(frame_index, w, h, labels))
}
