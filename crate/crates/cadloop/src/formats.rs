//! PNG images, cloud payloads, JSON lines and content hashes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Cursor, Write};
use std::path::Path;

use cadloop_core::pointcloud::{DiscrepancyCloud, PcError};
use cadloop_core::view::{DepthImage, OverlayImage};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("PNG encoding failed: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("PNG decoding failed: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("unsupported PNG layout: {0}")]
    PngLayout(String),
    #[error(transparent)]
    Cloud(#[from] PcError),
    #[error("JSON error at line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An 8-bit image, `channels` interleaved per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub data: Vec<u8>,
}

pub fn encode_png(r: &Raster) -> Result<Vec<u8>, FormatError> {
    let color = match r.channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => return Err(FormatError::PngLayout(format!("{c} channels"))),
    };
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, r.width, r.height);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        let mut w = enc.write_header()?;
        w.write_image_data(&r.data)?;
    }
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<Raster, FormatError> {
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| FormatError::PngLayout("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(FormatError::PngLayout(format!(
            "bit depth {:?}",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        c => return Err(FormatError::PngLayout(format!("color type {c:?}"))),
    };
    buf.truncate(info.buffer_size());
    Ok(Raster {
        width: info.width,
        height: info.height,
        channels,
        data: buf,
    })
}

pub fn overlay_raster(o: &OverlayImage) -> Raster {
    Raster {
        width: o.width as u32,
        height: o.height as u32,
        channels: 3,
        data: o.to_rgb8(),
    }
}

/// Grayscale raster of a depth image with `round(v * 255)` quantization.
pub fn depth_raster(img: &DepthImage) -> Raster {
    let data = img
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    Raster {
        width: img.width as u32,
        height: img.height as u32,
        channels: 1,
        data,
    }
}

pub fn overlay_png(o: &OverlayImage) -> Result<Vec<u8>, FormatError> {
    encode_png(&overlay_raster(o))
}

pub fn cloud_to_json(cloud: &DiscrepancyCloud) -> String {
    serde_json::to_string_pretty(cloud).expect("clouds always serialize")
}

pub fn cloud_from_json(text: &str) -> Result<DiscrepancyCloud, FormatError> {
    serde_json::from_str(text).map_err(|source| FormatError::Json { line: 0, source })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes one JSON object per line and returns the count.
pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<usize, FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, item) in items.iter().enumerate() {
        serde_json::to_writer(&mut w, item).map_err(|source| FormatError::Json {
            line: i + 1,
            source,
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(items.len())
}

/// Reads JSON lines, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| FormatError::Json {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| FormatError::Json { line: 0, source })?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { line: 0, source })
}
