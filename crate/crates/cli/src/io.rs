//! File formats: RGB input images, 16-bit depth PNGs, LDRF raw depth and
//! ground-truth depth PNGs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use depthedge_core::{DepthMap, RgbImage};
use image::{ImageBuffer, ImageReader, Luma};

pub const LDRF_MAGIC: &[u8; 4] = b"LDRF";

/// Decodes a PNG or binary PPM into RGB8.
pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = ImageReader::open(path)
        .with_context(|| format!("cannot open {}", path.display()))?
        .with_guessed_format()
        .with_context(|| format!("cannot read {}", path.display()))?
        .decode()
        .with_context(|| format!("cannot decode {}", path.display()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Ok(RgbImage::new(w as usize, h as usize, img.into_raw())?)
}

pub fn write_rgb_png(path: &Path, image: &RgbImage) -> Result<()> {
    image::save_buffer_with_format(
        path,
        image.data(),
        image.width() as u32,
        image.height() as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .with_context(|| format!("cannot write {}", path.display()))
}

/// `round(d * 65535)` clamped to `u16`.
pub fn quantize(d: f32) -> u16 {
    (d as f64 * 65535.0).round().clamp(0.0, 65535.0) as u16
}

/// 16-bit grayscale PNG storing `round(d * 65535)`.
pub fn write_depth_png(path: &Path, depth: &DepthMap) -> Result<()> {
    let data: Vec<u16> = depth.values().iter().map(|&d| quantize(d)).collect();
    let buf: ImageBuffer<Luma<u16>, _> = ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, data)
        .context("depth buffer size mismatch")?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Raw 16-bit samples of a single-channel PNG, with its dims.
pub fn read_gray16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let img = image::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let buf = img.to_luma16();
    let (w, h) = buf.dimensions();
    Ok((w as usize, h as usize, buf.into_raw()))
}

/// Reads a depth PNG written by [`write_depth_png`].
pub fn read_depth_png(path: &Path) -> Result<DepthMap> {
    let (w, h, raw) = read_gray16(path)?;
    Ok(DepthMap::new(w, h, raw.iter().map(|&v| v as f32 / 65535.0).collect())?)
}

/// `LDRF` · u32 width · u32 height · f32 values, little-endian, row-major.
pub fn write_ldrf(path: &Path, depth: &DepthMap) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    out.write_all(LDRF_MAGIC)?;
    out.write_all(&(depth.width() as u32).to_le_bytes())?;
    out.write_all(&(depth.height() as u32).to_le_bytes())?;
    for v in depth.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush().with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_ldrf(path: &Path) -> Result<DepthMap> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes)?;
    parse_ldrf(&bytes).with_context(|| format!("{} is not a valid LDRF file", path.display()))
}

pub fn parse_ldrf(bytes: &[u8]) -> Result<DepthMap> {
    ensure!(bytes.len() >= 12 && &bytes[..4] == LDRF_MAGIC, "missing LDRF header");
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h) = (word(4), word(8));
    let expected = w.checked_mul(h).and_then(|n| n.checked_mul(4)).and_then(|n| n.checked_add(12));
    if expected != Some(bytes.len()) {
        bail!("{w}x{h} map needs {expected:?} bytes, file has {}", bytes.len());
    }
    let values = bytes[12..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(DepthMap::new(w, h, values)?)
}

/// A prediction file: `.ldrf` raw values or a 16-bit depth PNG.
pub fn read_prediction(path: &Path) -> Result<DepthMap> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ldrf") => read_ldrf(path),
        _ => read_depth_png(path),
    }
}

/// Ground-truth depth: `value / scale`, zero marks invalid pixels.
pub fn read_ground_truth(path: &Path, scale: f64) -> Result<(usize, usize, Vec<f32>, Vec<bool>)> {
    let (w, h, raw) = read_gray16(path)?;
    let depth = raw.iter().map(|&v| (v as f64 / scale) as f32).collect();
    let valid = raw.iter().map(|&v| v > 0).collect();
    Ok((w, h, depth, valid))
}
