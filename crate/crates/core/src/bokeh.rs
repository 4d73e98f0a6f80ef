//! Depth-aware synthetic blur: pixels whose relative inverse depth exceeds a
//! threshold are replaced by a Gaussian-blurred copy of the image.

use crate::error::{config_err, Result};
use crate::graph::DepthMap;
use crate::raster::RgbImage;
use crate::tensor::{gaussian_blur, Dims, Tensor};

pub const DEFAULT_TAU: f32 = 0.7;
pub const DEFAULT_KERNEL: usize = 25;
pub const DEFAULT_SIGMA: f32 = DEFAULT_KERNEL as f32 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BokehParams {
    pub tau: f32,
    pub kernel_size: usize,
    pub sigma: f32,
    /// Blur the pixels at or below `tau` instead of those above it.
    pub invert_selection: bool,
}

impl Default for BokehParams {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            kernel_size: DEFAULT_KERNEL,
            sigma: DEFAULT_SIGMA,
            invert_selection: false,
        }
    }
}

/// Gaussian blur of the whole image on raw byte values, rounded back to
/// bytes.
pub fn blur_rgb(image: &RgbImage, kernel_size: usize, sigma: f32) -> Result<RgbImage> {
    let (w, h) = (image.width(), image.height());
    if image.is_empty() {
        return Ok(image.clone());
    }
    let bytes = image.data();
    let planar = Tensor::from_fn(Dims::new(1, 3, h, w), |_, c, y, x| bytes[(y * w + x) * 3 + c] as f32);
    let blurred = gaussian_blur(&planar, kernel_size, sigma)?;
    Ok(RgbImage::from_fn(w, h, |x, y| {
        std::array::from_fn(|c| blurred.at(0, c, y, x).round().clamp(0.0, 255.0) as u8)
    }))
}

/// Which pixels get the blurred value.
pub fn blur_selection(inv_depth: &DepthMap, params: &BokehParams) -> Result<Vec<bool>> {
    if !(params.tau > 0.0 && params.tau < 1.0) {
        return Err(config_err(format!("tau must lie in (0, 1), got {}", params.tau)));
    }
    Ok(inv_depth.values().iter().map(|&d| (d > params.tau) != params.invert_selection).collect())
}

/// Per-pixel choice between the image and its blurred copy. The depth map is
/// resized bilinearly when its dims differ from the image.
pub fn apply_bokeh(image: &RgbImage, inv_depth: &DepthMap, params: &BokehParams) -> Result<RgbImage> {
    let (w, h) = (image.width(), image.height());
    let resized;
    let depth = if (inv_depth.width(), inv_depth.height()) == (w, h) {
        inv_depth
    } else {
        resized = inv_depth.resized(w, h)?;
        &resized
    };
    let select = blur_selection(depth, params)?;
    if !select.contains(&true) {
        return Ok(image.clone());
    }
    let blurred = blur_rgb(image, params.kernel_size, params.sigma)?;
    let mut out = image.data().to_vec();
    for (i, _) in select.iter().enumerate().filter(|(_, &s)| s) {
        out[i * 3..i * 3 + 3].copy_from_slice(&blurred.data()[i * 3..i * 3 + 3]);
    }
    RgbImage::new(w, h, out)
}
