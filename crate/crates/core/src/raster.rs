//! 8-bit RGB images as exchanged with the outside world.

use crate::error::{shape_err, Result};
use crate::tensor::{Dims, Tensor};

/// Interleaved 8-bit RGB, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(shape_err(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Planar `(1, 3, h, w)` tensor with values scaled to `[0, 1]`.
    pub fn to_tensor(&self) -> Result<Tensor> {
        if self.is_empty() {
            return Err(shape_err("image is empty"));
        }
        let (w, h) = (self.width, self.height);
        Ok(Tensor::from_fn(Dims::new(1, 3, h, w), |_, c, y, x| {
            self.data[(y * w + x) * 3 + c] as f32 / 255.0
        }))
    }

    /// Inverse of [`to_tensor`](Self::to_tensor): rounds `v * 255` and clamps.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let d = t.dims();
        if d.n != 1 || d.c != 3 {
            return Err(shape_err(format!("expected a (1, 3, h, w) tensor, got {d:?}")));
        }
        Ok(Self::from_fn(d.w, d.h, |x, y| {
            std::array::from_fn(|c| (t.at(0, c, y, x) * 255.0).round().clamp(0.0, 255.0) as u8)
        }))
    }
}
