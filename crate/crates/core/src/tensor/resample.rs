use super::Tensor;
use crate::error::{shape_err, Result};

/// `a + (b - a) * t`. Exact when `a == b`, so constants survive resampling.
#[inline]
pub(crate) fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + (b - a) * t
}

/// Half-pixel-center source taps for destination index `dst` when resampling
/// `src_len` samples to `dst_len`: `(i0, i1, t)` with the value
/// `lerp(s[i0], s[i1], t)`. Coordinates are clamped to the borders.
#[inline]
pub(crate) fn source_taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f32) {
    let scale = src_len as f32 / dst_len as f32;
    let x = ((dst as f32 + 0.5) * scale - 0.5).max(0.0);
    let i0 = (x.floor() as usize).min(src_len - 1);
    let i1 = (i0 + 1).min(src_len - 1);
    let t = if i0 == i1 { 0.0 } else { x - i0 as f32 };
    (i0, i1, t)
}

/// Bilinear resize of every plane to `out_h x out_w`.
pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let d = input.dims();
    if out_h == 0 || out_w == 0 {
        return Err(shape_err(format!("cannot resize {d:?} to {out_h}x{out_w}")));
    }
    if (out_h, out_w) == (d.h, d.w) {
        return Ok(input.clone());
    }
    let xs: Vec<_> = (0..out_w).map(|x| source_taps(x, d.w, out_w)).collect();
    let ys: Vec<_> = (0..out_h).map(|y| source_taps(y, d.h, out_h)).collect();
    let out_dims = d.with_spatial(out_h, out_w);
    let mut data = Vec::with_capacity(out_dims.len());
    for n in 0..d.n {
        for c in 0..d.c {
            let plane = input.plane(n, c);
            for &(y0, y1, ty) in &ys {
                let (r0, r1) = (&plane[y0 * d.w..], &plane[y1 * d.w..]);
                for &(x0, x1, tx) in &xs {
                    let top = lerp(r0[x0], r0[x1], tx);
                    let bottom = lerp(r1[x0], r1[x1], tx);
                    data.push(lerp(top, bottom, ty));
                }
            }
        }
    }
    Tensor::from_vec(out_dims, data)
}

/// Integer-factor bilinear upsampling; factor 1 returns the input unchanged.
pub fn upsample_bilinear(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(crate::error::config_err("upsampling factor must be >= 1"));
    }
    let d = input.dims();
    resize_bilinear(input, d.h * factor, d.w * factor)
}

/// Per-pixel continuous source coordinates `(x, y)` for each batch item.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub coords: Vec<[f32; 2]>,
}

impl SamplingGrid {
    pub fn identity(n: usize, h: usize, w: usize) -> Self {
        Self::from_fn(n, h, w, |_, y, x| [x as f32, y as f32])
    }

    pub fn from_fn(n: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize) -> [f32; 2]) -> Self {
        let mut coords = Vec::with_capacity(n * h * w);
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    coords.push(f(b, y, x));
                }
            }
        }
        Self { n, h, w, coords }
    }

    #[inline]
    pub fn at(&self, n: usize, y: usize, x: usize) -> [f32; 2] {
        self.coords[(n * self.h + y) * self.w + x]
    }
}

/// Border-clamped bilinear lookup of `image` at the coordinates in `grid`.
pub fn bilinear_sample(image: &Tensor, grid: &SamplingGrid) -> Result<Tensor> {
    let d = image.dims();
    if (grid.n, grid.h, grid.w) != (d.n, d.h, d.w) || grid.coords.len() != d.n * d.plane() {
        return Err(shape_err(format!(
            "grid {}x{}x{} does not match image {d:?}",
            grid.n, grid.h, grid.w
        )));
    }
    let mut out = Tensor::zeros(d);
    for n in 0..d.n {
        for y in 0..d.h {
            for x in 0..d.w {
                let taps = sample_taps(grid.at(n, y, x), d.w, d.h);
                for c in 0..d.c {
                    let v = taps.eval(image.plane(n, c), d.w);
                    out.set(n, c, y, x, v);
                }
            }
        }
    }
    Ok(out)
}

/// The four clamped corners and fractional offsets for one sample.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SampleTaps {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
    pub tx: f32,
    pub ty: f32,
}

impl SampleTaps {
    #[inline]
    pub fn eval(&self, plane: &[f32], w: usize) -> f32 {
        let top = lerp(plane[self.y0 * w + self.x0], plane[self.y0 * w + self.x1], self.tx);
        let bottom = lerp(plane[self.y1 * w + self.x0], plane[self.y1 * w + self.x1], self.tx);
        lerp(top, bottom, self.ty)
    }
}

#[inline]
pub(crate) fn sample_taps([x, y]: [f32; 2], w: usize, h: usize) -> SampleTaps {
    let (x0, x1, tx) = clamp_axis(x, w);
    let (y0, y1, ty) = clamp_axis(y, h);
    SampleTaps { x0, x1, y0, y1, tx, ty }
}

#[inline]
fn clamp_axis(v: f32, len: usize) -> (usize, usize, f32) {
    let max = (len - 1) as f32;
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, max) };
    let i0 = v.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, v - i0 as f32)
}
