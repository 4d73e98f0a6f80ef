use super::Tensor;
use crate::error::{config_err, shape_err, Result};

/// Forward differences along x and y with a zero last column / row. Works for
/// any spatial size; a size-1 axis yields all zeros.
pub(crate) fn forward_diffs(input: &Tensor) -> (Tensor, Tensor) {
    let d = input.dims();
    let mut dx = Tensor::zeros(d);
    let mut dy = Tensor::zeros(d);
    for n in 0..d.n {
        for c in 0..d.c {
            let src = input.plane(n, c);
            let gx = dx.plane_mut(n, c);
            for y in 0..d.h {
                for x in 0..d.w - 1 {
                    gx[y * d.w + x] = src[y * d.w + x + 1] - src[y * d.w + x];
                }
            }
            let gy = dy.plane_mut(n, c);
            for y in 0..d.h - 1 {
                for x in 0..d.w {
                    gy[y * d.w + x] = src[(y + 1) * d.w + x] - src[y * d.w + x];
                }
            }
        }
    }
    (dx, dy)
}

/// Forward-difference image gradients `(dx, dy)`, same dims as the input.
pub fn image_gradients(input: &Tensor) -> Result<(Tensor, Tensor)> {
    let d = input.dims();
    if d.h < 2 || d.w < 2 {
        return Err(shape_err(format!(
            "image gradients need at least 2x2 pixels, got {d:?}"
        )));
    }
    Ok(forward_diffs(input))
}

/// Sampled Gaussian of odd length `size`, normalized to sum to one.
pub fn gaussian_kernel_1d(size: usize, sigma: f32) -> Result<Vec<f32>> {
    if size % 2 == 0 {
        return Err(config_err(format!("gaussian kernel size must be odd, got {size}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(config_err(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let r = (size / 2) as i64;
    let denom = 2.0 * (sigma as f64).powi(2);
    let raw: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / denom).exp()).collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| (v / sum) as f32).collect())
}

/// Separable Gaussian blur with edge replication at the borders.
pub fn gaussian_blur(image: &Tensor, kernel_size: usize, sigma: f32) -> Result<Tensor> {
    let kernel = gaussian_kernel_1d(kernel_size, sigma)?;
    if kernel_size == 1 {
        return Ok(image.clone());
    }
    let d = image.dims();
    let r = (kernel_size / 2) as isize;
    let mut out = Tensor::zeros(d);
    let mut tmp = vec![0.0f32; d.plane()];
    let clamp = |i: isize, len: usize| i.clamp(0, len as isize - 1) as usize;
    for n in 0..d.n {
        for c in 0..d.c {
            let src = image.plane(n, c);
            for y in 0..d.h {
                let row = &src[y * d.w..(y + 1) * d.w];
                for x in 0..d.w {
                    let mut acc = 0.0f32;
                    for (k, &wk) in kernel.iter().enumerate() {
                        acc += wk * row[clamp(x as isize + k as isize - r, d.w)];
                    }
                    tmp[y * d.w + x] = acc;
                }
            }
            let dst = out.plane_mut(n, c);
            for y in 0..d.h {
                for x in 0..d.w {
                    let mut acc = 0.0f32;
                    for (k, &wk) in kernel.iter().enumerate() {
                        acc += wk * tmp[clamp(y as isize + k as isize - r, d.h) * d.w + x];
                    }
                    dst[y * d.w + x] = acc;
                }
            }
        }
    }
    Ok(out)
}
