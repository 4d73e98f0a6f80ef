//! Training signals for self-supervised and distilled depth networks,
//! evaluated as plain forward functions.
//!
//! Nothing here trains a network. Each scalar loss comes with a hand-derived
//! gradient (`*_grad`) so that the formulas can be verified against finite
//! differences.

mod distill;
mod geometry;
mod photometric;
mod smoothness;

pub use distill::{
    distill_loss, distill_loss_grad, distill_loss_terms, gradient_loss, gradient_loss_grad, DistillConfig,
    DEFAULT_GRADIENT_SCALES,
};
pub use geometry::{warp, warp_grid, CameraIntrinsics, RelativePose};
pub use photometric::{
    per_pixel_min_with_automask, photometric_error, photometric_mean, photometric_mean_grad, ssim, SsimStats, DEFAULT_ALPHA,
    SSIM_C1, SSIM_C2,
};
pub use smoothness::{smoothness_loss, smoothness_loss_grad};

/// Mean of a tensor's values accumulated in `f64`.
pub(crate) fn mean_f64(values: &[f32]) -> f64 {
    values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64
}

/// Derivative of `|x|`, taking 0 at the kink.
#[inline]
pub(crate) fn sign(x: f32) -> f32 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `Σ |δx r| + |δy r|` over one `h x w` plane, forward differences.
pub(crate) fn tv_plane(r: &[f64], h: usize, w: usize) -> f64 {
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                total += (r[i + 1] - r[i]).abs();
            }
            if y + 1 < h {
                total += (r[i + w] - r[i]).abs();
            }
        }
    }
    total
}

/// Accumulates `scale * d/dr tv_plane(r)` into `grad`.
pub(crate) fn add_tv_grad(r: &[f64], h: usize, w: usize, scale: f64, grad: &mut [f64]) {
    let sgn = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                let t = scale * sgn(r[i + 1] - r[i]);
                grad[i + 1] += t;
                grad[i] -= t;
            }
            if y + 1 < h {
                let t = scale * sgn(r[i + w] - r[i]);
                grad[i + w] += t;
                grad[i] -= t;
            }
        }
    }
}
