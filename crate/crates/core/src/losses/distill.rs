use super::{add_tv_grad, sign, tv_plane};
use crate::error::{config_err, shape_err, Result};
use crate::tensor::{resize_bilinear, source_taps, Tensor};

/// Pyramid depth of the gradient-matching term.
pub const DEFAULT_GRADIENT_SCALES: usize = 4;

/// Weights of the distillation loss. The gradient weight of prediction `s`
/// is `alpha_s0 / 2^s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillConfig {
    pub alpha_l: f64,
    pub alpha_s0: f64,
    pub gradient_scales: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            alpha_l: 1.0,
            alpha_s0: 0.5,
            gradient_scales: DEFAULT_GRADIENT_SCALES,
        }
    }
}

impl DistillConfig {
    pub fn alpha_s(&self, s: usize) -> f64 {
        self.alpha_s0 / 2f64.powi(s.min(1000) as i32)
    }
}

fn check_pyramid(pred: &Tensor, proxy: &Tensor, scales: usize) -> Result<()> {
    pred.expect_same_dims(proxy)?;
    if scales == 0 {
        return Err(config_err("gradient loss needs at least one scale"));
    }
    let f = 1usize.checked_shl(scales as u32 - 1).unwrap_or(0);
    let d = pred.dims();
    if f == 0 || d.h % f != 0 || d.w % f != 0 {
        return Err(config_err(format!(
            "{}x{} is not divisible by 2^{} for {scales} gradient scales",
            d.h,
            d.w,
            scales - 1
        )));
    }
    Ok(())
}

/// Average pooling of one plane with an `f x f` window and stride `f`.
fn avg_pool(r: &[f64], h: usize, w: usize, f: usize) -> Vec<f64> {
    if f == 1 {
        return r.to_vec();
    }
    let (ph, pw) = (h / f, w / f);
    let mut out = vec![0.0; ph * pw];
    for y in 0..h {
        for x in 0..w {
            out[(y / f) * pw + x / f] += r[y * w + x];
        }
    }
    let area = (f * f) as f64;
    out.iter_mut().for_each(|v| *v /= area);
    out
}

fn residual(pred: &Tensor, proxy: &Tensor) -> Vec<f64> {
    pred.data().iter().zip(proxy.data()).map(|(&a, &b)| a as f64 - b as f64).collect()
}

/// Multi-scale gradient matching: the sum over `k < scales` of
/// `mean(|δx R_k| + |δy R_k|)`, where `R_k` is `pred - proxy` average-pooled
/// by `2^k`.
pub fn gradient_loss(pred: &Tensor, proxy: &Tensor, scales: usize) -> Result<f64> {
    check_pyramid(pred, proxy, scales)?;
    let d = pred.dims();
    let r = residual(pred, proxy);
    let mut total = 0.0f64;
    for k in 0..scales {
        let f = 1 << k;
        let (ph, pw) = (d.h / f, d.w / f);
        let count = (d.n * d.c * ph * pw) as f64;
        for plane in r.chunks_exact(d.plane()) {
            total += tv_plane(&avg_pool(plane, d.h, d.w, f), ph, pw) / count;
        }
    }
    Ok(total)
}

fn gradient_loss_grad_f64(pred: &Tensor, proxy: &Tensor, scales: usize) -> Result<Vec<f64>> {
    check_pyramid(pred, proxy, scales)?;
    let d = pred.dims();
    let r = residual(pred, proxy);
    let mut grad = vec![0.0f64; r.len()];
    for k in 0..scales {
        let f = 1usize << k;
        let (ph, pw) = (d.h / f, d.w / f);
        let count = (d.n * d.c * ph * pw) as f64;
        let spread = 1.0 / (f * f) as f64;
        for (plane, g) in r.chunks_exact(d.plane()).zip(grad.chunks_exact_mut(d.plane())) {
            let pooled = avg_pool(plane, d.h, d.w, f);
            let mut gk = vec![0.0; pooled.len()];
            add_tv_grad(&pooled, ph, pw, 1.0 / count, &mut gk);
            for (i, v) in g.iter_mut().enumerate() {
                *v += gk[(i / d.w / f) * pw + (i % d.w) / f] * spread;
            }
        }
    }
    Ok(grad)
}

/// Gradient of [`gradient_loss`] with respect to `pred`; the gradient with
/// respect to `proxy` is its negation.
pub fn gradient_loss_grad(pred: &Tensor, proxy: &Tensor, scales: usize) -> Result<Tensor> {
    let g = gradient_loss_grad_f64(pred, proxy, scales)?;
    Tensor::from_vec(pred.dims(), g.into_iter().map(|v| v as f32).collect())
}

/// Adjoint of [`resize_bilinear`]: spreads `grad` (at the resized
/// resolution) back onto an `(h, w)` source grid.
fn resize_adjoint(grad: &Tensor, h: usize, w: usize) -> Tensor {
    let d = grad.dims();
    if (d.h, d.w) == (h, w) {
        return grad.clone();
    }
    let xs: Vec<_> = (0..d.w).map(|x| source_taps(x, w, d.w)).collect();
    let ys: Vec<_> = (0..d.h).map(|y| source_taps(y, h, d.h)).collect();
    let mut out = Tensor::zeros(d.with_spatial(h, w));
    for n in 0..d.n {
        for c in 0..d.c {
            let g = grad.plane(n, c);
            let dst = out.plane_mut(n, c);
            for (oy, &(y0, y1, ty)) in ys.iter().enumerate() {
                for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
                    let v = g[oy * d.w + ox];
                    dst[y0 * w + x0] += v * (1.0 - ty) * (1.0 - tx);
                    dst[y0 * w + x1] += v * (1.0 - ty) * tx;
                    dst[y1 * w + x0] += v * ty * (1.0 - tx);
                    dst[y1 * w + x1] += v * ty * tx;
                }
            }
        }
    }
    out
}

fn upsampled(preds: &[Tensor], proxy: &Tensor) -> Result<Vec<Tensor>> {
    if preds.is_empty() {
        return Err(config_err("distillation needs at least one prediction"));
    }
    let pd = proxy.dims();
    preds
        .iter()
        .map(|p| {
            let d = p.dims();
            if (d.n, d.c) != (pd.n, pd.c) {
                return Err(shape_err(format!("prediction {d:?} does not match proxy {pd:?}")));
            }
            resize_bilinear(p, pd.h, pd.w)
        })
        .collect()
}

/// Unweighted `(mean |U_s - proxy|, gradient_loss(U_s, proxy))` for every
/// prediction `s`, where `U_s` is the prediction resized to the proxy.
pub fn distill_loss_terms(preds: &[Tensor], proxy: &Tensor, config: &DistillConfig) -> Result<Vec<(f64, f64)>> {
    upsampled(preds, proxy)?
        .iter()
        .map(|u| {
            let l1 = u.data().iter().zip(proxy.data()).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum::<f64>()
                / u.data().len() as f64;
            Ok((l1, gradient_loss(u, proxy, config.gradient_scales)?))
        })
        .collect()
}

/// `Σ_s alpha_l * mean|U_s - proxy| + alpha_s(s) * gradient_loss(U_s, proxy)`.
pub fn distill_loss(preds: &[Tensor], proxy: &Tensor, config: &DistillConfig) -> Result<f64> {
    let terms = distill_loss_terms(preds, proxy, config)?;
    Ok(terms
        .iter()
        .enumerate()
        .map(|(s, &(l1, g))| config.alpha_l * l1 + config.alpha_s(s) * g)
        .sum())
}

/// Gradient of [`distill_loss`] with respect to each prediction, at the
/// prediction's own resolution.
pub fn distill_loss_grad(preds: &[Tensor], proxy: &Tensor, config: &DistillConfig) -> Result<Vec<Tensor>> {
    let ups = upsampled(preds, proxy)?;
    ups.iter()
        .zip(preds)
        .enumerate()
        .map(|(s, (u, p))| {
            let l1_weight = config.alpha_l / u.data().len() as f64;
            let g = gradient_loss_grad_f64(u, proxy, config.gradient_scales)?;
            let full: Vec<f32> = g
                .iter()
                .zip(u.data().iter().zip(proxy.data()))
                .map(|(&gv, (&a, &b))| (config.alpha_s(s) * gv + l1_weight * sign(a - b) as f64) as f32)
                .collect();
            let d = p.dims();
            Ok(resize_adjoint(&Tensor::from_vec(u.dims(), full)?, d.h, d.w))
        })
        .collect()
}
