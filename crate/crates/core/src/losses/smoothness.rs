use super::sign;
use crate::error::{domain_err, shape_err, Result};
use crate::tensor::{forward_diffs, Dims, Tensor};

/// Edge weights `exp(-|δx I|)`, `exp(-|δy I|)` with channel-mean gradients.
fn edge_weights(image: &Tensor) -> (Tensor, Tensor) {
    let d = image.dims();
    let (dx, dy) = forward_diffs(image);
    let weight = |g: &Tensor| {
        Tensor::from_fn(d.with_channels(1), |n, _, y, x| {
            let m = (0..d.c).map(|c| g.at(n, c, y, x).abs()).sum::<f32>() / d.c as f32;
            (-m).exp()
        })
    };
    (weight(&dx), weight(&dy))
}

fn check(depth: &Tensor, image: &Tensor) -> Result<(Dims, Vec<f64>)> {
    let (dd, di) = (depth.dims(), image.dims());
    if dd.c != 1 || (dd.n, dd.h, dd.w) != (di.n, di.h, di.w) {
        return Err(shape_err(format!("depth {dd:?} needs one channel and the spatial dims of image {di:?}")));
    }
    let means = (0..dd.n)
        .map(|n| {
            let m = super::mean_f64(depth.plane(n, 0));
            if m > 0.0 && m.is_finite() {
                Ok(m)
            } else {
                Err(domain_err(format!("depth mean of item {n} is {m}; cannot normalize")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dd, means))
}

/// Edge-aware smoothness of the mean-normalized depth `D / mean(D)`,
/// averaged over all pixels.
pub fn smoothness_loss(depth: &Tensor, image: &Tensor) -> Result<f64> {
    let (d, means) = check(depth, image)?;
    let (wx, wy) = edge_weights(image);
    let mut total = 0.0f64;
    for n in 0..d.n {
        let inv = 1.0 / means[n];
        let dp = depth.plane(n, 0);
        let (px, py) = (wx.plane(n, 0), wy.plane(n, 0));
        for y in 0..d.h {
            for x in 0..d.w {
                let i = y * d.w + x;
                if x + 1 < d.w {
                    total += (dp[i + 1] as f64 - dp[i] as f64).abs() * inv * px[i] as f64;
                }
                if y + 1 < d.h {
                    total += (dp[i + d.w] as f64 - dp[i] as f64).abs() * inv * py[i] as f64;
                }
            }
        }
    }
    Ok(total / (d.n * d.plane()) as f64)
}

/// Gradient of [`smoothness_loss`] with respect to `depth`. The image is
/// treated as a constant.
pub fn smoothness_loss_grad(depth: &Tensor, image: &Tensor) -> Result<Tensor> {
    let (d, means) = check(depth, image)?;
    let (wx, wy) = edge_weights(image);
    let total = (d.n * d.plane()) as f64;
    let mut grad = Tensor::zeros(d);
    for n in 0..d.n {
        let m = means[n];
        let dp = depth.plane(n, 0);
        let (px, py) = (wx.plane(n, 0), wy.plane(n, 0));
        // Gradient with respect to the normalized depth.
        let mut g_star = vec![0.0f64; d.plane()];
        for y in 0..d.h {
            for x in 0..d.w {
                let i = y * d.w + x;
                if x + 1 < d.w {
                    let t = px[i] as f64 * sign(dp[i + 1] - dp[i]) as f64 / total;
                    g_star[i + 1] += t;
                    g_star[i] -= t;
                }
                if y + 1 < d.h {
                    let t = py[i] as f64 * sign(dp[i + d.w] - dp[i]) as f64 / total;
                    g_star[i + d.w] += t;
                    g_star[i] -= t;
                }
            }
        }
        let dot: f64 = g_star.iter().zip(dp).map(|(g, &v)| g * v as f64).sum();
        let through_mean = dot / (m * m * d.plane() as f64);
        for (dst, g) in grad.plane_mut(n, 0).iter_mut().zip(&g_star) {
            *dst = (g / m - through_mean) as f32;
        }
    }
    Ok(grad)
}
