use crate::error::{config_err, shape_err, Result};
use crate::tensor::{Dims, Tensor};

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Weight of the SSIM term in the photometric error.
pub const DEFAULT_ALPHA: f32 = 0.85;

/// Border handling of the 3x3 window: reflect without repeating the edge.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    (if i < 0 {
        -i
    } else if i >= n {
        2 * n - 2 - i
    } else {
        i
    }) as usize
}

/// The 9 plane offsets of the reflected 3x3 window around `(y, x)`.
#[inline]
fn window(y: usize, x: usize, h: usize, w: usize) -> [usize; 9] {
    std::array::from_fn(|k| {
        let (dy, dx) = (k as isize / 3 - 1, k as isize % 3 - 1);
        reflect(y as isize + dy, h) * w + reflect(x as isize + dx, w)
    })
}

/// Local 3x3 statistics of one pixel.
#[derive(Debug, Clone, Copy)]
pub struct SsimStats {
    pub mu_a: f64,
    pub mu_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov: f64,
}

impl SsimStats {
    fn gather(a: &[f32], b: &[f32], win: &[usize; 9]) -> Self {
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &i in win {
            let (x, y) = (a[i] as f64, b[i] as f64);
            sa += x;
            sb += y;
            saa += x * x;
            sbb += y * y;
            sab += x * y;
        }
        let (mu_a, mu_b) = (sa / 9.0, sb / 9.0);
        Self {
            mu_a,
            mu_b,
            var_a: saa / 9.0 - mu_a * mu_a,
            var_b: sbb / 9.0 - mu_b * mu_b,
            cov: sab / 9.0 - mu_a * mu_b,
        }
    }

    fn parts(&self) -> (f64, f64, f64, f64) {
        (
            2.0 * self.mu_a * self.mu_b + SSIM_C1,
            2.0 * self.cov + SSIM_C2,
            self.mu_a * self.mu_a + self.mu_b * self.mu_b + SSIM_C1,
            self.var_a + self.var_b + SSIM_C2,
        )
    }

    pub fn ssim(&self) -> f64 {
        let (n1, n2, d1, d2) = self.parts();
        (n1 * n2) / (d1 * d2)
    }

    /// Partial derivatives of SSIM with respect to `(mu_b, var_b, cov)`.
    fn partials_b(&self) -> (f64, f64, f64) {
        let (n1, n2, d1, d2) = self.parts();
        let (num, den) = (n1 * n2, d1 * d2);
        let quotient = |d_num: f64, d_den: f64| (d_num * den - num * d_den) / (den * den);
        (
            quotient(2.0 * self.mu_a * n2, 2.0 * self.mu_b * d2),
            quotient(0.0, d1),
            quotient(2.0 * n1, 0.0),
        )
    }
}

fn check_pair(a: &Tensor, b: &Tensor) -> Result<Dims> {
    a.expect_same_dims(b)?;
    let d = a.dims();
    if d.h < 2 || d.w < 2 {
        return Err(shape_err(format!("SSIM needs at least 2x2 pixels, got {d:?}")));
    }
    Ok(d)
}

/// Per-pixel, per-channel SSIM over reflected 3x3 windows.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let d = check_pair(a, b)?;
    let mut out = Tensor::zeros(d);
    for n in 0..d.n {
        for c in 0..d.c {
            let (pa, pb) = (a.plane(n, c), b.plane(n, c));
            let dst = out.plane_mut(n, c);
            for y in 0..d.h {
                for x in 0..d.w {
                    let win = window(y, x, d.h, d.w);
                    dst[y * d.w + x] = SsimStats::gather(pa, pb, &win).ssim() as f32;
                }
            }
        }
    }
    Ok(out)
}

/// Per-pixel error in f64, laid out `(n, h, w)`.
fn photometric_map(target: &Tensor, reconstructed: &Tensor, alpha: f32) -> Result<(Dims, Vec<f64>)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(config_err(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let d = check_pair(target, reconstructed)?;
    let alpha = alpha as f64;
    let inv_c = 1.0 / d.c as f64;
    let mut out = vec![0.0f64; d.n * d.plane()];
    for n in 0..d.n {
        let dst = &mut out[n * d.plane()..(n + 1) * d.plane()];
        for c in 0..d.c {
            let (pa, pb) = (target.plane(n, c), reconstructed.plane(n, c));
            for y in 0..d.h {
                for x in 0..d.w {
                    let i = y * d.w + x;
                    let s = SsimStats::gather(pa, pb, &window(y, x, d.h, d.w)).ssim();
                    let l1 = (pa[i] as f64 - pb[i] as f64).abs();
                    dst[i] += (alpha * (1.0 - s) / 2.0 + (1.0 - alpha) * l1) * inv_c;
                }
            }
        }
    }
    // SSIM can exceed 1 by rounding only.
    out.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok((d, out))
}

/// `alpha * (1 - SSIM) / 2 + (1 - alpha) * |I - Î|`, both terms averaged
/// over channels. Returns an `(n, 1, h, w)` map.
pub fn photometric_error(target: &Tensor, reconstructed: &Tensor, alpha: f32) -> Result<Tensor> {
    let (d, map) = photometric_map(target, reconstructed, alpha)?;
    Tensor::from_vec(d.with_channels(1), map.into_iter().map(|v| v as f32).collect())
}

/// Mean of [`photometric_error`] over all pixels, accumulated in f64.
pub fn photometric_mean(target: &Tensor, reconstructed: &Tensor, alpha: f32) -> Result<f64> {
    let (_, map) = photometric_map(target, reconstructed, alpha)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// Gradient of [`photometric_mean`] with respect to `reconstructed`.
pub fn photometric_mean_grad(target: &Tensor, reconstructed: &Tensor, alpha: f32) -> Result<Tensor> {
    let d = check_pair(target, reconstructed)?;
    let pixels = (d.n * d.h * d.w) as f64;
    let per_term = 1.0 / (pixels * d.c as f64);
    let mut grad = Tensor::zeros(d);
    for n in 0..d.n {
        for c in 0..d.c {
            let (pa, pb) = (target.plane(n, c), reconstructed.plane(n, c));
            let mut g = vec![0.0f64; d.plane()];
            for y in 0..d.h {
                for x in 0..d.w {
                    let win = window(y, x, d.h, d.w);
                    let st = SsimStats::gather(pa, pb, &win);
                    let (g_mu, g_var, g_cov) = st.partials_b();
                    // d loss / d SSIM for this pixel and channel.
                    let outer = -(alpha as f64) / 2.0 * per_term;
                    for &q in &win {
                        let (aq, bq) = (pa[q] as f64, pb[q] as f64);
                        let ds = g_mu / 9.0 + g_var * 2.0 / 9.0 * (bq - st.mu_b) + g_cov / 9.0 * (aq - st.mu_a);
                        g[q] += outer * ds;
                    }
                    let i = y * d.w + x;
                    g[i] += (1.0 - alpha as f64) * per_term * super::sign(pb[i] - pa[i]) as f64;
                }
            }
            for (dst, v) in grad.plane_mut(n, c).iter_mut().zip(g) {
                *dst = v as f32;
            }
        }
    }
    Ok(grad)
}

/// Elementwise minimum over the warped errors, and the automask: 1 where that
/// minimum is strictly below the minimum of the unwarped (identity) errors.
pub fn per_pixel_min_with_automask(pe_warped: &[Tensor], pe_identity: &[Tensor]) -> Result<(Tensor, Tensor)> {
    let (first, rest) = pe_warped
        .split_first()
        .ok_or_else(|| config_err("per-pixel minimum needs at least one warped error map"))?;
    if pe_identity.is_empty() {
        return Err(config_err("automask needs at least one identity error map"));
    }
    let elementwise_min = |maps: &[Tensor], init: &Tensor| -> Result<Tensor> {
        maps.iter().try_fold(init.clone(), |acc, m| acc.zip_map(m, f32::min))
    };
    let pe_min = elementwise_min(rest, first)?;
    let id_min = elementwise_min(&pe_identity[1..], &pe_identity[0])?;
    let mask = pe_min.zip_map(&id_min, |w, i| if w < i { 1.0 } else { 0.0 })?;
    Ok((pe_min, mask))
}
