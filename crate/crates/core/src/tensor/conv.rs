use rayon::prelude::*;

use super::{Dims, Tensor};
use crate::error::{config_err, shape_err, Result};

/// Weights and geometry of a 2-D convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `(out_ch, in_ch, kh, kw)`.
    pub kernel: Tensor,
    pub bias: Vec<f32>,
    pub stride: usize,
    /// Symmetric zero padding applied to every spatial border.
    pub padding: usize,
}

impl ConvParams {
    pub fn new(kernel: Tensor, bias: Vec<f32>, stride: usize, padding: usize) -> Result<Self> {
        let k = kernel.dims();
        if bias.len() != k.n {
            return Err(shape_err(format!(
                "bias has {} entries but the kernel has {} output channels",
                bias.len(),
                k.n
            )));
        }
        if stride == 0 {
            return Err(config_err("stride must be positive"));
        }
        Ok(Self {
            kernel,
            bias,
            stride,
            padding,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.dims().n
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.dims().c
    }

    /// Output spatial size for an `h x w` input.
    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let k = self.kernel.dims();
        Ok((
            conv_output_len(h, k.h, self.stride, self.padding)?,
            conv_output_len(w, k.w, self.stride, self.padding)?,
        ))
    }
}

/// `floor((len + 2 * pad - k) / stride) + 1`; an empty output is a
/// configuration error.
pub(crate) fn conv_output_len(len: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = len + 2 * pad;
    if stride == 0 || padded < k {
        return Err(config_err(format!(
            "kernel {k} with padding {pad} and stride {stride} leaves no output for input size {len}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Zero-padded cross-correlation plus bias.
///
/// Each output value is accumulated in a fixed order: input channel, then
/// kernel row, then kernel column, with the bias added last. Blocks of output
/// channels are computed in parallel and vectorized across output columns,
/// neither of which changes that order, so results do not depend on the
/// thread count or the instruction set picked at runtime.
pub fn conv2d(input: &Tensor, params: &ConvParams) -> Result<Tensor> {
    let d = input.dims();
    let k = params.kernel.dims();
    if d.c != k.c {
        return Err(shape_err(format!(
            "input {d:?} has {} channels but kernel {k:?} expects {}",
            d.c, k.c
        )));
    }
    if params.bias.len() != k.n {
        return Err(shape_err(format!(
            "bias length {} does not match kernel {k:?}",
            params.bias.len()
        )));
    }
    let (out_h, out_w) = params.output_size(d.h, d.w)?;
    let (stride, pad) = (params.stride, params.padding);
    // The padded copy is wide enough for whole LANES-column blocks, so the
    // inner loops never need bounds checks.
    let padded_w = ((out_w.div_ceil(LANES) * LANES - 1) * stride + k.w).max(d.w + 2 * pad);
    let g = Geometry {
        in_ch: d.c,
        padded_h: d.h + 2 * pad,
        padded_w,
        out_h,
        out_w,
        kh: k.h,
        kw: k.w,
        stride,
    };
    let out_dims = Dims::new(d.n, k.n, out_h, out_w);
    let mut out = vec![0.0f32; out_dims.len()];
    let plane = out_h * out_w;
    let k_item = k.c * k.h * k.w;
    let kernel = params.kernel.data();
    let simd = Simd::detect();

    out.par_chunks_mut(k.n * plane).enumerate().for_each(|(n, item)| {
        let src = zero_pad(input, n, pad, g);
        item.par_chunks_mut(OC_BLOCK * plane)
            .enumerate()
            .for_each(|(blk, block)| {
                let oc0 = blk * OC_BLOCK;
                let nb = block.len() / plane;
                let weights = &kernel[oc0 * k_item..(oc0 + nb) * k_item];
                let bias = &params.bias[oc0..oc0 + nb];
                match nb {
                    4 => conv_block::<4>(simd, &src, weights, bias, g, block),
                    3 => conv_block::<3>(simd, &src, weights, bias, g, block),
                    2 => conv_block::<2>(simd, &src, weights, bias, g, block),
                    _ => conv_block::<1>(simd, &src, weights, bias, g, block),
                }
            });
    });

    Tensor::from_vec(out_dims, out)
}

/// Output channels computed together so that each input load feeds several
/// accumulators.
const OC_BLOCK: usize = 4;
/// Output columns processed per inner-loop step.
const LANES: usize = 16;

#[derive(Clone, Copy)]
struct Geometry {
    in_ch: usize,
    padded_h: usize,
    padded_w: usize,
    out_h: usize,
    out_w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
}

fn zero_pad(input: &Tensor, n: usize, pad: usize, g: Geometry) -> Vec<f32> {
    let d = input.dims();
    let pp = g.padded_h * g.padded_w;
    let mut out = vec![0.0f32; d.c * pp];
    for c in 0..d.c {
        let src = input.plane(n, c);
        for y in 0..d.h {
            let o = c * pp + (y + pad) * g.padded_w + pad;
            out[o..o + d.w].copy_from_slice(&src[y * d.w..(y + 1) * d.w]);
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Simd {
    Baseline,
    #[cfg(target_arch = "x86_64")]
    Avx,
}

impl Simd {
    fn detect() -> Self {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx") {
            return Simd::Avx;
        }
        Simd::Baseline
    }
}

fn conv_block<const B: usize>(simd: Simd, src: &[f32], weights: &[f32], bias: &[f32], g: Geometry, out: &mut [f32]) {
    match simd {
        Simd::Baseline => conv_block_impl::<B, false>(src, weights, bias, g, out),
        #[cfg(target_arch = "x86_64")]
        // SAFETY: `Simd::Avx` is only constructed after runtime detection.
        Simd::Avx => unsafe { conv_block_avx::<B>(src, weights, bias, g, out) },
    }
}

// AVX widens the vector registers; it does not fuse multiplies and adds, so
// rounding is identical to the baseline path.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn conv_block_avx<const B: usize>(src: &[f32], weights: &[f32], bias: &[f32], g: Geometry, out: &mut [f32]) {
    conv_block_impl::<B, true>(src, weights, bias, g, out)
}

#[inline(always)]
fn conv_block_impl<const B: usize, const AVX: bool>(
    src: &[f32],
    weights: &[f32],
    bias: &[f32],
    g: Geometry,
    out: &mut [f32],
) {
    let taps = g.kh * g.kw;
    let pp = g.padded_h * g.padded_w;
    let plane = g.out_h * g.out_w;
    // Repack as [ic][tap][b] so one tap's weights for the block are adjacent.
    let mut packed = vec![0.0f32; g.in_ch * taps * B];
    for b in 0..B {
        for i in 0..g.in_ch * taps {
            packed[i * B + b] = weights[b * g.in_ch * taps + i];
        }
    }
    let mut tail = [0.0f32; LANES * OC_BLOCK];

    for ic in 0..g.in_ch {
        let chan = &src[ic * pp..(ic + 1) * pp];
        let w = &packed[ic * taps * B..(ic + 1) * taps * B];
        for oy in 0..g.out_h {
            let row = oy * g.out_w;
            let mut ox = 0;
            while ox < g.out_w {
                let origin = oy * g.stride * g.padded_w + ox * g.stride;
                let valid = LANES.min(g.out_w - ox);
                if valid == LANES {
                    accumulate_block::<B, AVX>(out, plane, row + ox, chan, origin, w, g);
                } else {
                    for b in 0..B {
                        let o = b * plane + row + ox;
                        tail[b * LANES..b * LANES + valid].copy_from_slice(&out[o..o + valid]);
                    }
                    accumulate_block::<B, AVX>(&mut tail, LANES, 0, chan, origin, w, g);
                    for b in 0..B {
                        let o = b * plane + row + ox;
                        out[o..o + valid].copy_from_slice(&tail[b * LANES..b * LANES + valid]);
                    }
                }
                ox += LANES;
            }
        }
    }
    for b in 0..B {
        for v in &mut out[b * plane..(b + 1) * plane] {
            *v += bias[b];
        }
    }
}

/// Adds one input channel's contribution to `LANES` consecutive outputs of
/// each of the `B` planes in `dst` (planes `dst_plane` apart, starting at
/// `dst_off`). `origin` is the padded-input offset of the first output's
/// top-left tap.
#[inline(always)]
fn accumulate_block<const B: usize, const AVX: bool>(
    dst: &mut [f32],
    dst_plane: usize,
    dst_off: usize,
    chan: &[f32],
    origin: usize,
    w: &[f32],
    g: Geometry,
) {
    #[cfg(target_arch = "x86_64")]
    if AVX && g.stride == 1 {
        let last_tap = origin + (g.kh - 1) * g.padded_w + g.kw - 1 + LANES;
        assert!(last_tap <= chan.len() && (B - 1) * dst_plane + dst_off + LANES <= dst.len());
        assert!(w.len() >= g.kh * g.kw * B);
        // SAFETY: AVX is only requested when detected; the asserts above
        // bound every pointer the kernel touches.
        unsafe { avx::accumulate_stride1::<B>(dst, dst_plane, dst_off, chan, origin, w, g) };
        return;
    }
    let mut acc = [[0.0f32; LANES]; B];
    for b in 0..B {
        let o = b * dst_plane + dst_off;
        acc[b].copy_from_slice(&dst[o..o + LANES]);
    }
    for ky in 0..g.kh {
        for kx in 0..g.kw {
            let base = origin + ky * g.padded_w + kx;
            let mut v = [0.0f32; LANES];
            for (j, vj) in v.iter_mut().enumerate() {
                *vj = chan[base + j * g.stride];
            }
            let wt = &w[(ky * g.kw + kx) * B..(ky * g.kw + kx + 1) * B];
            for b in 0..B {
                for j in 0..LANES {
                    acc[b][j] += wt[b] * v[j];
                }
            }
        }
    }
    for b in 0..B {
        let o = b * dst_plane + dst_off;
        dst[o..o + LANES].copy_from_slice(&acc[b]);
    }
}

#[cfg(target_arch = "x86_64")]
mod avx {
    use std::arch::x86_64::*;

    use super::{Geometry, LANES};

    #[inline]
    #[target_feature(enable = "avx")]
    pub(super) unsafe fn accumulate_stride1<const B: usize>(
        dst: &mut [f32],
        dst_plane: usize,
        dst_off: usize,
        chan: &[f32],
        origin: usize,
        w: &[f32],
        g: Geometry,
    ) {
        const { assert!(LANES == 16) };
        let d = dst.as_mut_ptr().add(dst_off);
        let mut lo = [_mm256_setzero_ps(); B];
        let mut hi = [_mm256_setzero_ps(); B];
        for b in 0..B {
            lo[b] = _mm256_loadu_ps(d.add(b * dst_plane));
            hi[b] = _mm256_loadu_ps(d.add(b * dst_plane + 8));
        }
        let wp = w.as_ptr();
        for ky in 0..g.kh {
            let row = chan.as_ptr().add(origin + ky * g.padded_w);
            for kx in 0..g.kw {
                let v0 = _mm256_loadu_ps(row.add(kx));
                let v1 = _mm256_loadu_ps(row.add(kx + 8));
                let tap = (ky * g.kw + kx) * B;
                for b in 0..B {
                    let wv = _mm256_set1_ps(*wp.add(tap + b));
                    lo[b] = _mm256_add_ps(lo[b], _mm256_mul_ps(wv, v0));
                    hi[b] = _mm256_add_ps(hi[b], _mm256_mul_ps(wv, v1));
                }
            }
        }
        for b in 0..B {
            _mm256_storeu_ps(d.add(b * dst_plane), lo[b]);
            _mm256_storeu_ps(d.add(b * dst_plane + 8), hi[b]);
        }
    }
}
