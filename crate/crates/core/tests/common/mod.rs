//! Brute-force reference implementations in f64. They share no code with the
//! library kernels beyond reading its data types.

#![allow(dead_code)]

use depthedge_core::graph::{GraphSpec, LayerOp, INPUT};
use depthedge_core::tensor::Activation;
use depthedge_core::{Dims, Tensor, WeightStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: Dims, lo: f32, hi: f32) -> Tensor {
    Tensor::from_fn(dims, |_, _, _, _| rng.random_range(lo..hi))
}

/// Single-item planar tensor in f64.
#[derive(Debug, Clone)]
pub struct Grid {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let d = t.dims();
        assert_eq!(d.n, 1);
        Self {
            c: d.c,
            h: d.h,
            w: d.w,
            data: t.data().iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.h + y) * self.w + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.h + y) * self.w + x] = v;
    }
}

/// Largest absolute difference divided by the largest oracle magnitude.
pub fn rel_err(actual: &[f32], oracle: &[f64]) -> f64 {
    assert_eq!(actual.len(), oracle.len());
    let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let diff = actual.iter().zip(oracle).fold(0.0f64, |m, (&a, &o)| m.max((a as f64 - o).abs()));
    diff / scale
}

/// Direct convolution. `kernel` is `(oc, ic, k, k)` flattened.
pub fn conv(input: &Grid, kernel: &[f64], bias: &[f64], oc: usize, k: usize, stride: usize, pad: usize) -> Grid {
    let oh = (input.h + 2 * pad - k) / stride + 1;
    let ow = (input.w + 2 * pad - k) / stride + 1;
    let mut out = Grid::zeros(oc, oh, ow);
    for o in 0..oc {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias[o];
                for i in 0..input.c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let sy = (y * stride + ky) as isize - pad as isize;
                            let sx = (x * stride + kx) as isize - pad as isize;
                            if sy < 0 || sx < 0 || sy >= input.h as isize || sx >= input.w as isize {
                                continue;
                            }
                            let wv = kernel[((o * input.c + i) * k + ky) * k + kx];
                            acc += wv * input.get(i, sy as usize, sx as usize);
                        }
                    }
                }
                out.set(o, y, x, acc);
            }
        }
    }
    out
}

/// Bilinear read at continuous `(x, y)` with coordinates clamped to the
/// grid.
pub fn bilinear_at(g: &Grid, c: usize, x: f64, y: f64) -> f64 {
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, (g.w - 1) as f64) };
    let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, (g.h - 1) as f64) };
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(g.w - 1), (y0 + 1).min(g.h - 1));
    let (tx, ty) = (x - x0 as f64, y - y0 as f64);
    let top = g.get(c, y0, x0) * (1.0 - tx) + g.get(c, y0, x1) * tx;
    let bottom = g.get(c, y1, x0) * (1.0 - tx) + g.get(c, y1, x1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Half-pixel-center resize: destination `i` samples source
/// `max(0, (i + 0.5) * in / out - 0.5)`.
pub fn resize(g: &Grid, oh: usize, ow: usize) -> Grid {
    let mut out = Grid::zeros(g.c, oh, ow);
    let src = |i: usize, n_in: usize, n_out: usize| ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).max(0.0);
    for c in 0..g.c {
        for y in 0..oh {
            for x in 0..ow {
                out.set(c, y, x, bilinear_at(g, c, src(x, g.w, ow), src(y, g.h, oh)));
            }
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Sequential evaluation of a graph from its layer list, straight from the
/// weight store. Returns the final full-resolution depth.
pub fn eval_graph(spec: &GraphSpec, store: &WeightStore, input: &Tensor) -> Grid {
    let x = Grid::from_tensor(input);
    let mut values: Vec<(String, Grid)> = vec![(INPUT.to_string(), x.clone())];
    let lookup = |values: &Vec<(String, Grid)>, id: &str| -> Grid {
        values.iter().rev().find(|(k, _)| k == id).map(|(_, g)| g.clone()).expect("input defined earlier")
    };
    for layer in spec.layers() {
        let a = lookup(&values, &layer.inputs[0]);
        let out = match &layer.op {
            LayerOp::Conv {
                out_ch,
                kernel,
                stride,
                pad,
                ..
            } => {
                let w: Vec<f64> = store.get(&layer.weight_key()).unwrap().data().iter().map(|&v| v as f64).collect();
                let b: Vec<f64> = store.get(&layer.bias_key()).unwrap().data().iter().map(|&v| v as f64).collect();
                conv(&a, &w, &b, *out_ch, *kernel, *stride, *pad)
            }
            LayerOp::Activation(Activation::LeakyRelu { slope }) => Grid {
                data: a.data.iter().map(|&v| if v >= 0.0 { v } else { v * *slope as f64 }).collect(),
                ..a
            },
            LayerOp::Activation(Activation::Sigmoid) => Grid {
                data: a.data.iter().map(|&v| sigmoid(v)).collect(),
                ..a
            },
            LayerOp::Upsample { factor } => resize(&a, a.h * factor, a.w * factor),
            LayerOp::Concat => {
                let b = lookup(&values, &layer.inputs[1]);
                let mut data = a.data.clone();
                data.extend_from_slice(&b.data);
                Grid {
                    c: a.c + b.c,
                    data,
                    ..a
                }
            }
            LayerOp::SigmoidHead => {
                let lo = 2f64.powi(-24);
                Grid {
                    data: a.data.iter().map(|&v| sigmoid(v).clamp(lo, 1.0 - lo)).collect(),
                    ..a
                }
            }
        };
        values.push((layer.id.clone(), out));
    }
    let head = lookup(&values, &spec.output().unwrap().id);
    resize(&head, input.dims().h, input.dims().w)
}

/// 2D Gaussian blur with edge replication, kernel normalized in f64.
pub fn gaussian_blur_2d(g: &Grid, size: usize, sigma: f64) -> Grid {
    let r = (size / 2) as isize;
    let weights: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = weights.iter().sum::<f64>().powi(2);
    let mut out = Grid::zeros(g.c, g.h, g.w);
    for c in 0..g.c {
        for y in 0..g.h {
            for x in 0..g.w {
                let mut acc = 0.0;
                for (a, wy) in weights.iter().enumerate() {
                    for (b, wx) in weights.iter().enumerate() {
                        let sy = (y as isize + a as isize - r).clamp(0, g.h as isize - 1) as usize;
                        let sx = (x as isize + b as isize - r).clamp(0, g.w as isize - 1) as usize;
                        acc += wy * wx * g.get(c, sy, sx);
                    }
                }
                out.set(c, y, x, acc / total);
            }
        }
    }
    out
}

/// Central-difference directional derivatives of `f` at `x` compared with
/// `<grad, v>` for `directions` random unit directions. Returns the worst
/// relative error.
pub fn finite_difference_check(
    rng: &mut ChaCha8Rng,
    x: &Tensor,
    grad: &Tensor,
    directions: usize,
    h: f64,
    f: impl Fn(&Tensor) -> f64,
) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let raw: Vec<f64> = (0..x.data().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let v: Vec<f64> = raw.iter().map(|r| r / norm).collect();
        let shifted = |sign: f64| {
            let data = x.data().iter().zip(&v).map(|(&a, &d)| (a as f64 + sign * h * d) as f32).collect();
            Tensor::from_vec(x.dims(), data).unwrap()
        };
        let numeric = (f(&shifted(1.0)) - f(&shifted(-1.0))) / (2.0 * h);
        let analytic: f64 = grad.data().iter().zip(&v).map(|(&g, &d)| g as f64 * d).sum();
        let err = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}
