//! Dense rank-4 `f32` tensors and the numeric kernels the network and the
//! losses are built from.
//!
//! All kernels are pure: they take immutable inputs and return fresh tensors.
//! Some of them parallelise across output planes, but the order in which any
//! single output value is accumulated never depends on the thread count, so
//! results are bit-identical from run to run.

mod conv;
mod filter;
mod resample;

use std::fmt;

use crate::error::{shape_err, Result};

pub use conv::{conv2d, ConvParams};
pub use filter::{gaussian_blur, gaussian_kernel_1d, image_gradients};
pub use resample::{bilinear_sample, resize_bilinear, upsample_bilinear, SamplingGrid};

pub(crate) use conv::conv_output_len;
pub(crate) use filter::forward_diffs;
pub(crate) use resample::source_taps;

/// Tensor dimensions in `(n, c, h, w)` order.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub const fn as_array(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub const fn with_channels(self, c: usize) -> Self {
        Self { c, ..self }
    }

    pub const fn with_spatial(self, h: usize, w: usize) -> Self {
        Self { h, w, ..self }
    }
}

impl fmt::Debug for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Row-major `(n, c, h, w)` feature array.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    dims: Dims,
    data: Vec<f32>,
}

impl Tensor {
    /// Wraps `data`, checking that its length matches `dims` and that no
    /// dimension is zero.
    pub fn from_vec(dims: Dims, data: Vec<f32>) -> Result<Self> {
        if dims.n == 0 || dims.c == 0 || dims.h == 0 || dims.w == 0 {
            return Err(shape_err(format!("all dims must be >= 1, got {dims:?}")));
        }
        if data.len() != dims.len() {
            return Err(shape_err(format!(
                "data length {} does not match dims {dims:?} ({} elements)",
                data.len(),
                dims.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::full(dims, 0.0)
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn full(dims: Dims, value: f32) -> Self {
        assert!(dims.len() > 0, "tensor dims must be >= 1, got {dims:?}");
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    /// Builds a tensor by evaluating `f(n, c, y, x)` at every index.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for n in 0..dims.n {
            for c in 0..dims.c {
                for y in 0..dims.h {
                    for x in 0..dims.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Self::from_vec(dims, data).expect("from_fn dims must be non-zero")
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let d = self.dims;
        ((n * d.c + c) * d.h + y) * d.w + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, value: f32) {
        let i = self.index(n, c, y, x);
        self.data[i] = value;
    }

    /// The `h * w` slice for batch item `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let p = self.dims.plane();
        let start = (n * self.dims.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f32] {
        let p = self.dims.plane();
        let start = (n * self.dims.c + c) * p;
        &mut self.data[start..start + p]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two tensors of identical dims.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f32, f32) -> f32) -> Result<Tensor> {
        self.expect_same_dims(other)?;
        Ok(Tensor {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn expect_same_dims(&self, other: &Tensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(shape_err(format!(
                "dims differ: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.min_max();
        write!(f, "Tensor{:?} range [{lo}, {hi}]", self.dims)
    }
}

/// Elementwise activation functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu { slope: f32 },
    Sigmoid,
}

/// Slope used by the preset network's leaky ReLUs.
pub const DEFAULT_LEAKY_SLOPE: f32 = 0.2;

impl Activation {
    pub const fn leaky_relu() -> Self {
        Activation::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    #[inline]
    pub fn apply_scalar(self, x: f32) -> f32 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Sigmoid => sigmoid(x),
        }
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

pub fn activation(input: &Tensor, kind: Activation) -> Tensor {
    input.map(|v| kind.apply_scalar(v))
}

/// Stacks `a` and `b` along the channel axis, `a` first.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (da, db) = (a.dims(), b.dims());
    if da.n != db.n || da.h != db.h || da.w != db.w {
        return Err(shape_err(format!(
            "cannot concatenate {da:?} and {db:?}: batch and spatial dims must agree"
        )));
    }
    let out_dims = da.with_channels(da.c + db.c);
    let mut data = Vec::with_capacity(out_dims.len());
    let (sa, sb) = (da.c * da.plane(), db.c * db.plane());
    for n in 0..da.n {
        data.extend_from_slice(&a.data()[n * sa..(n + 1) * sa]);
        data.extend_from_slice(&b.data()[n * sb..(n + 1) * sb]);
    }
    Tensor::from_vec(out_dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_lengths_and_zero_dims() {
        assert!(Tensor::from_vec(Dims::new(1, 1, 2, 2), vec![0.0; 3]).is_err());
        assert!(Tensor::from_vec(Dims::new(1, 0, 2, 2), vec![]).is_err());
        assert!(Tensor::from_vec(Dims::new(1, 1, 2, 2), vec![0.0; 4]).is_ok());
    }

    #[test]
    fn activations() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(Activation::leaky_relu().apply_scalar(-1.0), -0.2);
        assert_eq!(Activation::leaky_relu().apply_scalar(3.0), 3.0);
        assert!((sigmoid(20.0) as f64 - 1.0).abs() < 1e-8);
        assert!((sigmoid(-20.0) as f64).abs() < 1e-8);

        let t = Tensor::from_vec(Dims::new(1, 1, 1, 3), vec![-2.0, 0.0, 2.0]).unwrap();
        let out = activation(&t, Activation::LeakyRelu { slope: 0.5 });
        assert_eq!(out.data(), &[-1.0, 0.0, 2.0]);
        assert_eq!(out.dims(), t.dims());
    }

    #[test]
    fn concat_orders_channels_a_first() {
        let a = Tensor::from_fn(Dims::new(2, 2, 4, 4), |n, c, y, x| (n * 1000 + c * 100 + y * 10 + x) as f32);
        let b = Tensor::from_fn(Dims::new(2, 3, 4, 4), |n, c, y, x| -((n * 1000 + c * 100 + y * 10 + x) as f32));
        let out = concat_channels(&a, &b).unwrap();
        assert_eq!(out.dims(), Dims::new(2, 5, 4, 4));
        for n in 0..2 {
            for c in 0..5 {
                let expected = if c < 2 { a.plane(n, c) } else { b.plane(n, c - 2) };
                assert_eq!(out.plane(n, c), expected);
            }
        }
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = Tensor::zeros(Dims::new(1, 2, 4, 4));
        let b = Tensor::zeros(Dims::new(1, 2, 4, 3));
        assert!(matches!(concat_channels(&a, &b), Err(crate::Error::Shape(_))));
        // A channel-free operand cannot even be constructed.
        assert!(Tensor::from_vec(Dims::new(1, 0, 4, 4), vec![]).is_err());
    }
}
