//! Analytic cost accounting.
//!
//! Only convolutions count: a `k x k` conv from `in` to `out` channels costs
//! `out * in * k * k + out` parameters and `h_out * w_out * out * in * k * k`
//! multiply-accumulates. Bias additions, activations, resampling and
//! concatenation are free under this convention.

use super::{GraphSpec, LayerOp};
use crate::error::Result;

pub fn count_params(spec: &GraphSpec) -> u64 {
    spec.layers()
        .iter()
        .map(|l| match l.op {
            LayerOp::Conv {
                in_ch, out_ch, kernel, ..
            } => (out_ch * in_ch * kernel * kernel + out_ch) as u64,
            _ => 0,
        })
        .sum()
}

/// MACs for one `(h, w)` input.
pub fn count_macs(spec: &GraphSpec, input_dims: (usize, usize)) -> Result<u64> {
    let dims = spec.layer_dims(input_dims)?;
    Ok(spec
        .layers()
        .iter()
        .zip(&dims)
        .map(|(l, d)| match l.op {
            LayerOp::Conv {
                in_ch, out_ch, kernel, ..
            } => (d.h * d.w * out_ch * in_ch * kernel * kernel) as u64,
            _ => 0,
        })
        .sum())
}
