//! Shared fixtures for the criterion benches.

use depthedge_core::graph::{pydnet_preset, random_weights};
use depthedge_core::{Dims, Network, Result, Tensor};

/// Deterministic, non-constant input in `[0, 1)`.
pub fn pattern(dims: Dims) -> Tensor {
    Tensor::from_fn(dims, |n, c, y, x| ((n * 7 + c * 13 + y * 31 + x * 17) % 97) as f32 / 97.0)
}

/// The default preset for an `(h, w)` input with seeded random weights.
pub fn preset_network(h: usize, w: usize) -> Result<Network> {
    let spec = pydnet_preset((h, w))?;
    let store = random_weights(&spec, 7);
    Network::build(spec, &store)
}
