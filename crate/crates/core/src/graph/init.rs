use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GraphSpec, LayerOp};
use crate::weights::{WeightStore, WeightTensor};

/// Weights of the right shapes for every conv in `spec`, drawn uniformly from
/// `±sqrt(6 / fan_in)` (biases from `±0.1`) with a ChaCha8 stream seeded by
/// `seed`.
pub fn random_weights(spec: &GraphSpec, seed: u64) -> WeightStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fill(spec, |len, fan_in, is_bias| {
        let bound = if is_bias { 0.1 } else { (6.0 / fan_in as f32).sqrt() };
        (0..len).map(|_| rng.random_range(-bound..bound)).collect()
    })
}

/// All-zero weights for every conv in `spec`.
pub fn zero_weights(spec: &GraphSpec) -> WeightStore {
    fill(spec, |len, _, _| vec![0.0; len])
}

fn fill(spec: &GraphSpec, mut values: impl FnMut(usize, usize, bool) -> Vec<f32>) -> WeightStore {
    let mut store = WeightStore::new();
    for layer in spec.layers() {
        if let LayerOp::Conv {
            in_ch, out_ch, kernel, ..
        } = layer.op
        {
            let fan_in = in_ch * kernel * kernel;
            let w = WeightTensor::new(vec![out_ch, in_ch, kernel, kernel], values(out_ch * fan_in, fan_in, false))
                .expect("kernel dims match their length");
            let b = WeightTensor::new(vec![out_ch], values(out_ch, fan_in, true)).expect("bias dims match");
            store.insert(layer.weight_key(), w).expect("layer ids are non-empty");
            store.insert(layer.bias_key(), b).expect("layer ids are non-empty");
        }
    }
    store
}
