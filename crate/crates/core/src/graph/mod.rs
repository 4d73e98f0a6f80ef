//! Declarative network graphs, the PyDNet preset, execution and analytic
//! cost accounting.

mod accounting;
mod init;
mod network;
mod preset;

use std::collections::HashMap;

use crate::error::{config_err, shape_err, Result};
use crate::tensor::{conv_output_len, Activation, Dims};

pub use accounting::{count_macs, count_params};
pub use init::{random_weights, zero_weights};
pub use network::{infer, preprocess, DepthMap, Network, Prediction};
pub use preset::{pydnet_preset, PydnetConfig, PYRAMID_LEVELS};

/// Name under which layers refer to the network input.
pub const INPUT: &str = "input";

/// The operation a layer performs.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerOp {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Activation(Activation),
    Upsample {
        factor: usize,
    },
    /// Channel concatenation of exactly two inputs, first input first.
    Concat,
    /// Sigmoid squashed into the open interval `(0, 1)`.
    SigmoidHead,
}

impl LayerOp {
    fn arity(&self) -> usize {
        match self {
            LayerOp::Concat => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub id: String,
    pub op: LayerOp,
    pub inputs: Vec<String>,
}

impl LayerSpec {
    pub fn new(id: impl Into<String>, op: LayerOp, inputs: &[&str]) -> Self {
        Self {
            id: id.into(),
            op,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Weight-store key of the convolution kernel, `(out, in, k, k)`.
    pub fn weight_key(&self) -> String {
        format!("{}.weight", self.id)
    }

    /// Weight-store key of the convolution bias, `(out,)`.
    pub fn bias_key(&self) -> String {
        format!("{}.bias", self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Source {
    Input,
    Layer(usize),
}

/// A validated, topologically ordered layer list.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    layers: Vec<LayerSpec>,
    sources: Vec<Vec<Source>>,
    input_channels: usize,
    input_dims: (usize, usize),
    output_scale: usize,
    pyramid_levels: u32,
    output: Option<usize>,
    side_outputs: Vec<usize>,
}

impl GraphSpec {
    /// Validates and resolves a layer list.
    ///
    /// `input_dims` is `(h, w)` and must be divisible by `2^pyramid_levels`.
    /// `output` names the layer whose result, upsampled by `output_scale`,
    /// becomes the depth map; `side_outputs` are additional layers returned by
    /// multi-scale inference. A graph with no layers and no output is valid
    /// for accounting but cannot be built into a network.
    pub fn new(
        layers: Vec<LayerSpec>,
        input_channels: usize,
        input_dims: (usize, usize),
        output_scale: usize,
        pyramid_levels: u32,
        output: Option<&str>,
        side_outputs: &[&str],
    ) -> Result<Self> {
        if input_channels == 0 || output_scale == 0 {
            return Err(config_err("input channels and output scale must be positive"));
        }
        check_divisible(input_dims, pyramid_levels)?;
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut sources = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            if layer.id.is_empty() || layer.id == INPUT {
                return Err(config_err(format!("invalid layer id `{}`", layer.id)));
            }
            if layer.inputs.len() != layer.op.arity() {
                return Err(config_err(format!(
                    "layer `{}` takes {} inputs, {} given",
                    layer.id,
                    layer.op.arity(),
                    layer.inputs.len()
                )));
            }
            let resolved = layer
                .inputs
                .iter()
                .map(|name| match name.as_str() {
                    INPUT => Ok(Source::Input),
                    other => index.get(other).map(|&j| Source::Layer(j)).ok_or_else(|| {
                        config_err(format!(
                            "layer `{}` reads `{other}`, which is not defined before it",
                            layer.id
                        ))
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            sources.push(resolved);
            if index.insert(layer.id.as_str(), i).is_some() {
                return Err(config_err(format!("duplicate layer id `{}`", layer.id)));
            }
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| config_err(format!("output layer `{name}` does not exist")))
        };
        let output = output.map(lookup).transpose()?;
        let side_outputs = side_outputs.iter().map(|s| lookup(s)).collect::<Result<Vec<_>>>()?;
        let spec = Self {
            layers,
            sources,
            input_channels,
            input_dims,
            output_scale,
            pyramid_levels,
            output,
            side_outputs,
        };
        spec.layer_dims(input_dims)?;
        Ok(spec)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    /// `(h, w)` the graph was declared for.
    pub fn input_dims(&self) -> (usize, usize) {
        self.input_dims
    }

    pub fn output_scale(&self) -> usize {
        self.output_scale
    }

    pub fn pyramid_levels(&self) -> u32 {
        self.pyramid_levels
    }

    pub fn output(&self) -> Option<&LayerSpec> {
        self.output.map(|i| &self.layers[i])
    }

    pub fn side_outputs(&self) -> impl Iterator<Item = &LayerSpec> {
        self.side_outputs.iter().map(|&i| &self.layers[i])
    }

    pub(crate) fn sources(&self, layer: usize) -> &[Source] {
        &self.sources[layer]
    }

    pub(crate) fn output_index(&self) -> Option<usize> {
        self.output
    }

    pub(crate) fn side_output_indices(&self) -> &[usize] {
        &self.side_outputs
    }

    /// Output dims of every layer for a single `(h, w)` input.
    pub fn layer_dims(&self, (h, w): (usize, usize)) -> Result<Vec<Dims>> {
        let input = Dims::new(1, self.input_channels, h, w);
        let mut dims: Vec<Dims> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let ins: Vec<Dims> = self.sources[i]
                .iter()
                .map(|s| match *s {
                    Source::Input => input,
                    Source::Layer(j) => dims[j],
                })
                .collect();
            let d = ins[0];
            let out = match layer.op {
                LayerOp::Conv {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    pad,
                } => {
                    if d.c != in_ch {
                        return Err(shape_err(format!(
                            "layer `{}` expects {in_ch} input channels, its input has dims {d:?}",
                            layer.id
                        )));
                    }
                    Dims::new(
                        1,
                        out_ch,
                        conv_output_len(d.h, kernel, stride, pad)?,
                        conv_output_len(d.w, kernel, stride, pad)?,
                    )
                }
                LayerOp::Activation(_) | LayerOp::SigmoidHead => d,
                LayerOp::Upsample { factor } => {
                    if factor == 0 {
                        return Err(config_err(format!("layer `{}` has upsampling factor 0", layer.id)));
                    }
                    d.with_spatial(d.h * factor, d.w * factor)
                }
                LayerOp::Concat => {
                    let e = ins[1];
                    if (d.h, d.w) != (e.h, e.w) {
                        return Err(shape_err(format!(
                            "layer `{}` concatenates {d:?} with {e:?}",
                            layer.id
                        )));
                    }
                    d.with_channels(d.c + e.c)
                }
            };
            dims.push(out);
        }
        Ok(dims)
    }
}

pub(crate) fn check_divisible((h, w): (usize, usize), levels: u32) -> Result<()> {
    let m = 1usize << levels;
    if h == 0 || w == 0 || h % m != 0 || w % m != 0 {
        return Err(config_err(format!(
            "input {w}x{h} must be a non-zero multiple of {m} in both dimensions"
        )));
    }
    Ok(())
}
