use super::{check_divisible, GraphSpec, LayerOp, Source};
use crate::error::{config_err, shape_err, Error, Result};
use crate::raster::RgbImage;
use crate::tensor::{self, conv2d, resize_bilinear, upsample_bilinear, ConvParams, Dims, Tensor};
use crate::weights::WeightStore;

/// Smallest and largest values a sigmoid head may emit, keeping depth maps
/// strictly inside `(0, 1)`.
const HEAD_MIN: f32 = 1.0 / (1u32 << 24) as f32;
const HEAD_MAX: f32 = 1.0 - HEAD_MIN;

/// Single-channel relative inverse depth.
///
/// Maps produced by [`Network::infer`] lie strictly inside `(0, 1)`; other
/// constructors only require finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(shape_err(format!(
                "depth map {width}x{height} cannot hold {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(crate::error::domain_err("depth map values must be finite"));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Takes the single plane of a `(1, 1, h, w)` tensor.
    pub fn from_tensor(t: Tensor) -> Result<Self> {
        let d = t.dims();
        if d.n != 1 || d.c != 1 {
            return Err(shape_err(format!("depth maps come from (1, 1, h, w) tensors, got {d:?}")));
        }
        Self::new(d.w, d.h, t.into_vec())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(Dims::new(1, 1, self.height, self.width), self.values.clone())
            .expect("depth map dims are non-zero")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Bilinear resize to `width x height`.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self> {
        Self::from_tensor(resize_bilinear(&self.to_tensor(), height, width)?)
    }
}

/// Full-resolution depth plus the raw per-level head outputs.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub depth: DepthMap,
    /// Side outputs in declaration order; for the preset these are the
    /// sigmoid heads of levels 1 to 6, finest first.
    pub scales: Vec<Tensor>,
}

/// A graph bound to validated weights. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct Network {
    spec: GraphSpec,
    params: Vec<Option<ConvParams>>,
    /// Index of the last layer reading each layer's output; retained
    /// outputs use `usize::MAX`.
    last_use: Vec<usize>,
}

impl Network {
    /// Binds `store` to `spec`, checking that every conv has a kernel and a
    /// bias of the declared dims.
    pub fn build(spec: GraphSpec, store: &WeightStore) -> Result<Self> {
        let output = spec
            .output_index()
            .ok_or_else(|| config_err("graph has no output layer"))?;
        let mut params = Vec::with_capacity(spec.layers().len());
        for layer in spec.layers() {
            let LayerOp::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                pad,
            } = layer.op
            else {
                params.push(None);
                continue;
            };
            let fetch = |key: String, expected: Vec<usize>| {
                let t = store.get(&key).ok_or_else(|| Error::MissingWeight {
                    layer: layer.id.clone(),
                    key: key.clone(),
                })?;
                if t.dims() != expected.as_slice() {
                    return Err(Error::WeightShape {
                        key,
                        expected,
                        found: t.dims().to_vec(),
                    });
                }
                Ok(t.data().to_vec())
            };
            let w = fetch(layer.weight_key(), vec![out_ch, in_ch, kernel, kernel])?;
            let b = fetch(layer.bias_key(), vec![out_ch])?;
            let k = Tensor::from_vec(Dims::new(out_ch, in_ch, kernel, kernel), w)?;
            params.push(Some(ConvParams::new(k, b, stride, pad)?));
        }

        let n = spec.layers().len();
        let mut last_use = vec![0usize; n];
        for i in 0..n {
            for s in spec.sources(i) {
                if let Source::Layer(j) = *s {
                    last_use[j] = last_use[j].max(i);
                }
            }
        }
        last_use[output] = usize::MAX;
        for &i in spec.side_output_indices() {
            last_use[i] = usize::MAX;
        }
        Ok(Self {
            spec,
            params,
            last_use,
        })
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    /// Runs the graph and returns the full-resolution depth map.
    pub fn infer(&self, input: &Tensor) -> Result<DepthMap> {
        Ok(self.infer_multiscale(input)?.depth)
    }

    /// Runs the graph, returning the depth map and every side output.
    pub fn infer_multiscale(&self, input: &Tensor) -> Result<Prediction> {
        let (h, w) = self.spec.input_dims();
        let expected = Dims::new(1, self.spec.input_channels(), h, w);
        if input.dims() != expected {
            return Err(shape_err(format!(
                "network expects input {expected:?}, got {:?}",
                input.dims()
            )));
        }
        let mut outputs: Vec<Option<Tensor>> = vec![None; self.spec.layers().len()];
        for (i, layer) in self.spec.layers().iter().enumerate() {
            let get = |s: &Source| -> &Tensor {
                match *s {
                    Source::Input => input,
                    Source::Layer(j) => outputs[j].as_ref().expect("inputs are computed before use"),
                }
            };
            let srcs = self.spec.sources(i);
            let x = get(&srcs[0]);
            let out = match layer.op {
                LayerOp::Conv { .. } => conv2d(x, self.params[i].as_ref().expect("bound at build"))?,
                LayerOp::Activation(kind) => tensor::activation(x, kind),
                LayerOp::Upsample { factor } => upsample_bilinear(x, factor)?,
                LayerOp::Concat => tensor::concat_channels(x, get(&srcs[1]))?,
                LayerOp::SigmoidHead => x.map(|v| tensor::sigmoid(v).clamp(HEAD_MIN, HEAD_MAX)),
            };
            outputs[i] = Some(out);
            for s in srcs {
                if let Source::Layer(j) = *s {
                    if self.last_use[j] == i {
                        outputs[j] = None;
                    }
                }
            }
        }
        let raw = outputs[self.spec.output_index().expect("checked at build")]
            .as_ref()
            .expect("output is retained");
        let depth = DepthMap::from_tensor(upsample_bilinear(raw, self.spec.output_scale())?)?;
        let scales = self
            .spec
            .side_output_indices()
            .iter()
            .map(|&i| outputs[i].clone().expect("side outputs are retained"))
            .collect();
        Ok(Prediction { depth, scales })
    }
}

/// Free-function form of [`Network::infer`].
pub fn infer(net: &Network, input: &Tensor) -> Result<DepthMap> {
    net.infer(input)
}

/// Bilinearly resizes `image` to `width x height` and scales it to `[0, 1]`,
/// giving a `(1, 3, height, width)` tensor. Both target dims must be
/// multiples of 64.
pub fn preprocess(image: &RgbImage, width: usize, height: usize) -> Result<Tensor> {
    if image.is_empty() {
        return Err(shape_err("cannot preprocess an empty image"));
    }
    check_divisible((height, width), super::PYRAMID_LEVELS)?;
    resize_bilinear(&image.to_tensor()?, height, width)
}
