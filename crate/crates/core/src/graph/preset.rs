use super::{GraphSpec, LayerOp, LayerSpec, INPUT};
use crate::error::Result;
use crate::tensor::Activation;

/// Number of stride-2 encoder levels; inputs must be multiples of `2^6`.
pub const PYRAMID_LEVELS: u32 = 6;

/// Channel plan of the PyDNet-v1 pyramid.
///
/// Each encoder level is a stride-2 3x3 conv followed by a stride-1 3x3 conv.
/// Each decoder level runs four 3x3 convs over the encoder features (plus the
/// upsampled features of the level below, when there is one) and a 3x3 head
/// to one channel. The last decoder block is upsampled x2 and passed through
/// a 3x3 conv before being concatenated into the next level up.
#[derive(Debug, Clone, PartialEq)]
pub struct PydnetConfig {
    pub encoder_channels: [usize; PYRAMID_LEVELS as usize],
    pub decoder_channels: [usize; 4],
    pub input_channels: usize,
    pub leaky_slope: f32,
}

impl Default for PydnetConfig {
    fn default() -> Self {
        Self {
            encoder_channels: [16, 32, 64, 96, 128, 192],
            decoder_channels: [96, 64, 32, 8],
            input_channels: 3,
            leaky_slope: crate::tensor::DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl PydnetConfig {
    /// The default plan with every channel count divided by `divisor`
    /// (rounded up, at least one). Handy for fast tests.
    pub fn scaled_down(divisor: usize) -> Self {
        let d = Self::default();
        let shrink = |c: usize| c.div_ceil(divisor).max(1);
        Self {
            encoder_channels: d.encoder_channels.map(shrink),
            decoder_channels: d.decoder_channels.map(shrink),
            ..d
        }
    }

    /// Builds the graph for an `(h, w)` input.
    ///
    /// The depth output is the level-1 head (half resolution); the heads of
    /// all six levels, finest first, are side outputs.
    pub fn graph(&self, input_dims: (usize, usize)) -> Result<GraphSpec> {
        let act = Activation::LeakyRelu {
            slope: self.leaky_slope,
        };
        let mut layers = Vec::new();
        let conv = |layers: &mut Vec<LayerSpec>, id: String, input: &str, in_ch, out_ch, stride, relu: bool| {
            layers.push(LayerSpec::new(
                id.clone(),
                LayerOp::Conv {
                    in_ch,
                    out_ch,
                    kernel: 3,
                    stride,
                    pad: 1,
                },
                &[input],
            ));
            if relu {
                let act_id = format!("{id}.act");
                layers.push(LayerSpec::new(act_id.clone(), LayerOp::Activation(act), &[id.as_str()]));
                act_id
            } else {
                id
            }
        };

        let levels = PYRAMID_LEVELS as usize;
        let mut features = Vec::with_capacity(levels);
        let (mut prev, mut prev_ch) = (INPUT.to_string(), self.input_channels);
        for (i, &ch) in self.encoder_channels.iter().enumerate() {
            let l = i + 1;
            let down = conv(&mut layers, format!("encoder.l{l}.down"), &prev, prev_ch, ch, 2, true);
            prev = conv(&mut layers, format!("encoder.l{l}.conv"), &down, ch, ch, 1, true);
            prev_ch = ch;
            features.push((prev.clone(), ch));
        }

        let [d1, d2, d3, d4] = self.decoder_channels;
        let mut upper: Option<String> = None;
        let mut heads = Vec::with_capacity(levels);
        for l in (1..=levels).rev() {
            let (feat, feat_ch) = &features[l - 1];
            let (entry, entry_ch) = match upper.take() {
                None => (feat.clone(), *feat_ch),
                Some(up) => {
                    let id = format!("decoder.l{l}.concat");
                    layers.push(LayerSpec::new(id.clone(), LayerOp::Concat, &[feat, &up]));
                    (id, feat_ch + d4)
                }
            };
            let c1 = conv(&mut layers, format!("decoder.l{l}.conv1"), &entry, entry_ch, d1, 1, true);
            let c2 = conv(&mut layers, format!("decoder.l{l}.conv2"), &c1, d1, d2, 1, true);
            let c3 = conv(&mut layers, format!("decoder.l{l}.conv3"), &c2, d2, d3, 1, true);
            let c4 = conv(&mut layers, format!("decoder.l{l}.conv4"), &c3, d3, d4, 1, true);
            let head = conv(&mut layers, format!("decoder.l{l}.head"), &c4, d4, 1, 1, false);
            let sig = format!("decoder.l{l}.sigmoid");
            layers.push(LayerSpec::new(sig.clone(), LayerOp::SigmoidHead, &[head.as_str()]));
            heads.push(sig);
            if l > 1 {
                let up = format!("decoder.l{l}.upsample");
                layers.push(LayerSpec::new(up.clone(), LayerOp::Upsample { factor: 2 }, &[c4.as_str()]));
                upper = Some(conv(&mut layers, format!("decoder.l{l}.upconv"), &up, d4, d4, 1, false));
            }
        }
        heads.reverse();
        let side: Vec<&str> = heads.iter().map(String::as_str).collect();
        GraphSpec::new(
            layers,
            self.input_channels,
            input_dims,
            2,
            PYRAMID_LEVELS,
            Some(heads[0].as_str()),
            &side,
        )
    }
}

/// The PyDNet-v1 graph with the default channel plan.
pub fn pydnet_preset(input_dims: (usize, usize)) -> Result<GraphSpec> {
    PydnetConfig::default().graph(input_dims)
}
