//! CPU runtime and toolkit for real-time single-image depth estimation with
//! pyramidal encoder-decoder networks.
//!
//! - [`tensor`]: dense kernels (convolution, resampling, gradients, blur).
//! - [`graph`]: network description, the PyDNet preset, execution and
//!   parameter / MAC accounting.
//! - [`weights`]: the LDWB weight container.
//! - [`losses`]: self-supervised and distillation training signals as forward
//!   functions with hand-written gradients.
//! - [`metrics`]: the seven-column depth evaluation and alignment helpers.
//! - [`scale_align`]: RANSAC metric-scale recovery from sparse anchors and AR
//!   occlusion masks.
//! - [`bokeh`]: depth-aware synthetic blur.
//! - [`timing`]: latency measurement for the benchmark front ends.

pub mod bokeh;
pub mod error;
pub mod graph;
pub mod losses;
pub mod metrics;
pub mod raster;
pub mod scale_align;
pub mod tensor;
pub mod timing;
pub mod weights;

pub use error::{Error, Result};
pub use graph::{DepthMap, GraphSpec, Network};
pub use raster::RgbImage;
pub use tensor::{Dims, Tensor};
pub use weights::{WeightStore, WeightTensor};
