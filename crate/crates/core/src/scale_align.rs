//! Metric scale recovery for relative inverse depth from sparse metric
//! anchors, and occlusion masks for compositing virtual content.
//!
//! Models live in inverse-depth space: `1/z ≈ s * d + b`, where `d` is the
//! network output at the anchor pixel.

use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, domain_err, shape_err, Error, Result};
use crate::graph::DepthMap;
use crate::metrics::fit_affine;

/// A pixel with known metric depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseAnchor {
    pub u: usize,
    pub v: usize,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignMode {
    #[default]
    ScaleOnly,
    ScaleShift,
}

impl AlignMode {
    fn sample_size(self) -> usize {
        match self {
            AlignMode::ScaleOnly => 1,
            AlignMode::ScaleShift => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Inlier threshold relative to `1/z`.
    pub inlier_tol: f64,
    pub mode: AlignMode,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            inlier_tol: 0.05,
            mode: AlignMode::ScaleOnly,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleModel {
    pub scale: f64,
    pub shift: f64,
    pub inlier_count: usize,
    pub inlier_ratio: f64,
}

impl ScaleModel {
    /// A fixed model with no inlier statistics.
    pub fn new(scale: f64, shift: f64) -> Self {
        Self {
            scale,
            shift,
            inlier_count: 0,
            inlier_ratio: 0.0,
        }
    }

    pub fn inverse_depth(&self, d: f64) -> f64 {
        self.scale * d + self.shift
    }
}

/// `(d, 1/z)` pairs, validated against the map.
fn observations(pred_inv: &DepthMap, anchors: &[SparseAnchor]) -> Result<Vec<(f64, f64)>> {
    if anchors.is_empty() {
        return Err(config_err("scale alignment needs at least one anchor"));
    }
    anchors
        .iter()
        .map(|a| {
            if a.u >= pred_inv.width() || a.v >= pred_inv.height() {
                return Err(domain_err(format!(
                    "anchor ({}, {}) lies outside the {}x{} depth map",
                    a.u,
                    a.v,
                    pred_inv.width(),
                    pred_inv.height()
                )));
            }
            if !(a.z > 0.0 && a.z.is_finite()) {
                return Err(domain_err(format!("anchor ({}, {}) has non-positive depth {}", a.u, a.v, a.z)));
            }
            Ok((pred_inv.at(a.u, a.v) as f64, 1.0 / a.z))
        })
        .collect()
}

fn is_inlier(model: (f64, f64), (d, y): (f64, f64), tol: f64) -> bool {
    (model.0 * d + model.1 - y).abs() <= tol * y
}

fn minimal_fit(mode: AlignMode, sample: &[(f64, f64)]) -> Option<(f64, f64)> {
    let (s, b) = match mode {
        AlignMode::ScaleOnly => {
            let (d, y) = sample[0];
            (y / d, 0.0)
        }
        AlignMode::ScaleShift => {
            let ((d0, y0), (d1, y1)) = (sample[0], sample[1]);
            let s = (y1 - y0) / (d1 - d0);
            (s, y0 - s * d0)
        }
    };
    (s > 0.0 && s.is_finite() && b.is_finite()).then_some((s, b))
}

fn least_squares(mode: AlignMode, pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let (s, b) = match mode {
        AlignMode::ScaleOnly => {
            let (num, den) = pts.iter().fold((0.0, 0.0), |(n, m), &(d, y)| (n + d * y, m + d * d));
            (num / den, 0.0)
        }
        AlignMode::ScaleShift => fit_affine(pts)?,
    };
    (s > 0.0 && s.is_finite() && b.is_finite()).then_some((s, b))
}

/// RANSAC over minimal anchor samples (one anchor for scale only, two for
/// scale and shift) followed by a least-squares refit on the best inlier
/// set. The model with the most inliers wins; ties keep the earlier sample.
/// Uses ChaCha8 seeded from `config.seed`.
pub fn ransac_scale(pred_inv: &DepthMap, anchors: &[SparseAnchor], config: &RansacConfig) -> Result<ScaleModel> {
    let obs = observations(pred_inv, anchors)?;
    let k = config.mode.sample_size();
    if obs.len() < k {
        return Err(config_err(format!("{:?} needs at least {k} anchors, got {}", config.mode, obs.len())));
    }
    if config.iterations == 0 {
        return Err(config_err("RANSAC needs at least one iteration"));
    }
    if !(config.inlier_tol >= 0.0) {
        return Err(config_err(format!("inlier tolerance must be non-negative, got {}", config.inlier_tol)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<((f64, f64), usize)> = None;
    for _ in 0..config.iterations {
        let i = rng.random_range(0..obs.len());
        let sample = if k == 1 {
            vec![obs[i]]
        } else {
            let mut j = rng.random_range(0..obs.len() - 1);
            if j >= i {
                j += 1;
            }
            vec![obs[i], obs[j]]
        };
        let Some(model) = minimal_fit(config.mode, &sample) else {
            continue;
        };
        let count = obs.iter().filter(|&&o| is_inlier(model, o, config.inlier_tol)).count();
        if best.map_or(true, |(_, c)| count > c) {
            best = Some((model, count));
        }
    }
    let ((s, b), count) =
        best.ok_or_else(|| Error::Degenerate("every sampled model had a non-positive scale".into()))?;
    let mut model = (s, b);
    if count > k {
        let inliers: Vec<_> = obs.iter().copied().filter(|&o| is_inlier(model, o, config.inlier_tol)).collect();
        if let Some(refit) = least_squares(config.mode, &inliers) {
            model = refit;
        }
    }
    let inlier_count = obs.iter().filter(|&&o| is_inlier(model, o, config.inlier_tol)).count();
    Ok(ScaleModel {
        scale: model.0,
        shift: model.1,
        inlier_count,
        inlier_ratio: inlier_count as f64 / obs.len() as f64,
    })
}

/// Metric depth with a per-pixel validity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDepthMap {
    pub width: usize,
    pub height: usize,
    /// `0.0` where invalid.
    pub depth: Vec<f32>,
    pub valid: Vec<bool>,
}

impl MetricDepthMap {
    pub fn at(&self, x: usize, y: usize) -> Option<f32> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.depth[i])
    }
}

/// `z = 1 / (s * d + b)`; pixels with `s * d + b <= 0` are invalid.
pub fn metricize(pred_inv: &DepthMap, model: &ScaleModel) -> MetricDepthMap {
    let (depth, valid) = pred_inv
        .values()
        .iter()
        .map(|&d| {
            let inv = model.inverse_depth(d as f64);
            if inv > 0.0 && inv.is_finite() {
                ((1.0 / inv) as f32, true)
            } else {
                (0.0, false)
            }
        })
        .unzip();
    MetricDepthMap {
        width: pred_inv.width(),
        height: pred_inv.height(),
        depth,
        valid,
    }
}

/// `true` where the virtual surface should be drawn: it is nearer than the
/// real one, or the real depth is unknown. Use `f32::INFINITY` for pixels
/// without virtual content.
pub fn occlusion_mask(real: &MetricDepthMap, virtual_depth: &[f32]) -> Result<Vec<bool>> {
    if virtual_depth.len() != real.depth.len() {
        return Err(shape_err(format!(
            "virtual depth has {} pixels, real depth {}x{}",
            virtual_depth.len(),
            real.width,
            real.height
        )));
    }
    Ok(real
        .depth
        .iter()
        .zip(&real.valid)
        .zip(virtual_depth)
        .map(|((&r, &ok), &v)| !ok || v < r)
        .collect())
}

/// Reads `u,v,z` lines. Blank lines and lines starting with `#` are skipped.
pub fn parse_anchors(reader: impl BufRead) -> Result<Vec<SparseAnchor>> {
    let mut anchors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse { line: i + 1, message };
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        let [u, v, z] = fields[..] else {
            return Err(bad(format!("expected `u,v,z`, got {} fields", fields.len())));
        };
        let u = u.parse::<usize>().map_err(|e| bad(format!("u `{u}`: {e}")))?;
        let v = v.parse::<usize>().map_err(|e| bad(format!("v `{v}`: {e}")))?;
        let z = z.parse::<f64>().map_err(|e| bad(format!("z `{z}`: {e}")))?;
        if !(z > 0.0 && z.is_finite()) {
            return Err(bad(format!("depth must be positive, got {z}")));
        }
        anchors.push(SparseAnchor { u, v, z });
    }
    Ok(anchors)
}
