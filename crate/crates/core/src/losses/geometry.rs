use crate::error::{domain_err, shape_err, Result};
use crate::tensor::{bilinear_sample, SamplingGrid, Tensor};

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(domain_err(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    fn back_project(&self, u: f64, v: f64, z: f64) -> [f64; 3] {
        [(u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z]
    }

    fn project(&self, p: [f64; 3]) -> [f64; 2] {
        let z = p[2].max(1e-7);
        [self.fx * p[0] / z + self.cx, self.fy * p[1] / z + self.cy]
    }
}

/// Rigid transform from the reference camera frame to the source camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl RelativePose {
    /// Checks that `rotation` is orthonormal with determinant +1 (to 1e-6).
    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot - target).abs() > 1e-6 {
                    return Err(domain_err("rotation is not orthonormal"));
                }
            }
        }
        let r = rotation;
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > 1e-6 {
            return Err(domain_err(format!("rotation determinant is {det}, expected +1")));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    pub fn translation(t: [f64; 3]) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        std::array::from_fn(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + self.translation[i])
    }
}

/// Source-image coordinates of every reference pixel: back-project with
/// `depth` and `k_ref`, move by `pose`, project with `k_src`.
pub fn warp_grid(
    k_src: &CameraIntrinsics,
    pose: &RelativePose,
    k_ref: &CameraIntrinsics,
    depth: &Tensor,
) -> Result<SamplingGrid> {
    let d = depth.dims();
    if d.c != 1 {
        return Err(shape_err(format!("depth must have one channel, got {d:?}")));
    }
    if let Some(z) = depth.data().iter().find(|&&z| !(z > 0.0) || !z.is_finite()) {
        return Err(domain_err(format!("warping needs positive finite depth, found {z}")));
    }
    Ok(SamplingGrid::from_fn(d.n, d.h, d.w, |n, y, x| {
        let z = depth.at(n, 0, y, x) as f64;
        let p = pose.apply(k_ref.back_project(x as f64, y as f64, z));
        let [u, v] = k_src.project(p);
        [u as f32, v as f32]
    }))
}

/// Reconstructs the reference view by sampling `source` through
/// [`warp_grid`].
pub fn warp(
    source: &Tensor,
    k_src: &CameraIntrinsics,
    pose: &RelativePose,
    k_ref: &CameraIntrinsics,
    depth: &Tensor,
) -> Result<Tensor> {
    let (s, d) = (source.dims(), depth.dims());
    if (s.n, s.h, s.w) != (d.n, d.h, d.w) {
        return Err(shape_err(format!("source {s:?} and depth {d:?} disagree")));
    }
    bilinear_sample(source, &warp_grid(k_src, pose, k_ref, depth)?)
}
