//! Depth evaluation: the seven standard error and accuracy columns plus the
//! two alignment modes used to score scale-free predictions.

use crate::error::{domain_err, shape_err, Error, Result};

/// Predictions are clamped to `[PRED_FLOOR, cap]` before scoring.
pub const PRED_FLOOR: f64 = 1e-3;
pub const DEFAULT_CAP_OUTDOOR: f64 = 80.0;
pub const DEFAULT_CAP_INDOOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "abs_rel,sq_rel,rmse,rmse_log,a1,a2,a3";

    pub fn to_csv_row(&self) -> String {
        let v = self.as_array();
        v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",")
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.abs_rel, self.sq_rel, self.rmse, self.rmse_log, self.a1, self.a2, self.a3]
    }

    /// Column-wise mean of per-image reports. `None` for an empty slice.
    pub fn mean(reports: &[MetricsReport]) -> Option<MetricsReport> {
        if reports.is_empty() {
            return None;
        }
        let mut acc = [0.0; 7];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.as_array()) {
                *a += v;
            }
        }
        let k = reports.len() as f64;
        let [abs_rel, sq_rel, rmse, rmse_log, a1, a2, a3] = acc.map(|a| a / k);
        Some(MetricsReport {
            abs_rel,
            sq_rel,
            rmse,
            rmse_log,
            a1,
            a2,
            a3,
        })
    }
}

fn check_lengths(pred: &[f32], gt: &[f32], valid: &[bool]) -> Result<()> {
    if pred.len() != gt.len() || pred.len() != valid.len() {
        return Err(shape_err(format!(
            "pred, gt and mask lengths differ: {}, {}, {}",
            pred.len(),
            gt.len(),
            valid.len()
        )));
    }
    Ok(())
}

/// Scores `pred` against `gt` (both metric depth) over pixels where `valid`
/// holds and `gt <= cap`.
pub fn compute_metrics(pred: &[f32], gt: &[f32], valid: &[bool], cap: f64) -> Result<MetricsReport> {
    check_lengths(pred, gt, valid)?;
    if !(cap > PRED_FLOOR) {
        return Err(domain_err(format!("depth cap must exceed {PRED_FLOOR}, got {cap}")));
    }
    let (mut n, mut abs_rel, mut sq_rel, mut se, mut se_log) = (0usize, 0.0, 0.0, 0.0, 0.0);
    let mut within = [0usize; 3];
    for ((&p, &g), &ok) in pred.iter().zip(gt).zip(valid) {
        if !ok {
            continue;
        }
        let (p, g) = (p as f64, g as f64);
        if !(p > 0.0 && g > 0.0) {
            return Err(domain_err(format!("non-positive depth on a valid pixel (pred {p}, gt {g})")));
        }
        if g > cap {
            continue;
        }
        let p = p.clamp(PRED_FLOOR, cap);
        let diff = p - g;
        abs_rel += diff.abs() / g;
        sq_rel += diff * diff / g;
        se += diff * diff;
        let dl = p.ln() - g.ln();
        se_log += dl * dl;
        let ratio = (p / g).max(g / p);
        for (k, w) in within.iter_mut().enumerate() {
            if ratio < 1.25f64.powi(k as i32 + 1) {
                *w += 1;
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Degenerate("no valid pixels to score".into()));
    }
    let k = n as f64;
    Ok(MetricsReport {
        abs_rel: abs_rel / k,
        sq_rel: sq_rel / k,
        rmse: (se / k).sqrt(),
        rmse_log: (se_log / k).sqrt(),
        a1: within[0] as f64 / k,
        a2: within[1] as f64 / k,
        a3: within[2] as f64 / k,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Rescales `pred` by `median(gt) / median(pred)` taken over the mask.
pub fn median_align(pred: &[f32], gt: &[f32], valid: &[bool]) -> Result<Vec<f32>> {
    check_lengths(pred, gt, valid)?;
    let masked = |v: &[f32]| -> Vec<f64> { v.iter().zip(valid).filter(|(_, &ok)| ok).map(|(&x, _)| x as f64).collect() };
    let (mp, mg) = (masked(pred), masked(gt));
    if mp.is_empty() {
        return Err(Error::Degenerate("no valid pixels to align".into()));
    }
    let (med_p, med_g) = (median(mp), median(mg));
    if !(med_p > 0.0 && med_g > 0.0) {
        return Err(domain_err(format!("medians must be positive (pred {med_p}, gt {med_g})")));
    }
    let ratio = med_g / med_p;
    Ok(pred.iter().map(|&p| (p as f64 * ratio) as f32).collect())
}

/// Least-squares `(s, b)` minimising `Σ (s * pred_inv + b - 1 / gt)^2` over
/// the mask.
pub fn lsq_align_inverse(pred_inv: &[f32], gt_depth: &[f32], valid: &[bool]) -> Result<(f64, f64)> {
    check_lengths(pred_inv, gt_depth, valid)?;
    let pts: Vec<(f64, f64)> = pred_inv
        .iter()
        .zip(gt_depth)
        .zip(valid)
        .filter(|(_, &ok)| ok)
        .map(|((&x, &g), _)| (x as f64, g as f64))
        .collect();
    if let Some(&(_, g)) = pts.iter().find(|(_, g)| !(*g > 0.0)) {
        return Err(domain_err(format!("ground-truth depth must be positive, got {g}")));
    }
    let targets: Vec<(f64, f64)> = pts.iter().map(|&(x, g)| (x, 1.0 / g)).collect();
    fit_affine(&targets).ok_or_else(|| Error::Degenerate("inverse-depth predictions are constant on the mask".into()))
}

/// Closed-form least-squares line `y = s x + b`; `None` when fewer than two
/// points or the `x` values are (numerically) constant.
pub(crate) fn fit_affine(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let (mut sxx, mut sxy, mut scale) = (0.0, 0.0, 0.0f64);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        scale = scale.max(x.abs());
    }
    if !(sxx > 1e-12 * k * scale.max(1e-300).powi(2)) {
        return None;
    }
    let s = sxy / sxx;
    Some((s, my - s * mx))
}
