//! Improvement Rate: mean, over segmentation levels k = 2..=n, of the OLS
//! slope of the per-segment OLS slopes of a score series.

use serde::{Deserialize, Serialize};

use super::ols::ols_slope;
use super::MetricsError;

pub const DEFAULT_MAX_SEGMENTS: usize = 10;

/// One segmentation level of the computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationLevel {
    pub k: usize,
    /// Half-open index ranges `[start, end)` into the series.
    pub segments: Vec<(usize, usize)>,
    pub local_slopes: Vec<f64>,
    pub a_k: f64,
}

/// Splits `len` points into `k` contiguous segments whose sizes differ by at
/// most one; the first `len % k` segments take the extra point.
pub fn uniform_partition(len: usize, k: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (len / k, len % k);
    let mut start = 0;
    (0..k)
        .map(|j| {
            let size = base + usize::from(j < extra);
            let seg = (start, start + size);
            start += size;
            seg
        })
        .collect()
}

/// Every level k = 2..=n with its segments and slopes.
pub fn segmentation_levels(series: &[f64], n: usize) -> Result<Vec<SegmentationLevel>, MetricsError> {
    if n < 2 {
        return Err(MetricsError::BadSegmentation(n));
    }
    if series.len() < 2 * n {
        return Err(MetricsError::TooShort { needed: 2 * n, got: series.len() });
    }
    (2..=n)
        .map(|k| {
            let segments = uniform_partition(series.len(), k);
            let local_slopes =
                segments.iter().map(|&(a, b)| ols_slope(&series[a..b])).collect::<Result<Vec<_>, _>>()?;
            let a_k = ols_slope(&local_slopes)?;
            Ok(SegmentationLevel { k, segments, local_slopes, a_k })
        })
        .collect()
}

/// Improvement Rate of `s_0..s_T` with maximum segmentation `n`.
/// Requires `T + 1 >= 2n` so every segment has at least two points.
pub fn improvement_rate(series: &[f64], n: usize) -> Result<f64, MetricsError> {
    let levels = segmentation_levels(series, n)?;
    Ok(levels.iter().map(|l| l.a_k).sum::<f64>() / (n - 1) as f64)
}

/// `s_t = (t/T)^a` for `t = 0..=T`.
pub fn power_law_series(a: f64, t_max: usize) -> Vec<f64> {
    let tf = t_max as f64;
    (0..=t_max).map(|t| (t as f64 / tf).powf(a)).collect()
}

/// Exponent whose reference curve defines the top of the calibrated scale.
pub const CALIBRATION_EXPONENT: f64 = 2.0;
/// Improvement Rate assigned to the calibration curve.
pub const CALIBRATION_IR: f64 = 2.0;

/// Amplitude `c(T, n)` such that `c * (t/T)^2` has Improvement Rate 2.
///
/// The raw unit-amplitude curves have rates of order `1e-4` (the slope of a
/// slope shrinks with both segment length and segment count), so a sweep
/// over rates 0..2 needs a scale. Scaling is exact because the rate is linear
/// in the series.
pub fn calibration_scale(t_max: usize, n: usize) -> Result<f64, MetricsError> {
    let raw = improvement_rate(&power_law_series(CALIBRATION_EXPONENT, t_max), n)?;
    Ok(CALIBRATION_IR / raw)
}

/// Reference curve `c(T, n) * (t/T)^a`.
pub fn calibrated_power_law_series(a: f64, t_max: usize, n: usize) -> Result<Vec<f64>, MetricsError> {
    let c = calibration_scale(t_max, n)?;
    Ok(power_law_series(a, t_max).into_iter().map(|v| c * v).collect())
}

fn calibrated_ir(a: f64, t_max: usize, n: usize, scale: f64) -> Result<f64, MetricsError> {
    Ok(scale * improvement_rate(&power_law_series(a, t_max), n)?)
}

/// Exponent `a` whose calibrated reference curve has the requested rate,
/// found by bisection to within `1e-4` of the target rate (in practice far
/// tighter).
///
/// The rate is not monotone in `a` over all of `(0, inf)`: it dips below zero
/// for small exponents and falls back towards zero for very large ones. The
/// search runs on the increasing branch between the trough and the peak,
/// located by a log-spaced scan.
pub fn match_power_law_exponent(target: f64, t_max: usize, n: usize) -> Result<f64, MetricsError> {
    let scale = calibration_scale(t_max, n)?;
    let ir = |a: f64| calibrated_ir(a, t_max, n, scale);
    let grid: Vec<f64> = (0..=240).map(|i| 10f64.powf(-1.5 + 3.0 * f64::from(i) / 240.0)).collect();
    let values = grid.iter().map(|&a| ir(a)).collect::<Result<Vec<_>, _>>()?;
    let argmin = (0..grid.len()).min_by(|&i, &j| values[i].total_cmp(&values[j])).expect("non-empty grid");
    let argmax = (argmin..grid.len()).max_by(|&i, &j| values[i].total_cmp(&values[j])).expect("non-empty grid");
    let (mut lo, mut hi) = (grid[argmin], grid[argmax]);
    let (ir_lo, ir_hi) = (values[argmin], values[argmax]);
    if !(ir_lo..=ir_hi).contains(&target) {
        return Err(MetricsError::OutOfRange { target, min: ir_lo, max: ir_hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = ir(mid)?;
        if (v - target).abs() < 1e-10 || hi - lo < 1e-13 {
            return Ok(mid);
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
