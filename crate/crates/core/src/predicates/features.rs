use serde::{Deserialize, Serialize};

use super::PredicateError;
use crate::model::{Interval, SeriesFrame};

/// Scale floor for channels whose interquartile range vanishes.
pub const SCALE_FLOOR: f64 = 1e-9;

/// Shape descriptors of one channel segment, all expressed in units of the
/// channel's robust scale so that affine rescaling of the channel leaves
/// them unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentFeatures {
    /// Least-squares slope times segment length.
    pub norm_slope: f64,
    /// Coefficient of determination of the linear fit, in `[0, 1]`.
    pub r2_linear: f64,
    /// Second difference of the least-squares quadratic fit, times the
    /// squared segment length.
    pub curvature: f64,
    /// Standard deviation of the linear-fit residuals.
    pub cv: f64,
    /// Last sample minus first sample.
    pub net_delta: f64,
    /// Largest absolute deviation from the line joining the endpoints.
    pub peak_prominence: f64,
}

impl SegmentFeatures {
    pub const ZERO: SegmentFeatures = SegmentFeatures {
        norm_slope: 0.0,
        r2_linear: 0.0,
        curvature: 0.0,
        cv: 0.0,
        net_delta: 0.0,
        peak_prominence: 0.0,
    };
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Median and interquartile range (floored at [`SCALE_FLOOR`]).
pub fn robust_center_scale(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    (median, iqr.max(SCALE_FLOOR))
}

/// Channel robust scale: the interquartile range of the full channel.
pub fn robust_scale(values: &[f64]) -> f64 {
    robust_center_scale(values).1
}

/// Robust-standardized copy of every channel of a frame. Features are read
/// from here so the scale statistics are computed once per frame.
#[derive(Debug, Clone)]
pub struct FeatureContext<'a> {
    frame: &'a SeriesFrame,
    normalized: Vec<Vec<f64>>,
    scales: Vec<f64>,
}

impl<'a> FeatureContext<'a> {
    pub fn new(frame: &'a SeriesFrame) -> Self {
        let mut normalized = Vec::with_capacity(frame.n_channels());
        let mut scales = Vec::with_capacity(frame.n_channels());
        for c in 0..frame.n_channels() {
            let col = frame.column(c);
            let (center, scale) = robust_center_scale(col);
            normalized.push(col.iter().map(|v| (v - center) / scale).collect());
            scales.push(scale);
        }
        Self {
            frame,
            normalized,
            scales,
        }
    }

    pub fn frame(&self) -> &'a SeriesFrame {
        self.frame
    }

    pub fn channel_index(&self, name: &str) -> Result<usize, PredicateError> {
        self.frame
            .channel_index(name)
            .ok_or_else(|| PredicateError::UnknownChannel(name.to_string()))
    }

    /// Standardized values of one channel.
    pub fn normalized(&self, channel: usize) -> &[f64] {
        &self.normalized[channel]
    }

    pub fn scale(&self, channel: usize) -> f64 {
        self.scales[channel]
    }

    pub fn features(
        &self,
        channel: usize,
        interval: Interval,
    ) -> Result<SegmentFeatures, PredicateError> {
        let col = &self.normalized[channel];
        if interval.t_off() > col.len() {
            return Err(PredicateError::OutOfBounds {
                interval,
                len: col.len(),
            });
        }
        if interval.len() < 2 {
            return Err(PredicateError::SegmentTooShort(interval));
        }
        Ok(segment_features(&col[interval.t_on()..interval.t_off()]))
    }
}

/// Features of one segment of a channel, using the full channel for scale.
pub fn compute_features(
    frame: &SeriesFrame,
    channel: &str,
    interval: Interval,
) -> Result<SegmentFeatures, PredicateError> {
    let col = frame
        .channel(channel)
        .ok_or_else(|| PredicateError::UnknownChannel(channel.to_string()))?;
    if interval.t_off() > col.len() {
        return Err(PredicateError::OutOfBounds {
            interval,
            len: col.len(),
        });
    }
    if interval.len() < 2 {
        return Err(PredicateError::SegmentTooShort(interval));
    }
    let (center, scale) = robust_center_scale(col);
    let seg: Vec<f64> = col[interval.t_on()..interval.t_off()]
        .iter()
        .map(|v| (v - center) / scale)
        .collect();
    Ok(segment_features(&seg))
}

/// Features of an already standardized segment (length >= 2).
pub fn segment_features(z: &[f64]) -> SegmentFeatures {
    let n = z.len();
    debug_assert!(n >= 2);
    let nf = n as f64;
    let mid = (nf - 1.0) / 2.0;

    let mean = z.iter().sum::<f64>() / nf;
    let (mut stt, mut st4, mut stz, mut st2z, mut szz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &v) in z.iter().enumerate() {
        let t = i as f64 - mid;
        let d = v - mean;
        let t2 = t * t;
        stt += t2;
        st4 += t2 * t2;
        stz += t * d;
        st2z += t2 * d;
        szz += d * d;
    }
    let slope = stz / stt;
    let ss_res = (szz - slope * stz).max(0.0);
    let r2 = if szz > 1e-18 * nf {
        (1.0 - ss_res / szz).clamp(0.0, 1.0)
    } else {
        0.0
    };

    // Centered time makes the odd moments vanish, so the quadratic
    // coefficient decouples from the slope.
    let curvature = if n >= 3 {
        let denom = nf * st4 - stt * stt;
        if denom > 0.0 {
            let c2 = nf * st2z / denom;
            2.0 * c2 * nf * nf
        } else {
            0.0
        }
    } else {
        0.0
    };

    let first = z[0];
    let last = z[n - 1];
    let step = (last - first) / (nf - 1.0);
    let peak_prominence = z
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - (first + step * i as f64)).abs())
        .fold(0.0, f64::max);

    SegmentFeatures {
        norm_slope: slope * nf,
        r2_linear: r2,
        curvature,
        cv: (ss_res / nf).sqrt(),
        net_delta: last - first,
        peak_prominence,
    }
}
