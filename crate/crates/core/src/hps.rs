//! Human pose scatter: the residual variance of a frame's keypoints off their
//! principal axis.
//!
//! For 2-D keypoints projected onto one principal component the residual is
//! `trace(S) - lambda_max = lambda_min`, where `S` is the centered 2x2 scatter
//! matrix. Both eigenvalues come from the closed-form symmetric 2x2 solution.

use serde::Serialize;
use thiserror::Error;

use crate::pose_io::{PoseFrame, PoseSequence};

/// Default keypoint confidence threshold.
pub const DEFAULT_CONF_THRESHOLD: f64 = 0.05;

/// Minimum number of valid keypoints for a frame to have a defined scatter.
pub const MIN_VALID_KEYPOINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HpsError {
    #[error("insufficient keypoints: {valid} valid, need at least {MIN_VALID_KEYPOINTS}")]
    InsufficientKeypoints { valid: usize },
    #[error("principal axis undefined for zero scatter")]
    UndefinedAxis,
    #[error("no frame in the sequence has enough valid keypoints")]
    EmptySignal,
    #[error("smoothing window must be odd and positive, got {0}")]
    InvalidWindow(usize),
    #[error("confidence threshold must lie in [0,1], got {0}")]
    InvalidThreshold(f64),
}

/// Centered second moments of a frame's valid keypoints and their eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterSummary {
    pub sxx: f64,
    pub sxy: f64,
    pub syy: f64,
    pub trace: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub n_valid: usize,
}

impl ScatterSummary {
    /// Summarizes a point set. Needs at least [`MIN_VALID_KEYPOINTS`] points.
    pub fn from_points(points: &[[f64; 2]]) -> Result<Self, HpsError> {
        let n = points.len();
        if n < MIN_VALID_KEYPOINTS {
            return Err(HpsError::InsufficientKeypoints { valid: n });
        }
        let inv_n = 1.0 / n as f64;
        let mean_x = points.iter().map(|p| p[0]).sum::<f64>() * inv_n;
        let mean_y = points.iter().map(|p| p[1]).sum::<f64>() * inv_n;
        let centered: Vec<[f64; 2]> = points
            .iter()
            .map(|p| [p[0] - mean_x, p[1] - mean_y])
            .collect();

        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for [dx, dy] in &centered {
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        let trace = sxx + syy;
        let half_gap = 0.5 * (sxx - syy);
        let lambda_max = 0.5 * trace + half_gap.hypot(sxy);

        // det(S) as a sum of squared 2x2 minors of the centered data. Unlike
        // sxx*syy - sxy^2 this stays accurate when the points are nearly
        // collinear, so lambda_min = det / lambda_max keeps full relative precision.
        let mut det = 0.0;
        for (i, a) in centered.iter().enumerate() {
            for b in &centered[i + 1..] {
                let minor = a[0] * b[1] - a[1] * b[0];
                det += minor * minor;
            }
        }
        let lambda_min = if lambda_max > 0.0 {
            (det / lambda_max).min(lambda_max)
        } else {
            0.0
        };

        Ok(Self {
            sxx,
            sxy,
            syy,
            trace,
            lambda_max,
            lambda_min,
            mean_x,
            mean_y,
            n_valid: n,
        })
    }

    /// The residual scatter off the principal axis, `trace - lambda_max`.
    pub fn zeta(&self) -> f64 {
        self.lambda_min
    }
}

fn check_threshold(conf_threshold: f64) -> Result<(), HpsError> {
    if (0.0..=1.0).contains(&conf_threshold) {
        Ok(())
    } else {
        Err(HpsError::InvalidThreshold(conf_threshold))
    }
}

/// Scatter of the keypoints with confidence at or above `conf_threshold`.
pub fn scatter_summary(frame: &PoseFrame, conf_threshold: f64) -> Result<ScatterSummary, HpsError> {
    check_threshold(conf_threshold)?;
    ScatterSummary::from_points(&frame.valid_points(conf_threshold))
}

/// Unit eigenvector for `lambda_max`, signed so its first nonzero component is positive.
pub fn principal_axis(summary: &ScatterSummary) -> Result<[f64; 2], HpsError> {
    if !(summary.lambda_max > 0.0) {
        return Err(HpsError::UndefinedAxis);
    }
    let angle = 0.5 * (2.0 * summary.sxy).atan2(summary.sxx - summary.syy);
    let (mut y, mut x) = angle.sin_cos();
    // Components below this are rounding residue of an axis-aligned result.
    const AXIS_EPS: f64 = 1e-12;
    if x.abs() <= AXIS_EPS {
        x = 0.0;
    }
    if y.abs() <= AXIS_EPS {
        y = 0.0;
    }
    if x < 0.0 || (x == 0.0 && y < 0.0) {
        x = -x;
        y = -y;
    }
    Ok([x, y])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HpsStatus {
    Computed,
    Interpolated,
    Invalid,
}

impl HpsStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            HpsStatus::Computed => "computed",
            HpsStatus::Interpolated => "interpolated",
            HpsStatus::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpsValue {
    pub zeta: f64,
    pub status: HpsStatus,
}

impl HpsValue {
    pub fn computed(zeta: f64) -> Self {
        Self {
            zeta,
            status: HpsStatus::Computed,
        }
    }

    pub fn invalid() -> Self {
        Self {
            zeta: f64::NAN,
            status: HpsStatus::Invalid,
        }
    }
}

/// Pose scatter of a single frame.
pub fn hps(frame: &PoseFrame, conf_threshold: f64) -> Result<HpsValue, HpsError> {
    scatter_summary(frame, conf_threshold).map(|s| HpsValue::computed(s.zeta()))
}

/// Per-frame scatter with no gap filling: frames without enough keypoints are `Invalid`.
pub fn raw_hps(seq: &PoseSequence, conf_threshold: f64) -> Result<Vec<HpsValue>, HpsError> {
    check_threshold(conf_threshold)?;
    seq.frames
        .iter()
        .map(|f| match hps(f, conf_threshold) {
            Ok(v) => Ok(v),
            Err(HpsError::InsufficientKeypoints { .. }) => Ok(HpsValue::invalid()),
            Err(e) => Err(e),
        })
        .collect()
}

/// Per-frame pose scatter over a whole clip.
#[derive(Debug, Clone, PartialEq)]
pub struct HpsCurve {
    pub values: Vec<HpsValue>,
    pub smoothing_window: usize,
}

impl HpsCurve {
    /// A curve of computed values, unsmoothed. Mostly useful for synthetic signals.
    pub fn from_zetas(zetas: &[f64]) -> Self {
        Self {
            values: zetas.iter().copied().map(HpsValue::computed).collect(),
            smoothing_window: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zetas(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.zeta).collect()
    }
}

/// Scatter curve for a clip. Frames with too few keypoints are filled by linear
/// interpolation between the nearest computed frames (nearest value past either
/// end), then an optional centered moving average of odd width is applied.
pub fn hps_curve(
    seq: &PoseSequence,
    conf_threshold: f64,
    smoothing_window: usize,
) -> Result<HpsCurve, HpsError> {
    if smoothing_window.is_multiple_of(2) {
        return Err(HpsError::InvalidWindow(smoothing_window));
    }
    let mut values = raw_hps(seq, conf_threshold)?;
    fill_gaps(&mut values)?;
    if smoothing_window > 1 {
        let smoothed = moving_average(
            &values.iter().map(|v| v.zeta).collect::<Vec<_>>(),
            smoothing_window,
        );
        for (v, z) in values.iter_mut().zip(smoothed) {
            v.zeta = z;
        }
    }
    Ok(HpsCurve {
        values,
        smoothing_window,
    })
}

fn fill_gaps(values: &mut [HpsValue]) -> Result<(), HpsError> {
    let known: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.status == HpsStatus::Computed)
        .map(|(i, _)| i)
        .collect();
    let (&first, &last) = match (known.first(), known.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(HpsError::EmptySignal),
    };

    let interpolated = |zeta| HpsValue {
        zeta,
        status: HpsStatus::Interpolated,
    };
    let head = values[first].zeta;
    for v in &mut values[..first] {
        *v = interpolated(head);
    }
    let tail = values[last].zeta;
    for v in &mut values[last + 1..] {
        *v = interpolated(tail);
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (za, zb) = (values[a].zeta, values[b].zeta);
        let span = (b - a) as f64;
        for j in a + 1..b {
            let t = (j - a) as f64 / span;
            values[j] = interpolated(za + t * (zb - za));
        }
    }
    Ok(())
}

/// Centered moving average; windows are truncated at the boundaries.
pub fn moving_average(signal: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = signal.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            signal[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
