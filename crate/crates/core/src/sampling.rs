//! Key-frame detection on a pose-scatter curve and combined segment/key-frame
//! sample plans.
//!
//! All indices are 0-based. A key-frame center `j` must leave room for its
//! neighborhood: `delta <= j <= T - delta - 1`.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hps::{HpsCurve, HpsStatus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplingError {
    #[error("clip of {len} frames has no key-frame range for delta {delta} (need more than {} frames)", 2 * .delta)]
    RangeEmpty { len: usize, delta: usize },
    #[error("no valid scatter value in frames {start}..={end}")]
    NoValidValues { start: usize, end: usize },
    #[error("frame {index} is outside the key-frame range {start}..={end} for delta {delta}")]
    OutOfRange {
        index: usize,
        delta: usize,
        start: usize,
        end: usize,
    },
    #[error("cannot split {len} frames into {k} segments")]
    TooManySegments { len: usize, k: usize },
    #[error("segment count must be positive")]
    ZeroSegments,
}

/// A specific key frame: a peak of the scatter curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremeFrame {
    pub index: usize,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeNeighborhood {
    pub center: ExtremeFrame,
    pub radius: usize,
    /// `center - radius ..= center + radius`, without the center itself.
    pub members: Vec<usize>,
}

impl KeyframeNeighborhood {
    /// Members plus the center, ascending.
    pub fn candidates(&self) -> Range<usize> {
        self.center.index - self.radius..self.center.index + self.radius + 1
    }
}

fn keyframe_range(len: usize, delta: usize) -> Result<(usize, usize), SamplingError> {
    if len <= 2 * delta {
        return Err(SamplingError::RangeEmpty { len, delta });
    }
    Ok((delta, len - delta - 1))
}

/// Finds up to `count` key frames on the curve.
///
/// Candidates are the local maxima of the curve restricted to
/// `[delta, T - delta - 1]` (edges of that range compare only against their
/// inner neighbor). They are taken greedily by descending value, ties to the
/// smaller index, skipping any candidate closer than `2 * delta + 1` to one
/// already taken. The first result is therefore always the range argmax.
/// Invalid curve values are never selected.
pub fn find_specific_keyframes(
    curve: &HpsCurve,
    delta: usize,
    count: usize,
) -> Result<Vec<ExtremeFrame>, SamplingError> {
    let (start, end) = keyframe_range(curve.len(), delta)?;
    let value = |i: usize| {
        let v = curve.values[i];
        (v.status != HpsStatus::Invalid && !v.zeta.is_nan()).then_some(v.zeta)
    };

    let mut candidates: Vec<ExtremeFrame> = (start..=end)
        .filter_map(|i| {
            let z = value(i)?;
            let left_ok = i == start || value(i - 1).is_none_or(|l| z >= l);
            let right_ok = i == end || value(i + 1).is_none_or(|r| z >= r);
            (left_ok && right_ok).then_some(ExtremeFrame { index: i, zeta: z })
        })
        .collect();
    if candidates.is_empty() {
        // A valid range with no local maximum is impossible unless every value is invalid.
        return Err(SamplingError::NoValidValues { start, end });
    }
    candidates.sort_by(|a, b| b.zeta.total_cmp(&a.zeta).then(a.index.cmp(&b.index)));

    let separation = 2 * delta + 1;
    let mut picked: Vec<ExtremeFrame> = Vec::with_capacity(count);
    for c in candidates {
        if picked.len() == count {
            break;
        }
        if picked
            .iter()
            .all(|p| p.index.abs_diff(c.index) >= separation)
        {
            picked.push(c);
        }
    }
    Ok(picked)
}

/// The `2 * delta` frames around a key frame.
pub fn neighborhood(
    extreme: ExtremeFrame,
    delta: usize,
    len: usize,
) -> Result<KeyframeNeighborhood, SamplingError> {
    let (start, end) = keyframe_range(len, delta)?;
    if extreme.index < start || extreme.index > end {
        return Err(SamplingError::OutOfRange {
            index: extreme.index,
            delta,
            start,
            end,
        });
    }
    let members = (extreme.index - delta..=extreme.index + delta)
        .filter(|&j| j != extreme.index)
        .collect();
    Ok(KeyframeNeighborhood {
        center: extreme,
        radius: delta,
        members,
    })
}

/// Splits `[0, len)` into `k` contiguous, nonempty ranges `[floor(i*len/k), floor((i+1)*len/k))`.
pub fn segment_bounds(len: usize, k: usize) -> Result<Vec<Range<usize>>, SamplingError> {
    if k == 0 {
        return Err(SamplingError::ZeroSegments);
    }
    if k > len {
        return Err(SamplingError::TooManySegments { len, k });
    }
    let edge = |i: usize| (i as u128 * len as u128 / k as u128) as usize;
    Ok((0..k).map(|i| edge(i)..edge(i + 1)).collect())
}

/// Frame indices picked for one clip: one per segment, then one per key-frame set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub clip_id: String,
    pub seed: u64,
    pub k: usize,
    /// Number of key-frame sets actually sampled; may be below the requested count
    /// when the curve has fewer separated peaks.
    #[serde(rename = "L")]
    pub l: usize,
    pub delta: usize,
    pub segment_picks: Vec<usize>,
    pub keyframe_picks: Vec<usize>,
}

impl SamplePlan {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }

    pub fn from_json(input: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(input)
    }
}

/// Builds a reproducible sample plan.
///
/// Draws come from ChaCha8 seeded with `seed`, in a fixed order: one uniform
/// index per segment (ascending), then one uniform index per key-frame set
/// (center plus neighborhood), ascending by center.
pub fn make_sample_plan(
    curve: &HpsCurve,
    k: usize,
    keyframes: usize,
    delta: usize,
    seed: u64,
) -> Result<SamplePlan, SamplingError> {
    let len = curve.len();
    let segments = segment_bounds(len, k)?;
    let mut sets = if keyframes > 0 {
        find_specific_keyframes(curve, delta, keyframes)?
            .into_iter()
            .map(|e| neighborhood(e, delta, len))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    sets.sort_by_key(|n| n.center.index);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segment_picks = segments.into_iter().map(|r| rng.gen_range(r)).collect();
    let keyframe_picks = sets.iter().map(|n| rng.gen_range(n.candidates())).collect();

    Ok(SamplePlan {
        clip_id: String::new(),
        seed,
        k,
        l: sets.len(),
        delta,
        segment_picks,
        keyframe_picks,
    })
}
