//! Figure-skating element and program scoring, plus heuristic jump-phase
//! segmentation from the pose-scatter curve.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::hps::HpsCurve;
use crate::pose_io::ClipAnnotation;
use crate::sampling::ExtremeFrame;

/// Base-value multiplier for elements performed in the second half of a program.
pub const SECOND_HALF_BONUS: f64 = 1.1;

/// Default fraction of the peak scatter below which frames count as airborne.
pub const DEFAULT_AIR_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionScore {
    #[serde(rename = "type")]
    pub action_type: String,
    pub bv_base: f64,
    pub second_half: bool,
    pub bv_effective: f64,
    pub goe: f64,
    pub total: f64,
}

impl fmt::Display for ActionScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} BV {:.2}{} GOE {:+.2} = {:.2}",
            self.action_type,
            self.bv_effective,
            if self.second_half { " (x1.1)" } else { "" },
            self.goe,
            self.total
        )
    }
}

/// BV (with the second-half bonus) plus GOE. The bonus never touches GOE.
pub fn score_action(annotation: &ClipAnnotation) -> ActionScore {
    let bv_effective = if annotation.second_half {
        annotation.bv_base * SECOND_HALF_BONUS
    } else {
        annotation.bv_base
    };
    ActionScore {
        action_type: annotation.action_type.clone(),
        bv_base: annotation.bv_base,
        second_half: annotation.second_half,
        bv_effective,
        goe: annotation.goe,
        total: bv_effective + annotation.goe,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramScore {
    pub action_scores: Vec<ActionScore>,
    /// Positions voided because their action type already appeared earlier.
    pub zeroed_indices: BTreeSet<usize>,
    pub total: f64,
}

impl ProgramScore {
    pub fn is_zeroed(&self, index: usize) -> bool {
        self.zeroed_indices.contains(&index)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            #[serde(flatten)]
            score: &'a ActionScore,
            zeroed: bool,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            actions: Vec<Row<'a>>,
            total: f64,
        }
        let out = Out {
            actions: self
                .action_scores
                .iter()
                .enumerate()
                .map(|(i, score)| Row {
                    score,
                    zeroed: self.is_zeroed(i),
                })
                .collect(),
            total: self.total,
        };
        let mut s = serde_json::to_string_pretty(&out).expect("program score serializes");
        s.push('\n');
        s
    }
}

impl fmt::Display for ProgramScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.action_scores.iter().enumerate() {
            let mark = if self.is_zeroed(i) {
                " [repeated: 0.00]"
            } else {
                ""
            };
            writeln!(f, "{:>3}. {a}{mark}", i + 1)?;
        }
        write!(f, "total {:.2}", self.total)
    }
}

/// Scores a program in order. Any action type seen before scores zero; only its
/// first occurrence counts. Types compare by exact string equality.
pub fn score_program(annotations: &[ClipAnnotation]) -> ProgramScore {
    let mut seen = HashSet::new();
    let mut zeroed_indices = BTreeSet::new();
    let mut total = 0.0;
    let action_scores = annotations
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let score = score_action(a);
            if seen.insert(a.action_type.as_str()) {
                total += score.total;
            } else {
                zeroed_indices.insert(i);
            }
            score
        })
        .collect();
    ProgramScore {
        action_scores,
        zeroed_indices,
        total,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhaseError {
    #[error("clip too short for four phases: {0}")]
    ShortClip(String),
    #[error("key frame {index} outside [{delta}, {}] for a {len}-frame clip", .len.saturating_sub(.delta + 1))]
    InvalidKeyframe {
        index: usize,
        delta: usize,
        len: usize,
    },
    #[error("air threshold must be in (0, 1], got {0}")]
    InvalidThreshold(String),
}

/// Four contiguous phases partitioning `[0, T)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseSegmentation {
    pub preparation: Range<usize>,
    pub take_off: Range<usize>,
    pub air: Range<usize>,
    pub landing: Range<usize>,
}

impl PhaseSegmentation {
    pub fn phases(&self) -> [(&'static str, &Range<usize>); 4] {
        [
            ("preparation", &self.preparation),
            ("take_off", &self.take_off),
            ("air", &self.air),
            ("landing", &self.landing),
        ]
    }

    /// Whether the phases are nonempty, ordered, and tile `[0, len)`.
    pub fn partitions(&self, len: usize) -> bool {
        let mut cursor = 0;
        for (_, r) in self.phases() {
            if r.start != cursor || r.end <= r.start {
                return false;
            }
            cursor = r.end;
        }
        cursor == len
    }
}

/// Splits a jump clip around its key frame.
///
/// Take-off is `[j - delta, j + delta]`. Air is the longest run right after
/// take-off whose scatter stays below `theta * zeta(j)`, at least one frame.
/// Landing is the rest of the clip and preparation everything before take-off.
/// When the air run reaches the end of the clip its last frame becomes landing.
pub fn segment_phases(
    curve: &HpsCurve,
    keyframe: ExtremeFrame,
    delta: usize,
    theta: f64,
) -> Result<PhaseSegmentation, PhaseError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(PhaseError::InvalidThreshold(theta.to_string()));
    }
    let len = curve.len();
    let j = keyframe.index;
    if len <= 2 * delta || j < delta || j + delta >= len {
        return Err(PhaseError::InvalidKeyframe {
            index: j,
            delta,
            len,
        });
    }
    let take_off = j - delta..j + delta + 1;
    if take_off.start == 0 {
        return Err(PhaseError::ShortClip(format!(
            "no preparation frames before take-off at frame {j}"
        )));
    }
    let air_start = take_off.end;
    if len - air_start < 2 {
        return Err(PhaseError::ShortClip(format!(
            "{} frame(s) after take-off, need at least 2",
            len - air_start
        )));
    }

    let cutoff = theta * curve.values[j].zeta;
    let run = curve.values[air_start..]
        .iter()
        .take_while(|v| v.zeta < cutoff)
        .count();
    let air_end = air_start + run.clamp(1, len - air_start - 1);

    Ok(PhaseSegmentation {
        preparation: 0..take_off.start,
        take_off,
        air: air_start..air_end,
        landing: air_end..len,
    })
}
