//! Video-level prediction from per-snippet class scores.
//!
//! Segment picks and key-frame picks are scored independently by a
//! [`SnippetScorer`], each branch is reduced by a consensus function, the two
//! branch scores are fused convexly and the result goes through softmax.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hps::{principal_axis, scatter_summary, HpsError, DEFAULT_CONF_THRESHOLD};
use crate::pose_io::PoseSequence;
use crate::sampling::SamplePlan;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("score vector needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("duplicate class label {0:?}")]
    DuplicateLabel(String),
    #[error("{labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("score {index} is not finite")]
    NonFinite { index: usize },
    #[error("class labels differ between snippets")]
    LabelMismatch,
    #[error("consensus over an empty snippet list")]
    EmptyConsensus,
    #[error("fusion weight must lie in [0,1], got {0}")]
    InvalidFusionWeight(f64),
    #[error("plan picks frame {index} but the clip has {len} frames")]
    FrameOutOfRange { index: usize, len: usize },
    #[error("plan has no segment picks")]
    EmptyPlan,
    #[error("snippet {snippet} (frame {frame}): {source}")]
    Scorer {
        snippet: usize,
        frame: usize,
        #[source]
        source: ScorerError,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScorerError {
    #[error("no score for frame {0}")]
    MissingFrame(usize),
    #[error("frame {frame} is outside the clip")]
    FrameOutOfRange { frame: usize },
    #[error("class {0:?} has no prototypes")]
    EmptyClass(String),
    #[error("frame features: {0}")]
    Features(#[from] HpsError),
    #[error("score file: {0}")]
    Format(String),
    #[error(transparent)]
    Scores(Box<PipelineError>),
}

/// Raw per-class scores (logits) for one snippet or one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    class_labels: Vec<String>,
    scores: Vec<f64>,
}

fn check_labels(labels: &[String]) -> Result<(), PipelineError> {
    if labels.len() < 2 {
        return Err(PipelineError::TooFewClasses(labels.len()));
    }
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(PipelineError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

impl ScoreVector {
    pub fn new(class_labels: Vec<String>, scores: Vec<f64>) -> Result<Self, PipelineError> {
        check_labels(&class_labels)?;
        if class_labels.len() != scores.len() {
            return Err(PipelineError::LengthMismatch {
                labels: class_labels.len(),
                scores: scores.len(),
            });
        }
        if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
            return Err(PipelineError::NonFinite { index });
        }
        Ok(Self {
            class_labels,
            scores,
        })
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbVector {
    pub class_labels: Vec<String>,
    pub probs: Vec<f64>,
}

impl ProbVector {
    /// Index of the most probable class, first on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn predicted_label(&self) -> &str {
        &self.class_labels[self.argmax()]
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            class_labels: &'a [String],
            probs: &'a [f64],
            predicted: &'a str,
        }
        let mut s = serde_json::to_string_pretty(&Out {
            class_labels: &self.class_labels,
            probs: &self.probs,
            predicted: self.predicted_label(),
        })
        .expect("probabilities serialize");
        s.push('\n');
        s
    }
}

/// Aggregation applied over snippet scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Consensus {
    #[default]
    Mean,
    Max,
}

pub fn consensus(snippets: &[ScoreVector], kind: Consensus) -> Result<ScoreVector, PipelineError> {
    let (first, rest) = snippets
        .split_first()
        .ok_or(PipelineError::EmptyConsensus)?;
    if rest.iter().any(|s| s.class_labels != first.class_labels) {
        return Err(PipelineError::LabelMismatch);
    }
    let mut acc = first.scores.clone();
    for s in rest {
        for (a, &b) in acc.iter_mut().zip(&s.scores) {
            match kind {
                Consensus::Mean => *a += b,
                Consensus::Max => *a = a.max(b),
            }
        }
    }
    if kind == Consensus::Mean {
        let n = snippets.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
    }
    Ok(ScoreVector {
        class_labels: first.class_labels.clone(),
        scores: acc,
    })
}

/// Max-shifted softmax.
pub fn softmax(v: &ScoreVector) -> ProbVector {
    let max = v.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    ProbVector {
        class_labels: v.class_labels.clone(),
        probs: exps.into_iter().map(|e| e / total).collect(),
    }
}

/// Scores single-frame snippets. Implementations must be deterministic.
pub trait SnippetScorer: Send + Sync {
    fn class_labels(&self) -> &[String];

    fn score(&self, seq: &PoseSequence, frame: usize) -> Result<ScoreVector, ScorerError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Weight of the segment branch; the key-frame branch gets `1 - fusion_weight`.
    pub fusion_weight: f64,
    pub consensus: Consensus,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            fusion_weight: 0.5,
            consensus: Consensus::Mean,
        }
    }
}

fn score_branch(
    seq: &PoseSequence,
    picks: &[usize],
    offset: usize,
    scorer: &dyn SnippetScorer,
    kind: Consensus,
) -> Result<ScoreVector, PipelineError> {
    let scores = picks
        .iter()
        .enumerate()
        .map(|(i, &frame)| {
            scorer
                .score(seq, frame)
                .map_err(|source| PipelineError::Scorer {
                    snippet: offset + i,
                    frame,
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    consensus(&scores, kind)
}

/// Video-level class probabilities for a clip and its sample plan.
///
/// Snippets are numbered segment picks first, then key-frame picks. With no
/// key-frame picks the segment branch alone is used.
pub fn ktsn_predict(
    seq: &PoseSequence,
    plan: &SamplePlan,
    scorer: &dyn SnippetScorer,
    config: FusionConfig,
) -> Result<ProbVector, PipelineError> {
    let w = config.fusion_weight;
    if !(0.0..=1.0).contains(&w) {
        return Err(PipelineError::InvalidFusionWeight(w));
    }
    if plan.segment_picks.is_empty() {
        return Err(PipelineError::EmptyPlan);
    }
    let len = seq.len();
    if let Some(&index) = plan
        .segment_picks
        .iter()
        .chain(&plan.keyframe_picks)
        .find(|&&i| i >= len)
    {
        return Err(PipelineError::FrameOutOfRange { index, len });
    }

    let seg = score_branch(seq, &plan.segment_picks, 0, scorer, config.consensus)?;
    if plan.keyframe_picks.is_empty() {
        return Ok(softmax(&seg));
    }
    let key = score_branch(
        seq,
        &plan.keyframe_picks,
        plan.segment_picks.len(),
        scorer,
        config.consensus,
    )?;
    if key.class_labels != seg.class_labels {
        return Err(PipelineError::LabelMismatch);
    }
    let fused = seg
        .scores
        .iter()
        .zip(&key.scores)
        .map(|(s, k)| w * s + (1.0 - w) * k)
        .collect();
    Ok(softmax(&ScoreVector {
        class_labels: seg.class_labels,
        scores: fused,
    }))
}

/// Hand-crafted per-frame descriptor used by [`ToyScorer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseFeatures {
    pub zeta: f64,
    pub n_valid: f64,
    /// Principal-axis angle in radians, in `(-pi/2, pi/2]`; 0 for zero scatter.
    pub axis_angle: f64,
    pub trace: f64,
}

impl PoseFeatures {
    pub fn of_frame(
        frame: &crate::pose_io::PoseFrame,
        conf_threshold: f64,
    ) -> Result<Self, HpsError> {
        let s = scatter_summary(frame, conf_threshold)?;
        let axis_angle = match principal_axis(&s) {
            Ok([x, y]) => y.atan2(x),
            Err(_) => 0.0,
        };
        Ok(Self {
            zeta: s.zeta(),
            n_valid: s.n_valid as f64,
            axis_angle,
            trace: s.trace,
        })
    }

    fn as_array(&self) -> [f64; 4] {
        [self.zeta, self.n_valid, self.axis_angle, self.trace]
    }

    fn squared_distance(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).powi(2))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrototypes {
    pub label: String,
    pub prototypes: Vec<PoseFeatures>,
}

/// Nearest-prototype scorer: class score is the negative squared feature
/// distance to that class's closest prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScorer {
    labels: Vec<String>,
    classes: Vec<ClassPrototypes>,
    conf_threshold: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PrototypeFile {
    #[serde(default)]
    conf_threshold: Option<f64>,
    classes: Vec<ClassPrototypes>,
}

impl ToyScorer {
    pub fn new(classes: Vec<ClassPrototypes>, conf_threshold: f64) -> Result<Self, ScorerError> {
        if let Some(c) = classes.iter().find(|c| c.prototypes.is_empty()) {
            return Err(ScorerError::EmptyClass(c.label.clone()));
        }
        let labels: Vec<String> = classes.iter().map(|c| c.label.clone()).collect();
        check_labels(&labels).map_err(|e| ScorerError::Scores(Box::new(e)))?;
        Ok(Self {
            labels,
            classes,
            conf_threshold,
        })
    }

    /// Reads `{"conf_threshold"?: f64, "classes": [{"label", "prototypes": [{"zeta", "n_valid", "axis_angle", "trace"}]}]}`.
    pub fn from_json(input: &[u8]) -> Result<Self, ScorerError> {
        let file: PrototypeFile =
            serde_json::from_slice(input).map_err(|e| ScorerError::Format(e.to_string()))?;
        Self::new(
            file.classes,
            file.conf_threshold.unwrap_or(DEFAULT_CONF_THRESHOLD),
        )
    }
}

impl SnippetScorer for ToyScorer {
    fn class_labels(&self) -> &[String] {
        &self.labels
    }

    fn score(&self, seq: &PoseSequence, frame: usize) -> Result<ScoreVector, ScorerError> {
        let f = seq
            .frames
            .get(frame)
            .ok_or(ScorerError::FrameOutOfRange { frame })?;
        let features = PoseFeatures::of_frame(f, self.conf_threshold)?;
        let scores = self
            .classes
            .iter()
            .map(|c| {
                let nearest = c
                    .prototypes
                    .iter()
                    .map(|p| features.squared_distance(p))
                    .fold(f64::INFINITY, f64::min);
                -nearest
            })
            .collect();
        ScoreVector::new(self.labels.clone(), scores).map_err(|e| ScorerError::Scores(Box::new(e)))
    }
}

/// Precomputed per-frame scores, e.g. from an externally trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScores {
    pub clip_id: String,
    pub class_labels: Vec<String>,
    pub frames: BTreeMap<usize, Vec<f64>>,
}

impl ExternalScores {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("scores serialize");
        out.push(b'\n');
        out
    }
}

/// Looks up snippet scores from a score file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScorer {
    scores: ExternalScores,
}

impl ExternalScorer {
    pub fn new(scores: ExternalScores) -> Result<Self, ScorerError> {
        let wrap = |e| ScorerError::Scores(Box::new(e));
        check_labels(&scores.class_labels).map_err(wrap)?;
        for (frame, row) in &scores.frames {
            ScoreVector::new(scores.class_labels.clone(), row.clone())
                .map_err(|e| ScorerError::Format(format!("frame {frame}: {e}")))?;
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &ExternalScores {
        &self.scores
    }
}

/// Parses a score file: `{"clip_id", "class_labels": [..], "frames": {"<index>": [..]}}`.
pub fn load_external_scores(input: &[u8]) -> Result<ExternalScorer, ScorerError> {
    let scores: ExternalScores =
        serde_json::from_slice(input).map_err(|e| ScorerError::Format(e.to_string()))?;
    ExternalScorer::new(scores)
}

impl SnippetScorer for ExternalScorer {
    fn class_labels(&self) -> &[String] {
        &self.scores.class_labels
    }

    fn score(&self, _seq: &PoseSequence, frame: usize) -> Result<ScoreVector, ScorerError> {
        let row = self
            .scores
            .frames
            .get(&frame)
            .ok_or(ScorerError::MissingFrame(frame))?;
        Ok(ScoreVector {
            class_labels: self.scores.class_labels.clone(),
            scores: row.clone(),
        })
    }
}
