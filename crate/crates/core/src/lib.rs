//! Pose-sequence analysis for figure-skating clips.
//!
//! - [`pose_io`]: keypoint JSON and clip manifest CSV parsing and writing.
//! - [`hps`]: per-frame human pose scatter (residual variance off the principal axis).
//! - [`sampling`]: key-frame detection on the scatter curve and seeded sample plans.
//! - [`pipeline`]: snippet scoring, consensus, fusion and softmax.
//! - [`scoring`]: element/program scores and jump-phase segmentation.
//! - [`cli`]: the `pose-scatter` command-line tool.

pub mod cli;
pub mod hps;
pub mod pipeline;
pub mod pose_io;
pub mod sampling;
pub mod scoring;

pub use hps::{
    hps, hps_curve, principal_axis, scatter_summary, HpsCurve, HpsStatus, HpsValue, ScatterSummary,
};
pub use pipeline::{consensus, ktsn_predict, softmax, ProbVector, ScoreVector, SnippetScorer};
pub use pose_io::{
    parse_manifest, parse_pose_sequence, write_pose_sequence, ClipAnnotation, Keypoint, PoseFrame,
    PoseSequence,
};
pub use sampling::{
    find_specific_keyframes, make_sample_plan, neighborhood, segment_bounds, ExtremeFrame,
    SamplePlan,
};
pub use scoring::{
    score_action, score_program, segment_phases, ActionScore, PhaseSegmentation, ProgramScore,
};
