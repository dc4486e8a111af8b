//! Keypoint sequence and clip manifest I/O.
//!
//! Keypoint files are JSON:
//!
//! ```text
//! {"clip_id": "...", "fps": 30.0,
//!  "frames": [{"frame_index": 0, "keypoints": [[x, y, confidence], ...18]}]}
//! ```
//!
//! Manifests are UTF-8 CSV with the header
//! `clip_id,action_type,bv_base,second_half,goe,skater_name,skater_gender,skater_age,coach,music`.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of keypoints per frame (COCO-18 layout).
pub const NUM_KEYPOINTS: usize = 18;

/// COCO-18 keypoint names in positional order.
pub const COCO18_NAMES: [&str; NUM_KEYPOINTS] = [
    "nose",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_eye",
    "left_eye",
    "right_ear",
    "left_ear",
];

/// The ten action classes of the figure-skating benchmark. Other labels are
/// accepted by the manifest parser but reported as non-standard.
pub const STANDARD_ACTIONS: [&str; 10] = [
    "ChComboSpin4",
    "FlyCamelSpin4",
    "ChoreoSequence1",
    "StepSequence3",
    "2Axel",
    "3Loop",
    "3Flip",
    "3Axel",
    "3Lutz",
    "3Lutz_3Toeloop",
];

/// A single detected (or missed) keypoint. `confidence == 0` means not detected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub const MISSING: Keypoint = Keypoint {
        x: 0.0,
        y: 0.0,
        confidence: 0.0,
    };

    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    /// Whether this keypoint counts at the given confidence threshold.
    /// Undetected keypoints never count, even with a zero threshold.
    #[inline]
    pub fn is_valid(&self, conf_threshold: f64) -> bool {
        self.confidence > 0.0 && self.confidence >= conf_threshold
    }
}

/// One frame of 18 keypoints in COCO-18 order.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub frame_index: usize,
    pub keypoints: [Keypoint; NUM_KEYPOINTS],
}

impl PoseFrame {
    pub fn new(frame_index: usize, keypoints: [Keypoint; NUM_KEYPOINTS]) -> Self {
        Self {
            frame_index,
            keypoints,
        }
    }

    /// Builds a frame from up to 18 fully-confident points; remaining slots are missing.
    pub fn from_points(frame_index: usize, points: &[[f64; 2]]) -> Self {
        let mut keypoints = [Keypoint::MISSING; NUM_KEYPOINTS];
        for (slot, p) in keypoints.iter_mut().zip(points) {
            *slot = Keypoint::new(p[0], p[1], 1.0);
        }
        Self::new(frame_index, keypoints)
    }

    /// Coordinates of the keypoints that pass `conf_threshold`, in positional order.
    pub fn valid_points(&self, conf_threshold: f64) -> Vec<[f64; 2]> {
        self.keypoints
            .iter()
            .filter(|k| k.is_valid(conf_threshold))
            .map(|k| [k.x, k.y])
            .collect()
    }
}

/// An ordered, contiguous sequence of pose frames for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub clip_id: String,
    pub fps: f64,
    pub frames: Vec<PoseFrame>,
}

impl PoseSequence {
    /// Validates and builds a sequence. Frames are sorted by index first.
    pub fn new(
        clip_id: impl Into<String>,
        fps: f64,
        mut frames: Vec<PoseFrame>,
    ) -> Result<Self, PoseIoError> {
        frames.sort_by_key(|f| f.frame_index);
        let seq = Self {
            clip_id: clip_id.into(),
            fps,
            frames,
        };
        match seq.violations().into_iter().next() {
            Some(err) => Err(err),
            None => Ok(seq),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    fn violations(&self) -> Vec<PoseIoError> {
        let mut out = Vec::new();
        if !(self.fps.is_finite() && self.fps > 0.0) {
            out.push(PoseIoError::InvalidFps(self.fps));
        }
        if self.frames.is_empty() {
            out.push(PoseIoError::EmptySequence);
        }
        for (position, frame) in self.frames.iter().enumerate() {
            if frame.frame_index != position {
                out.push(PoseIoError::NonContiguous {
                    position,
                    found: frame.frame_index,
                });
            }
            for (k, kp) in frame.keypoints.iter().enumerate() {
                check_keypoint(frame.frame_index, position, k, kp, &mut out);
            }
        }
        out
    }
}

fn check_keypoint(
    frame: usize,
    position: usize,
    k: usize,
    kp: &Keypoint,
    out: &mut Vec<PoseIoError>,
) {
    for (field, value) in [(0, kp.x), (1, kp.y)] {
        if !value.is_finite() {
            out.push(PoseIoError::NonFinite {
                frame,
                path: format!("frames[{position}].keypoints[{k}][{field}]"),
            });
        }
    }
    if !(0.0..=1.0).contains(&kp.confidence) {
        out.push(PoseIoError::ConfidenceRange {
            frame,
            path: format!("frames[{position}].keypoints[{k}][2]"),
            value: kp.confidence,
        });
    }
}

/// Supported keypoint input encodings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PoseFormat {
    #[default]
    Json,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseIoError {
    #[error("malformed keypoint file: {0}")]
    Syntax(String),
    #[error("frame {frame}: expected {NUM_KEYPOINTS} keypoints, got {got}")]
    KeypointCount { frame: usize, got: usize },
    #[error("frame {frame}: {path}: expected [x, y, confidence], got {got} values")]
    KeypointArity {
        frame: usize,
        path: String,
        got: usize,
    },
    #[error("non-contiguous frame_index at position {position} (found {found})")]
    NonContiguous { position: usize, found: usize },
    #[error("frame {frame}: {path}: confidence {value} outside [0,1]")]
    ConfidenceRange {
        frame: usize,
        path: String,
        value: f64,
    },
    #[error("frame {frame}: {path}: coordinate is not finite")]
    NonFinite { frame: usize, path: String },
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("sequence contains no frames")]
    EmptySequence,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSequence {
    clip_id: String,
    fps: f64,
    frames: Vec<RawFrame>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    frame_index: usize,
    keypoints: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct FrameOut {
    frame_index: usize,
    keypoints: Vec<[f64; 3]>,
}

/// Parses a keypoint file, returning the first violation found.
pub fn parse_pose_sequence(input: &[u8], format: PoseFormat) -> Result<PoseSequence, PoseIoError> {
    match validate_pose_bytes(input, format) {
        Ok(seq) => Ok(seq),
        Err(mut errors) => Err(errors.swap_remove(0)),
    }
}

/// Parses a keypoint file and reports every violation rather than just the first.
/// The error list is never empty.
pub fn validate_pose_bytes(
    input: &[u8],
    format: PoseFormat,
) -> Result<PoseSequence, Vec<PoseIoError>> {
    let PoseFormat::Json = format;
    let raw: RawSequence =
        serde_json::from_slice(input).map_err(|e| vec![PoseIoError::Syntax(e.to_string())])?;

    let mut errors = Vec::new();
    let mut frames = Vec::with_capacity(raw.frames.len());
    for (position, rf) in raw.frames.into_iter().enumerate() {
        if rf.keypoints.len() != NUM_KEYPOINTS {
            errors.push(PoseIoError::KeypointCount {
                frame: rf.frame_index,
                got: rf.keypoints.len(),
            });
            continue;
        }
        let mut keypoints = [Keypoint::MISSING; NUM_KEYPOINTS];
        let mut arity_ok = true;
        for (k, triple) in rf.keypoints.iter().enumerate() {
            if let [x, y, c] = triple[..] {
                keypoints[k] = Keypoint::new(x, y, c);
            } else {
                arity_ok = false;
                errors.push(PoseIoError::KeypointArity {
                    frame: rf.frame_index,
                    path: format!("frames[{position}].keypoints[{k}]"),
                    got: triple.len(),
                });
            }
        }
        if arity_ok {
            frames.push(PoseFrame::new(rf.frame_index, keypoints));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    frames.sort_by_key(|f| f.frame_index);
    let seq = PoseSequence {
        clip_id: raw.clip_id,
        fps: raw.fps,
        frames,
    };
    let violations = seq.violations();
    if violations.is_empty() {
        Ok(seq)
    } else {
        Err(violations)
    }
}

/// Serializes a sequence to the keypoint JSON layout, one frame per line.
pub fn write_pose_sequence(seq: &PoseSequence) -> Vec<u8> {
    let mut out = Vec::new();
    // Writing into a Vec cannot fail, and the value types always serialize.
    let clip_id = serde_json::to_string(&seq.clip_id).expect("string serializes");
    let fps = serde_json::to_string(&seq.fps).expect("finite fps serializes");
    let _ = write!(out, "{{\"clip_id\":{clip_id},\"fps\":{fps},\"frames\":[");
    for (i, frame) in seq.frames.iter().enumerate() {
        let row = FrameOut {
            frame_index: frame.frame_index,
            keypoints: frame
                .keypoints
                .iter()
                .map(|k| [k.x, k.y, k.confidence])
                .collect(),
        };
        out.extend_from_slice(if i == 0 { b"\n" } else { b",\n" });
        serde_json::to_writer(&mut out, &row).expect("finite frame serializes");
    }
    out.extend_from_slice(b"\n]}\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
    Unknown,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::F => "F",
            Gender::M => "M",
            Gender::Unknown => "unknown",
        })
    }
}

/// One manifest record describing an annotated clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipAnnotation {
    pub clip_id: String,
    pub action_type: String,
    pub bv_base: f64,
    pub second_half: bool,
    pub goe: f64,
    pub skater_name: String,
    pub skater_gender: Gender,
    pub skater_age: Option<u32>,
    pub coach: String,
    pub music: String,
}

impl ClipAnnotation {
    /// Minimal annotation for scoring; metadata fields are left empty.
    pub fn new(action_type: impl Into<String>, bv_base: f64, second_half: bool, goe: f64) -> Self {
        Self {
            clip_id: String::new(),
            action_type: action_type.into(),
            bv_base,
            second_half,
            goe,
            skater_name: String::new(),
            skater_gender: Gender::Unknown,
            skater_age: None,
            coach: String::new(),
            music: String::new(),
        }
    }

    pub fn is_standard_action(&self) -> bool {
        STANDARD_ACTIONS.contains(&self.action_type.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifestError {
    #[error("malformed manifest: {0}")]
    Csv(String),
    #[error("record {record}: missing required field `{field}`")]
    MissingField { record: usize, field: &'static str },
    #[error("record {record}: field `{field}`: invalid value {value:?} ({reason})")]
    InvalidField {
        record: usize,
        field: &'static str,
        value: String,
        reason: &'static str,
    },
}

pub const MANIFEST_HEADER: [&str; 10] = [
    "clip_id",
    "action_type",
    "bv_base",
    "second_half",
    "goe",
    "skater_name",
    "skater_gender",
    "skater_age",
    "coach",
    "music",
];

/// Parses a manifest, returning the first error.
pub fn parse_manifest(input: &[u8]) -> Result<Vec<ClipAnnotation>, ManifestError> {
    validate_manifest_bytes(input).map_err(|mut e| e.swap_remove(0))
}

/// Parses a manifest and reports every bad record. Record numbers are 1-based
/// data rows (the header is not counted). The error list is never empty.
pub fn validate_manifest_bytes(input: &[u8]) -> Result<Vec<ClipAnnotation>, Vec<ManifestError>> {
    if input.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| vec![ManifestError::Csv(e.to_string())])?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let columns: Vec<Option<usize>> = MANIFEST_HEADER.iter().map(|n| column(n)).collect();

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let record = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(ManifestError::Csv(e.to_string()));
                continue;
            }
        };
        let get = |idx: usize| -> Option<&str> {
            columns[idx]
                .and_then(|c| row.get(c))
                .filter(|s| !s.is_empty())
        };
        match parse_record(record, get) {
            Ok(a) => {
                if !a.is_standard_action() {
                    log::warn!(
                        "record {record}: non-standard action type {:?}",
                        a.action_type
                    );
                }
                records.push(a)
            }
            Err(mut e) => errors.append(&mut e),
        }
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(errors)
    }
}

fn parse_record<'a>(
    record: usize,
    get: impl Fn(usize) -> Option<&'a str>,
) -> Result<ClipAnnotation, Vec<ManifestError>> {
    let mut errors = Vec::new();
    let mut required = |idx: usize, field: &'static str| -> Option<&'a str> {
        let v = get(idx);
        if v.is_none() {
            errors.push(ManifestError::MissingField { record, field });
        }
        v
    };
    let action_type = required(1, "action_type");
    let bv_raw = required(2, "bv_base");
    let goe_raw = required(4, "goe");

    let invalid =
        |field: &'static str, value: &str, reason: &'static str| ManifestError::InvalidField {
            record,
            field,
            value: value.to_string(),
            reason,
        };

    let bv_base = bv_raw.and_then(|s| match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
        Ok(_) => {
            errors.push(invalid("bv_base", s, "must be finite and nonnegative"));
            None
        }
        Err(_) => {
            errors.push(invalid("bv_base", s, "not a number"));
            None
        }
    });
    let goe = goe_raw.and_then(|s| match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        Ok(_) => {
            errors.push(invalid("goe", s, "must be finite"));
            None
        }
        Err(_) => {
            errors.push(invalid("goe", s, "not a number"));
            None
        }
    });
    let second_half = match get(3) {
        None => false,
        Some(s) if s.eq_ignore_ascii_case("true") => true,
        Some(s) if s.eq_ignore_ascii_case("false") => false,
        Some(s) => {
            errors.push(invalid("second_half", s, "expected true or false"));
            false
        }
    };
    let skater_gender = match get(6) {
        None => Gender::Unknown,
        Some("F") | Some("f") => Gender::F,
        Some("M") | Some("m") => Gender::M,
        Some(s) if s.eq_ignore_ascii_case("unknown") => Gender::Unknown,
        Some(s) => {
            errors.push(invalid("skater_gender", s, "expected F, M or unknown"));
            Gender::Unknown
        }
    };
    let skater_age = match get(7) {
        None => None,
        Some(s) if s.eq_ignore_ascii_case("unknown") => None,
        Some(s) => match s.parse::<u32>() {
            Ok(v) => Some(v),
            Err(_) => {
                errors.push(invalid("skater_age", s, "expected a nonnegative integer"));
                None
            }
        },
    };

    match (action_type, bv_base, goe) {
        (Some(action_type), Some(bv_base), Some(goe)) if errors.is_empty() => Ok(ClipAnnotation {
            clip_id: get(0).unwrap_or_default().to_string(),
            action_type: action_type.to_string(),
            bv_base,
            second_half,
            goe,
            skater_name: get(5).unwrap_or_default().to_string(),
            skater_gender,
            skater_age,
            coach: get(8).unwrap_or_default().to_string(),
            music: get(9).unwrap_or_default().to_string(),
        }),
        _ => Err(errors),
    }
}
