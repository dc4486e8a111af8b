//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or domain error, 2 I/O error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::hps::{hps_curve, DEFAULT_CONF_THRESHOLD};
use crate::pipeline::{ktsn_predict, load_external_scores, FusionConfig, SnippetScorer, ToyScorer};
use crate::pose_io::{
    parse_manifest, parse_pose_sequence, validate_manifest_bytes, validate_pose_bytes, PoseFormat,
    PoseSequence,
};
use crate::sampling::{find_specific_keyframes, make_sample_plan, SamplePlan};
use crate::scoring::{score_program, segment_phases, PhaseSegmentation, DEFAULT_AIR_THRESHOLD};

#[derive(Debug)]
pub enum CliError {
    /// Bad input data or a failed computation.
    Domain(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Io(m) => m,
        }
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Parameters shared by the clip-level commands.
#[derive(Debug, Clone, Copy, PartialEq, Args)]
pub struct RunConfig {
    /// Minimum keypoint confidence to count a keypoint.
    #[arg(long = "conf-threshold", default_value_t = DEFAULT_CONF_THRESHOLD)]
    pub conf_threshold: f64,
    /// Odd moving-average window applied to the scatter curve (1 = off).
    #[arg(long = "smooth", default_value_t = 1)]
    pub smoothing_window: usize,
    /// Number of equal-duration segments.
    #[arg(long = "k", default_value_t = 3)]
    pub k: usize,
    /// Number of key-frame sets.
    #[arg(long = "L", default_value_t = 1)]
    pub l: usize,
    /// Key-frame neighborhood radius in frames.
    #[arg(long = "delta", default_value_t = 2)]
    pub delta: usize,
    #[arg(long = "seed", default_value_t = 0)]
    pub seed: u64,
    /// Weight of the segment branch when fusing with the key-frame branch.
    #[arg(long = "fusion-weight", default_value_t = 0.5)]
    pub fusion_weight: f64,
    /// Air-phase cutoff as a fraction of the peak scatter.
    #[arg(long = "theta", default_value_t = DEFAULT_AIR_THRESHOLD)]
    pub theta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            smoothing_window: 1,
            k: 3,
            l: 1,
            delta: 2,
            seed: 0,
            fusion_weight: 0.5,
            theta: DEFAULT_AIR_THRESHOLD,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |flag: &str, why: &str| Err(CliError::Domain(format!("--{flag}: {why}")));
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return bad("conf-threshold", "must be in [0,1]");
        }
        if self.smoothing_window.is_multiple_of(2) {
            return bad("smooth", "must be an odd positive integer");
        }
        if self.k == 0 {
            return bad("k", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.fusion_weight) {
            return bad("fusion-weight", "must be in [0,1]");
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad("theta", "must be in (0,1]");
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pose-scatter",
    version,
    about = "Pose-scatter analysis of skeleton keypoint clips"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check keypoint files (.json) and manifests (.csv).
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Per-frame scatter curve as CSV.
    Hps {
        keypoints: PathBuf,
        #[command(flatten)]
        config: RunConfig,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment and key-frame sample plan as JSON.
    Sample {
        keypoints: PathBuf,
        #[command(flatten)]
        config: RunConfig,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Video-level class probabilities as JSON.
    Classify {
        keypoints: PathBuf,
        /// `toy:<prototype file>` or `file:<score file>`.
        #[arg(long)]
        scorer: String,
        /// Use this plan instead of sampling one from the config.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[command(flatten)]
        config: RunConfig,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Program score for a manifest, as JSON.
    ScoreProgram {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Jump phases around the main key frame, as JSON.
    Segment {
        keypoints: PathBuf,
        #[command(flatten)]
        config: RunConfig,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_sequence(path: &Path) -> Result<PoseSequence, CliError> {
    let bytes = read_input(path)?;
    parse_pose_sequence(&bytes, PoseFormat::Json)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

/// Outcome of `validate`: report text and exit code.
pub fn cmd_validate(paths: &[PathBuf]) -> (String, i32) {
    let mut report = String::new();
    let mut code = 0;
    for path in paths {
        let shown = path.display();
        let bytes = match read_input(path) {
            Ok(b) => b,
            Err(e) => {
                let _ = writeln!(report, "{}", e.message());
                code = 2;
                continue;
            }
        };
        let is_manifest = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let violations: Vec<String> = if is_manifest {
            match validate_manifest_bytes(&bytes) {
                Ok(records) => {
                    for (i, r) in records.iter().enumerate() {
                        if !r.is_standard_action() {
                            let _ = writeln!(
                                report,
                                "{shown}: warning: record {}: non-standard action type {:?}",
                                i + 1,
                                r.action_type
                            );
                        }
                    }
                    Vec::new()
                }
                Err(errs) => errs.iter().map(ToString::to_string).collect(),
            }
        } else {
            match validate_pose_bytes(&bytes, PoseFormat::Json) {
                Ok(_) => Vec::new(),
                Err(errs) => errs.iter().map(ToString::to_string).collect(),
            }
        };
        if violations.is_empty() {
            let _ = writeln!(report, "{shown}: OK");
        } else {
            code = code.max(1);
            for v in violations {
                let _ = writeln!(report, "{shown}: {v}");
            }
        }
    }
    if code == 0 {
        report.push_str("OK\n");
    }
    (report, code)
}

pub fn cmd_hps(keypoints: &Path, config: &RunConfig) -> Result<String, CliError> {
    config.validate()?;
    let seq = load_sequence(keypoints)?;
    let curve = hps_curve(&seq, config.conf_threshold, config.smoothing_window).map_err(domain)?;
    let mut out = String::from("frame_index,zeta,status\n");
    for (frame, v) in seq.frames.iter().zip(&curve.values) {
        let _ = writeln!(
            out,
            "{},{},{}",
            frame.frame_index,
            v.zeta,
            v.status.as_str()
        );
    }
    Ok(out)
}

fn plan_for(seq: &PoseSequence, config: &RunConfig) -> Result<SamplePlan, CliError> {
    let curve = hps_curve(seq, config.conf_threshold, config.smoothing_window).map_err(domain)?;
    let mut plan =
        make_sample_plan(&curve, config.k, config.l, config.delta, config.seed).map_err(domain)?;
    plan.clip_id = seq.clip_id.clone();
    Ok(plan)
}

pub fn cmd_sample(keypoints: &Path, config: &RunConfig) -> Result<String, CliError> {
    config.validate()?;
    let seq = load_sequence(keypoints)?;
    Ok(plan_for(&seq, config)?.to_json())
}

fn load_scorer(spec: &str) -> Result<Box<dyn SnippetScorer>, CliError> {
    let (kind, path) = spec.split_once(':').ok_or_else(|| {
        CliError::Domain(format!(
            "--scorer {spec:?}: expected toy:<prototype file> or file:<score file>"
        ))
    })?;
    let path = Path::new(path);
    let bytes = read_input(path)?;
    let wrap =
        |e: crate::pipeline::ScorerError| CliError::Domain(format!("{}: {e}", path.display()));
    match kind {
        "toy" => Ok(Box::new(ToyScorer::from_json(&bytes).map_err(wrap)?)),
        "file" => Ok(Box::new(load_external_scores(&bytes).map_err(wrap)?)),
        other => Err(CliError::Domain(format!(
            "--scorer: unknown scorer kind {other:?} (expected toy or file)"
        ))),
    }
}

pub fn cmd_classify(
    keypoints: &Path,
    scorer: &str,
    plan: Option<&Path>,
    config: &RunConfig,
) -> Result<String, CliError> {
    config.validate()?;
    let seq = load_sequence(keypoints)?;
    let scorer = load_scorer(scorer)?;
    let plan = match plan {
        Some(p) => SamplePlan::from_json(&read_input(p)?)
            .map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))?,
        None => plan_for(&seq, config)?,
    };
    let fusion = FusionConfig {
        fusion_weight: config.fusion_weight,
        ..Default::default()
    };
    let probs = ktsn_predict(&seq, &plan, scorer.as_ref(), fusion).map_err(domain)?;
    Ok(probs.to_json())
}

pub fn cmd_score_program(manifest: &Path) -> Result<String, CliError> {
    let bytes = read_input(manifest)?;
    let records = parse_manifest(&bytes)
        .map_err(|e| CliError::Domain(format!("{}: {e}", manifest.display())))?;
    Ok(score_program(&records).to_json())
}

#[derive(Serialize)]
struct SegmentOut<'a> {
    clip_id: &'a str,
    keyframe: usize,
    delta: usize,
    theta: f64,
    #[serde(flatten)]
    phases: &'a PhaseSegmentation,
}

pub fn cmd_segment(keypoints: &Path, config: &RunConfig) -> Result<String, CliError> {
    config.validate()?;
    let seq = load_sequence(keypoints)?;
    let curve = hps_curve(&seq, config.conf_threshold, config.smoothing_window).map_err(domain)?;
    let key = find_specific_keyframes(&curve, config.delta, 1).map_err(domain)?[0];
    let phases = segment_phases(&curve, key, config.delta, config.theta).map_err(domain)?;
    let mut s = serde_json::to_string_pretty(&SegmentOut {
        clip_id: &seq.clip_id,
        keyframe: key.index,
        delta: config.delta,
        theta: config.theta,
        phases: &phases,
    })
    .expect("segmentation serializes");
    s.push('\n');
    Ok(s)
}

/// Writes via a temporary file in the target directory, then renames into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(
    result: Result<String, CliError>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let written = result.and_then(|text| match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    });
    match written {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writing results and diagnostics to the given streams.
pub fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Validate { paths } => {
            let (report, code) = cmd_validate(&paths);
            let _ = stdout.write_all(report.as_bytes());
            code
        }
        Command::Hps {
            keypoints,
            config,
            out,
        } => emit(cmd_hps(&keypoints, &config), out.as_deref(), stdout, stderr),
        Command::Sample {
            keypoints,
            config,
            out,
        } => emit(
            cmd_sample(&keypoints, &config),
            out.as_deref(),
            stdout,
            stderr,
        ),
        Command::Classify {
            keypoints,
            scorer,
            plan,
            config,
            out,
        } => emit(
            cmd_classify(&keypoints, &scorer, plan.as_deref(), &config),
            out.as_deref(),
            stdout,
            stderr,
        ),
        Command::ScoreProgram { manifest, out } => {
            emit(cmd_score_program(&manifest), out.as_deref(), stdout, stderr)
        }
        Command::Segment {
            keypoints,
            config,
            out,
        } => emit(
            cmd_segment(&keypoints, &config),
            out.as_deref(),
            stdout,
            stderr,
        ),
    }
}

/// Parses arguments and runs. Usage errors exit with clap's code (2).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli, stdout, stderr),
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            code
        }
    }
}
