//! `chainflow` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or validation failure, 2 on I/O
//! failure. Output goes to the writers handed to [`run_with`] so that the
//! whole surface can be driven from tests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::anchors::kmeans_scales;
use crate::chaining::{run_tracker, TrackerParams, Trajectories};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, evaluate, format_table, ClearReport};
use crate::motio;
use crate::simulator::{corrupt_to_pairs, gen_sequence, NoiseConfig, Occlusion, WorldConfig};
use crate::supervision::{gradcheck, GroundTruthFrame};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "chainflow", version, about = "Paired-box multi-object tracking: simulate, track, evaluate")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Seed for every random draw; identical arguments and seed give
    /// byte-identical output.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic sequence: gt.txt, seqinfo.ini and pairs.csv.
    Simulate(SimulateArgs),
    /// Chain box pairs into trajectories (MOTChallenge result format).
    Track(TrackArgs),
    /// Score results against ground truth.
    Eval(EvalArgs),
    /// Cluster ground-truth box scales into k anchor scales.
    Anchors(AnchorsArgs),
    /// Compare analytic loss gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Simulate, track and evaluate in one run.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoisePreset {
    /// Exact boxes, no drops, no clutter, unit scores.
    None,
    /// Small jitter, 5% drops, 0.5 false positives per node.
    Realistic,
}

#[derive(Debug, Clone, Args)]
pub struct WorldArgs {
    /// Number of frames.
    #[arg(long, default_value_t = 100, value_parser = at_least_one)]
    pub frames: usize,
    /// Number of targets.
    #[arg(long, default_value_t = 8)]
    pub targets: usize,
    /// Image width in pixels.
    #[arg(long, default_value_t = 1920, value_parser = clap::value_parser!(u32).range(1..))]
    pub width: u32,
    /// Image height in pixels.
    #[arg(long, default_value_t = 1080, value_parser = clap::value_parser!(u32).range(1..))]
    pub height: u32,
    /// Detector noise preset; the flags below override single fields.
    #[arg(long, value_enum, default_value_t = NoisePreset::None)]
    pub noise: NoisePreset,
    /// Probability that a true pair goes unreported.
    #[arg(long, value_parser = unit_interval)]
    pub drop_prob: Option<f64>,
    /// Mean false-positive pairs per node.
    #[arg(long, value_parser = non_negative)]
    pub fp_rate: Option<f64>,
    /// Standard deviation of box-center jitter, pixels.
    #[arg(long, value_parser = non_negative)]
    pub jitter: Option<f64>,
    /// Hide a target from the detector: TARGET:START:DURATION, 0-based
    /// target index and frame. Repeatable.
    #[arg(long = "occlude", value_parser = parse_occlusion)]
    pub occlusions: Vec<Occlusion>,
}

impl WorldArgs {
    pub fn world(&self) -> Result<WorldConfig> {
        let cfg = WorldConfig {
            frames: self.frames,
            image_w: self.width,
            image_h: self.height,
            n_targets: self.targets,
            occlusions: self.occlusions.clone(),
            ..WorldConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn noise(&self) -> Result<NoiseConfig> {
        let mut n = match self.noise {
            NoisePreset::None => NoiseConfig::noiseless(),
            NoisePreset::Realistic => NoiseConfig::realistic(),
        };
        if let Some(p) = self.drop_prob {
            n.drop_prob = p;
        }
        if let Some(r) = self.fp_rate {
            n.false_positive_rate = r;
        }
        if let Some(j) = self.jitter {
            n.center_jitter_std = j;
        }
        n.fp_region = (f64::from(self.width), f64::from(self.height));
        n.validate()?;
        Ok(n)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrackerArgs {
    /// Retention window σ: frames an unmatched tracklet is kept alive on a
    /// constant-velocity prediction.
    #[arg(long, default_value_t = 10)]
    pub sigma: usize,
    /// Minimum IoU to chain a box to a tracklet.
    #[arg(long, default_value_t = 0.5, value_parser = open_unit)]
    pub iou: f64,
    /// Soft-NMS IoU gate on the first box of each pair.
    #[arg(long, default_value_t = 0.7, value_parser = unit_interval)]
    pub nms: f64,
    /// Confidence threshold; pairs scoring at or above it are kept.
    #[arg(long, default_value_t = 0.4, value_parser = unit_interval)]
    pub conf: f64,
    /// Also emit interpolated boxes for gaps bridged by retention.
    #[arg(long)]
    pub fill_gaps: bool,
}

impl TrackerArgs {
    pub fn params(&self) -> TrackerParams<f64> {
        TrackerParams {
            iou_match_thresh: self.iou,
            sigma: self.sigma,
            nms_thresh: self.nms,
            conf_thresh: self.conf,
            fill_gaps: self.fill_gaps,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrackArgs {
    /// Box-pair CSV: t,x1,y1,w1,h1,x2,y2,w2,h2,cls_score,id_score.
    #[arg(long)]
    pub pairs: PathBuf,
    #[command(flatten)]
    pub tracker: TrackerArgs,
    /// Result file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Ground-truth file, or a directory holding <seq>/gt/gt.txt.
    #[arg(long, required_unless_present = "reports", conflicts_with = "reports")]
    pub gt: Option<PathBuf>,
    /// Result file, or a directory holding <seq>.txt.
    #[arg(long, required_unless_present = "reports", conflicts_with = "reports")]
    pub res: Option<PathBuf>,
    /// Aggregate precomputed per-sequence rows from a report CSV instead.
    #[arg(long)]
    pub reports: Option<PathBuf>,
    /// Minimum IoU for a hypothesis to cover a ground-truth box.
    #[arg(long, default_value_t = 0.5, value_parser = open_unit)]
    pub iou: f64,
    /// Ground-truth boxes at or below this visibility are ignored.
    #[arg(long, default_value_t = 0.1, value_parser = unit_interval)]
    pub min_visibility: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct AnchorsArgs {
    /// Ground-truth file whose boxes are clustered.
    #[arg(long)]
    pub gt: PathBuf,
    /// Number of scales (one per pyramid level).
    #[arg(long, default_value_t = 5, value_parser = at_least_one)]
    pub k: usize,
    /// Ground-truth boxes at or below this visibility are ignored.
    #[arg(long, default_value_t = 0.1, value_parser = unit_interval)]
    pub min_visibility: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Random loss instances to check.
    #[arg(long, default_value_t = 100, value_parser = at_least_one)]
    pub instances: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[command(flatten)]
    pub tracker: TrackerArgs,
    /// Minimum IoU for evaluation matches.
    #[arg(long, default_value_t = 0.5, value_parser = open_unit)]
    pub eval_iou: f64,
    /// Keep intermediate files here; a temporary directory otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

fn number(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v = number(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn open_unit(s: &str) -> std::result::Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v = number(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is negative"))
    }
}

fn at_least_one(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

fn parse_occlusion(s: &str) -> std::result::Result<Occlusion, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Vec<usize> = parts.iter().filter_map(|p| p.trim().parse().ok()).collect();
    match nums[..] {
        [target, start, duration] if parts.len() == 3 => Ok(Occlusion { target, start, duration }),
        _ => Err(format!("`{s}` is not TARGET:START:DURATION")),
    }
}

/// Parses `argv` (program name first) without running anything.
pub fn parse(argv: &[String]) -> std::result::Result<Cli, clap::Error> {
    Cli::try_parse_from(argv)
}

/// Runs the CLI against the process stdout and stderr.
pub fn run_cli(argv: &[String]) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI, returning the exit code.
pub fn run_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match parse(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_INVALID
                }
            };
        }
    };
    let Some(command) = cli.command else {
        let _ = writeln!(err, "no subcommand given; see `chainflow --help`");
        return EXIT_INVALID;
    };
    match dispatch(&command, cli.seed, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn dispatch(command: &Command, seed: u64, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Simulate(a) => {
            simulate(&a.world, seed, &a.out)?;
            emit(out, &format!("wrote {}\n", a.out.display()))?;
        }
        Command::Track(a) => {
            let nodes = motio::parse_pairs(&a.pairs)?;
            let traj = track(&nodes, &a.tracker.params())?;
            motio::write_results(&a.out, &traj)?;
        }
        Command::Eval(a) => {
            let rows = match &a.reports {
                Some(path) => motio::parse_reports(path)?,
                // both present: enforced by the parser
                None => eval_paths(a.gt.as_deref().unwrap(), a.res.as_deref().unwrap(), a.iou, a.min_visibility)?,
            };
            emit(out, &render(&rows, a.format)?)?;
        }
        Command::Anchors(a) => {
            let frames = motio::parse_gt(&a.gt, a.min_visibility)?;
            let boxes: Vec<_> = frames.iter().flat_map(|f| f.boxes.iter().copied()).collect();
            let scales = kmeans_scales(&boxes, a.k, seed)?;
            let text: String = scales.iter().map(|s| format!("{s:.4}\n")).collect();
            emit(out, &text)?;
        }
        Command::Gradcheck(a) => {
            let report = gradcheck::run(seed, a.instances)?;
            emit(
                out,
                &format!(
                    "{} instances, {} partial derivatives, max relative error {:.3e}: {}\n",
                    report.instances,
                    report.scalars_checked,
                    report.max_rel_error,
                    if report.passed { "ok" } else { "FAILED" }
                ),
            )?;
            if !report.passed {
                return Ok(EXIT_INVALID);
            }
        }
        Command::Pipeline(a) => {
            let tmp;
            let dir = match &a.out {
                Some(d) => d.clone(),
                None => {
                    tmp = tempfile::tempdir().map_err(|e| Error::io(Path::new("<tempdir>"), e))?;
                    tmp.path().to_path_buf()
                }
            };
            simulate(&a.world, seed, &dir)?;
            let nodes = motio::parse_pairs(&dir.join("pairs.csv"))?;
            let traj = track(&nodes, &a.tracker.params())?;
            let res = dir.join("res.txt");
            motio::write_results(&res, &traj)?;
            let report = eval_file(&dir.join("gt.txt"), &res, a.eval_iou, 0.0)?;
            emit(out, &render(&[report], a.format)?)?;
        }
    }
    Ok(EXIT_OK)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io(Path::new("<stdout>"), e))
}

/// Generates a sequence into `dir`.
pub fn simulate(args: &WorldArgs, seed: u64, dir: &Path) -> Result<()> {
    let world = args.world()?;
    let noise = args.noise()?;
    let gt = gen_sequence(&world, seed)?;
    let pairs = corrupt_to_pairs(&gt, &noise, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?;
    let info = motio::SequenceInfo {
        name: format!("sim-{seed}"),
        frame_count: world.frames,
        image_w: world.image_w,
        image_h: world.image_h,
        frame_rate: 30.0,
    };
    motio::write_file(&dir.join("gt.txt"), &motio::format_gt(&gt))?;
    motio::write_file(&dir.join("seqinfo.ini"), &motio::format_seqinfo(&info))?;
    motio::write_file(&dir.join("pairs.csv"), &motio::format_pairs(&pairs))
}

/// Runs the tracker; no nodes means no trajectories.
pub fn track(nodes: &[crate::chaining::Node<f64>], params: &TrackerParams<f64>) -> Result<Trajectories<f64>> {
    params.validate()?;
    if nodes.is_empty() {
        return Ok(Trajectories::new());
    }
    run_tracker(nodes, params)
}

/// Looks for `seqinfo.ini` beside the gt file or one directory up.
fn find_seqinfo(gt: &Path) -> Option<PathBuf> {
    let dir = gt.parent()?;
    [dir.join("seqinfo.ini"), dir.parent()?.join("seqinfo.ini")].into_iter().find(|p| p.is_file())
}

fn eval_paths(gt: &Path, res: &Path, iou: f64, min_vis: f64) -> Result<Vec<ClearReport>> {
    if !gt.is_dir() {
        return Ok(vec![eval_file(gt, res, iou, min_vis)?]);
    }
    let entries = fs::read_dir(gt).map_err(|e| Error::io(gt, e))?;
    let mut seqs: Vec<String> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(gt, e))?;
        if entry.path().join("gt").join("gt.txt").is_file() {
            seqs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    if seqs.is_empty() {
        return Err(Error::EmptyInput("no <seq>/gt/gt.txt under the ground-truth directory"));
    }
    seqs.sort();
    seqs.iter()
        .map(|s| {
            let mut r = eval_file(&gt.join(s).join("gt").join("gt.txt"), &res.join(format!("{s}.txt")), iou, min_vis)?;
            r.name = s.clone();
            Ok(r)
        })
        .collect()
}

/// Evaluates one sequence. The frame range is the sequence length from
/// `seqinfo.ini` when one is found, widened to cover every row in either
/// file.
pub fn eval_file(gt_path: &Path, res_path: &Path, iou: f64, min_vis: f64) -> Result<ClearReport> {
    let info = find_seqinfo(gt_path).map(|p| motio::parse_seqinfo(&p)).transpose()?;
    let mut gt = motio::parse_gt(gt_path, min_vis)?;
    let hyp = motio::parse_results(res_path)?;
    let hyp_frames = hyp.frames.keys().next_back().map_or(0, |f| f + 1);
    let count = gt.len().max(hyp_frames).max(info.as_ref().map_or(0, |i| i.frame_count));
    gt.extend((gt.len()..count).map(GroundTruthFrame::empty));
    let hyp = hyp.to_frames(count)?;
    let name = match info {
        Some(i) => i.name,
        None => gt_path.file_stem().map_or_else(|| "sequence".into(), |s| s.to_string_lossy().into_owned()),
    };
    evaluate(&name, &gt, &hyp, iou)
}

#[derive(Serialize)]
struct JsonReport<'a> {
    sequences: &'a [ClearReport],
    total: Option<ClearReport>,
}

/// Rows plus a totals row when there is more than one sequence.
fn render(rows: &[ClearReport], format: Format) -> Result<String> {
    let total = if rows.len() > 1 { Some(aggregate(rows)?) } else { None };
    let mut all = rows.to_vec();
    all.extend(total.clone());
    Ok(match format {
        Format::Table => format_table(&all),
        Format::Csv => motio::format_reports_csv(&all),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&JsonReport { sequences: rows, total })
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            s.push('\n');
            s
        }
    })
}
