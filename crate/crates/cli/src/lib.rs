//! `reidtrack` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, unknown config
//! keys or presets), 2 for data errors (unreadable or malformed inputs,
//! mismatched frame ranges).

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "reidtrack",
    version,
    about = "Pose-based multi-person tracking with a re-identification gate"
)]
struct Cli {
    /// Seed for every random choice (scenario synthesis).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scenario: detections, ground truth and gallery.
    Synth(SynthArgs),
    /// Train the RBF-SVM re-identifier from a gallery file.
    TrainReid(TrainArgs),
    /// Track a detection stream and write the track output.
    Track(TrackArgs),
    /// Score a track output against ground truth.
    Eval(EvalArgs),
    /// Track and score one input with several trackers, with and without ReID.
    Run(RunArgs),
    /// Render the results table of a report file.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Built-in scenario (normal_high, hard_surveillance).
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    preset: Option<String>,
    /// Scenario description as JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Store embeddings inside the detections file instead of a sidecar.
    #[arg(long)]
    inline_embeddings: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Gallery JSON Lines file (`-` for stdin).
    #[arg(long)]
    gallery: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Kernel length scale; default is the median pairwise distance.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    min_conf: Option<f64>,
    /// L2-normalise embeddings before training and classification.
    #[arg(long)]
    normalize: bool,
}

#[derive(Debug, Args)]
struct TrackArgs {
    /// Detections JSON Lines file (`-` for stdin).
    #[arg(long, default_value = "-")]
    detections: PathBuf,
    /// Embedding sidecar referenced by `emb_ref`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Trained re-identifier; without it identities stay unknown.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Config file with `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// centroid, sort or deepsort.
    #[arg(long)]
    tracker: Option<String>,
    #[arg(long)]
    speed_limit: Option<f64>,
    #[arg(long)]
    min_conf: Option<f64>,
    /// Track output file (`-` for stdout).
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Track output written by `track`.
    #[arg(long)]
    tracks: PathBuf,
    /// Ground-truth CSV.
    #[arg(long)]
    gt: PathBuf,
    /// Detections, to report detector misses and false alarms.
    #[arg(long)]
    detections: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    iou_min: Option<f64>,
    /// Report JSON (`-` for stdout).
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Also write the text table here.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file with `key = value` settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generate the input from a built-in scenario.
    #[arg(long)]
    preset: Option<String>,
    /// Directory written by `synth`.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    detections: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Gallery to train the re-identifier from.
    #[arg(long)]
    gallery: Option<PathBuf>,
    /// Pre-trained re-identifier (takes precedence over a gallery).
    #[arg(long)]
    model: Option<PathBuf>,
    /// `all` or a comma-separated list of tracker names.
    #[arg(long)]
    tracker: Option<String>,
    /// Skip the tracker-only rows.
    #[arg(long)]
    no_baseline: bool,
    /// Skip the rows with re-identification.
    #[arg(long)]
    no_reid: bool,
    #[arg(long)]
    speed_limit: Option<f64>,
    #[arg(long)]
    min_conf: Option<f64>,
    #[arg(long)]
    iou_min: Option<f64>,
    /// Directory receiving report.json and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report JSON path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Table text path.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Directory receiving one track output per row.
    #[arg(long)]
    tracks: Option<PathBuf>,
    /// Do not print the table.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report JSON (`-` for stdin).
    report: PathBuf,
    /// Where to write the table (`-` for stdout).
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
