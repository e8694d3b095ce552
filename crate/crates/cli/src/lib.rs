//! The `ust` command line: extract style vectors from images, fit one
//! Gaussian per label, compare labels, sample new style vectors, and run
//! the AdaIN and translation-invariance experiments.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ust_core::{Metric, Rect};

mod commands;
pub mod error;
pub mod manifest;
pub mod report;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "ust",
    version,
    about = "Statistical style analysis over Gaussian style distributions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract one AdaIN style vector per image into a USTV file per label.
    Extract(ExtractArgs),
    /// Fit a Gaussian model (USTM) to each USTV file; the file stem is the label.
    Fit(FitArgs),
    /// Write the pairwise distance matrix of a set of models as CSV.
    Dist(DistArgs),
    /// Draw style vectors from a model into a USTV file.
    Sample(SampleArgs),
    /// Re-normalise an image's features to a style vector and report the achieved statistics.
    Adain(AdainArgs),
    /// Swap two image regions and report how far the style statistics move.
    Invariance(InvarianceArgs),
    /// Write the bundled synthetic texture corpus, its manifest and a swap fixture.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, Args)]
pub struct NetArgs {
    /// Seed for the feature extractor's weights.
    #[arg(long, default_value_t = 0)]
    pub net_seed: u64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// CSV manifest with header `path,label`; paths are relative to it.
    pub manifest: PathBuf,
    #[arg(short, long = "out-dir")]
    pub out_dir: PathBuf,
    /// Side of the square every image is centre-cropped and resized to.
    #[arg(long, default_value_t = 64, value_parser = parse_positive)]
    pub crop_size: usize,
    #[command(flatten)]
    pub net: NetArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(short, long = "out-dir")]
    pub out_dir: PathBuf,
    /// Vectors read and merged per streaming update.
    #[arg(long, default_value_t = 256, value_parser = parse_positive)]
    pub batch_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    W2,
    W2sq,
    Kl,
    Bhat,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::W2 => Metric::W2,
            MetricArg::W2sq => Metric::W2Squared,
            MetricArg::Kl => Metric::Kl,
            MetricArg::Bhat => Metric::Bhattacharyya,
        }
    }
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(num_args = 2.., required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = MetricArg::W2)]
    pub metric: MetricArg,
    /// Report squared W2 (same as `--metric w2sq`).
    #[arg(long)]
    pub squared: bool,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_positive)]
    pub count: usize,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "source")]
pub struct StyleSourceChoice {
    /// Draw the style vector from this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Take the style vector from a row of this USTV file.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StyleSource {
    #[command(flatten)]
    pub choice: StyleSourceChoice,
    /// Sampling seed, with `--model`.
    #[arg(long, default_value_t = 0, conflicts_with = "vectors")]
    pub seed: u64,
    /// Zero-based row, with `--vectors`.
    #[arg(long, default_value_t = 0, conflicts_with = "model")]
    pub row: usize,
}

#[derive(Debug, Args)]
pub struct AdainArgs {
    /// Content image (PPM or USTI).
    pub content: PathBuf,
    #[command(flatten)]
    pub style: StyleSource,
    #[command(flatten)]
    pub net: NetArgs,
    /// Side of the square the content image is centre-cropped and resized to.
    #[arg(long, default_value_t = 64, value_parser = parse_positive)]
    pub crop_size: usize,
    /// Largest acceptable gap between achieved and achievable statistics.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// JSON report path.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InvarianceArgs {
    /// PPM or USTI image, used at its native size.
    pub image: PathBuf,
    /// First region as `x,y,width,height`.
    #[arg(long, value_parser = parse_rect)]
    pub rect_a: Rect,
    /// Second region as `x,y,width,height`.
    #[arg(long, value_parser = parse_rect)]
    pub rect_b: Rect,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Optional JSON report path.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 8, value_parser = parse_positive)]
    pub per_label: usize,
    #[arg(long, default_value_t = 16, value_parser = parse_positive)]
    pub side: usize,
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Parses `x,y,width,height`.
pub fn parse_rect(s: &str) -> Result<Rect, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, w, h] => Ok(Rect::new(x, y, w, h)),
        _ => Err(format!("expected x,y,width,height, got `{s}`")),
    }
}

/// Runs one parsed invocation, writing the human-readable summary to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Extract(a) => commands::extract(&a, out),
        Command::Fit(a) => commands::fit(&a, out),
        Command::Dist(a) => commands::dist(&a, out),
        Command::Sample(a) => commands::sample(&a, out),
        Command::Adain(a) => commands::adain(&a, out),
        Command::Invariance(a) => commands::invariance(&a, out),
        Command::Synth(a) => commands::synth(&a, out),
    }
}
