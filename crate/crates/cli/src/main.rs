//! `ddkseg`: synthesize corpora, train segmenters, segment recordings and
//! score the results.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use ddkseg_core::models::Architecture;
use ddkseg_core::synth::Split;

use config::{FileConfig, Size};
use failure::{CliResult, ExitKind, Failure};

#[derive(Debug, Parser)]
#[command(
    name = "ddkseg",
    version,
    about = "Segment DDK speech into VOT, vowel and other regions at 1 ms resolution"
)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random choice (corpus generation, initialization,
    /// augmentation, batching).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More progress output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    /// Only errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus (WAV + segment CSV + manifest).
    Synth(SynthArgs),
    /// Train a segmenter on the train/val rows of a manifest.
    Train(TrainArgs),
    /// Segment WAV files into VOT/vowel CSVs.
    Segment(SegmentArgs),
    /// DDK rate of segment CSVs.
    Rate(RateArgs),
    /// Score predicted segment CSVs against references.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Number of trials [default: 200].
    #[arg(long)]
    trials: Option<usize>,
    /// Train,val,test fractions [default: 0.6,0.2,0.2].
    #[arg(long, value_delimiter = ',', num_args = 1)]
    ratios: Option<Vec<f64>>,
    /// Fewest syllables per trial [default: 7].
    #[arg(long)]
    min_syllables: Option<usize>,
    /// Most syllables per trial [default: 11].
    #[arg(long)]
    max_syllables: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus manifest (`trial_id,wav_path,labels_path,split`).
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Training log CSV [default: checkpoint path with `.log.csv`].
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_parser = parse_arch)]
    arch: Option<Architecture>,
    #[arg(long, value_enum)]
    size: Option<Size>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Disable noise and band-reject augmentation.
    #[arg(long)]
    no_augment: bool,
    /// Disable the random start shift.
    #[arg(long)]
    no_shift: bool,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// WAV files to segment.
    inputs: Vec<PathBuf>,
    /// Also segment the WAVs of one split of this manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    split: Split,
    /// Receives `<name>.csv` (and `<name>.TextGrid`) per input.
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write a Praat TextGrid per input.
    #[arg(long)]
    textgrid: bool,
    #[arg(long)]
    window_ms: Option<usize>,
    #[arg(long)]
    hop_ms: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Segment CSVs.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// START,END in seconds: rate from VOT onsets only over this window.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    window: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("refs").required(true).args(["references", "manifest"]))]
pub struct EvalArgs {
    /// Directory of predicted segment CSVs.
    #[arg(long)]
    predictions: PathBuf,
    /// Directory with a same-named reference CSV per prediction.
    #[arg(long)]
    references: Option<PathBuf>,
    /// Take references from one split of a manifest; predictions are
    /// `<trial_id>.csv`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    split: Split,
    /// Rate from VOT onsets over START,END seconds instead of articulation time.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    window: Option<Vec<f64>>,
    /// Directory for report.csv and rates.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split `{s}` (train, val, test)")),
    }
}

/// Settings shared by every subcommand.
pub struct Context {
    pub file: FileConfig,
    pub seed: u64,
    verbosity: i8,
}

impl Context {
    pub fn info(&self, msg: &str) {
        if self.verbosity >= 0 {
            eprintln!("{msg}");
        }
    }

    pub fn debug(&self, msg: &str) {
        if self.verbosity >= 1 {
            eprintln!("{msg}");
        }
    }

    pub fn quiet(&self) -> bool {
        self.verbosity < 0
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let verbosity = if cli.quiet { -1 } else { cli.verbose as i8 };
    let ctx = Context {
        file,
        seed,
        verbosity,
    };
    match &cli.command {
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Segment(a) => commands::segment(&ctx, a),
        Command::Rate(a) => commands::rate(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitKind::Usage as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { kind, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(kind as u8)
        }
    }
}
