use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctc_align::{AlignConfig, CountCheck, PhonemeInventory};

mod align;
mod bench;
mod eval;
mod g2p;
mod io;
mod synth;

/// Forced alignment of phoneme sequences against CTC posteriorgrams.
#[derive(Parser)]
#[command(name = "ctc-align", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align one posteriorgram, or every posteriorgram in a directory.
    Align(align::AlignArgs),
    /// Compare predicted alignments with reference alignments.
    Eval(eval::EvalArgs),
    /// Render a synthetic scenario into a posteriorgram, targets and reference.
    Synth(synth::SynthArgs),
    /// Convert text to a targets file through espeak-ng.
    G2p(g2p::G2pArgs),
    /// Time alignment of a synthetic utterance.
    Bench(bench::BenchArgs),
}

#[derive(Args, Clone)]
pub struct InventoryArg {
    /// Phoneme inventory file; the built-in 67-phoneme set when absent.
    #[arg(long, value_name = "PATH")]
    inventory: Option<PathBuf>,
}

impl InventoryArg {
    pub fn load(&self) -> anyhow::Result<PhonemeInventory> {
        Ok(match &self.inventory {
            Some(p) => PhonemeInventory::load(p, CountCheck::Permissive)?,
            None => PhonemeInventory::builtin(),
        })
    }
}

#[derive(Args, Clone)]
pub struct DecodeFlags {
    /// Boost factor for target phonemes.
    #[arg(long, default_value_t = ctc_align::pipeline::DEFAULT_BOOST)]
    beta: f64,
    /// Probability floor for target phonemes.
    #[arg(long, default_value_t = ctc_align::pipeline::DEFAULT_FLOOR)]
    floor: f64,
    #[arg(long)]
    no_boost: bool,
    #[arg(long)]
    no_enforce: bool,
    #[arg(long)]
    no_hierarchical: bool,
    /// Close gaps shorter than this many ms.
    #[arg(long, value_name = "MS", default_value_t = 0.0)]
    gap_tolerance: f64,
    /// Silence plus blank probability that marks a silence frame.
    #[arg(long, value_name = "P", default_value_t = 0.5)]
    silence_threshold: f64,
    /// Shortest silence region used to split decoding, in ms.
    #[arg(long, value_name = "MS", default_value_t = 100.0)]
    silence_min_dur: f64,
}

impl DecodeFlags {
    pub fn config(&self) -> AlignConfig {
        AlignConfig {
            boost_factor: self.beta,
            floor: self.floor,
            boost_enabled: !self.no_boost,
            enforce_completeness: !self.no_enforce,
            hierarchical: !self.no_hierarchical,
            gap_tolerance_ms: self.gap_tolerance,
            silence_threshold: self.silence_threshold,
            silence_min_duration_ms: self.silence_min_dur,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Textgrid,
}

/// Failure of the external G2P program.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ExternalToolError(pub String);

/// Some jobs of a batch failed; details were already logged.
#[derive(Debug, thiserror::Error)]
#[error("{failed} of {total} utterances failed")]
pub struct BatchError {
    pub failed: usize,
    pub total: usize,
    pub infeasible: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(ctc_align::Error::Infeasible(_)) = cause.downcast_ref::<ctc_align::Error>() {
            return 3;
        }
        if cause.downcast_ref::<ExternalToolError>().is_some() {
            return 4;
        }
        if let Some(b) = cause.downcast_ref::<BatchError>() {
            return if b.infeasible { 3 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Align(a) => align::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Synth(a) => synth::run(a),
        Command::G2p(a) => g2p::run(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
