use std::time::{Duration, Instant};

use anyhow::bail;
use clap::Args;
use ctc_align::pipeline::align_detailed;
use ctc_align::synth::{generate, random_scenario, RandomSpec};
use serde::Serialize;

use crate::{DecodeFlags, InventoryArg};

const EDGE_FRAMES: usize = 5;
const SILENCE_FRAMES: usize = 30;

#[derive(Args)]
pub struct BenchArgs {
    /// Utterance length in frames.
    #[arg(long, default_value_t = 310)]
    frames: usize,
    #[arg(long, default_value_t = 40)]
    phonemes: usize,
    /// Interior silence block every N phonemes.
    #[arg(long, value_name = "N")]
    silence_every: Option<usize>,
    #[arg(long, default_value_t = 21)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    decode: DecodeFlags,
    #[command(flatten)]
    inventory: InventoryArg,
}

#[derive(Serialize)]
struct BenchReport {
    frames: usize,
    phonemes: usize,
    classes: usize,
    reps: usize,
    audio_seconds: f64,
    median_ms: f64,
    min_ms: f64,
    max_ms: f64,
    rtf: f64,
    decode: String,
    peak_lattice_cells: usize,
}

pub fn run(args: BenchArgs) -> anyhow::Result<()> {
    if args.reps == 0 || args.phonemes == 0 {
        bail!("--reps and --phonemes must be positive");
    }
    let inv = args.inventory.load()?;
    let cfg = args.decode.config();
    let silences = args.silence_every.filter(|&k| k > 0).map_or(0, |k| (args.phonemes - 1) / k);
    let budget = args.frames.saturating_sub(2 * EDGE_FRAMES + silences * SILENCE_FRAMES);
    let per = budget / args.phonemes;
    if per < 2 {
        bail!("{} frames are too few for {} phonemes", args.frames, args.phonemes);
    }
    let lo = (per * 6 / 10).max(1);
    let spec = RandomSpec {
        phonemes: args.phonemes,
        phoneme_frames: (lo, (per * 8 / 10).max(lo)),
        gap_frames: (1, (per / 10).max(1)),
        silence_every: args.silence_every,
        silence_frames: SILENCE_FRAMES,
        edge_frames: EDGE_FRAMES,
        total_frames: Some(args.frames),
        seed: args.seed,
        ..RandomSpec::default()
    };
    let s = generate(&random_scenario(&spec, &inv)?, &inv)?;
    let p = &s.posteriorgram;

    let mut times = Vec::with_capacity(args.reps);
    let mut last = None;
    for _ in 0..args.reps {
        let t = Instant::now();
        let r = align_detailed(p, &s.targets, &inv, &cfg)?;
        times.push(t.elapsed());
        last = Some(r.1);
    }
    times.sort();
    let report = last.expect("reps > 0");
    let ms = |d: Duration| d.as_secs_f64() * 1000.0;
    let audio_seconds = p.duration().seconds();
    let median = times[times.len() / 2];
    let out = BenchReport {
        frames: p.num_frames(),
        phonemes: args.phonemes,
        classes: p.num_classes(),
        reps: args.reps,
        audio_seconds,
        median_ms: ms(median),
        min_ms: ms(times[0]),
        max_ms: ms(*times.last().unwrap()),
        rtf: median.as_secs_f64() / audio_seconds,
        decode: report.mode.to_string(),
        peak_lattice_cells: report.peak_lattice_cells,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!(
            "T={} S={} V={}: median {:.3} ms over {} reps (min {:.3}, max {:.3}), RTF {:.5}, {}, peak table {} cells",
            out.frames,
            out.phonemes,
            out.classes,
            out.median_ms,
            out.reps,
            out.min_ms,
            out.max_ms,
            out.rtf,
            out.decode,
            out.peak_lattice_cells
        );
    }
    Ok(())
}
