use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use ctc_align::document::{AlignmentDocument, Provenance, TargetsDocument};
use ctc_align::posterior::{posteriorgram_to_json, write_posteriorgram};
use ctc_align::synth::{generate, random_scenario, RandomSpec, SynthScenario};

use crate::{io, InventoryArg};

#[derive(Args)]
pub struct SynthArgs {
    /// Scenario JSON file.
    #[arg(required_unless_present = "random")]
    scenario: Option<PathBuf>,
    /// Draw a random scenario with this many phonemes instead.
    #[arg(long, value_name = "N", conflicts_with = "scenario")]
    random: Option<usize>,
    #[arg(long, default_value_t = 0.8, requires = "random")]
    peak: f64,
    #[arg(long, default_value_t = 0.2, requires = "random")]
    temperature: f64,
    #[arg(long, default_value_t = 0.35, requires = "random")]
    gap_fraction: f64,
    /// Interior silence block every N phonemes.
    #[arg(long, value_name = "N", requires = "random")]
    silence_every: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Utterance id; defaults to the scenario file name.
    #[arg(long)]
    id: Option<String>,
    #[arg(short, long, value_name = "DIR")]
    output_dir: PathBuf,
    /// Write the posteriorgram as JSON instead of PGRM.
    #[arg(long)]
    json_posteriorgram: bool,
    #[command(flatten)]
    inventory: InventoryArg,
}

pub fn run(args: SynthArgs) -> anyhow::Result<()> {
    let inv = args.inventory.load()?;
    let (mut scenario, default_id) = match (&args.scenario, args.random) {
        (Some(path), None) => {
            let s = SynthScenario::from_json(&io::read_text(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            (s, io::utterance_id(path))
        }
        (None, Some(n)) => {
            let spec = RandomSpec {
                phonemes: n,
                peak: args.peak,
                temperature: args.temperature,
                gap_fraction: args.gap_fraction,
                silence_every: args.silence_every,
                seed: args.seed.unwrap_or(0),
                ..RandomSpec::default()
            };
            (random_scenario(&spec, &inv)?, format!("synth{}", spec.seed))
        }
        _ => bail!("give a scenario file or --random N"),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let id = args.id.clone().unwrap_or(default_id);
    let out = generate(&scenario, &inv)?;
    let dir = &args.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let p = &out.posteriorgram;
    if args.json_posteriorgram {
        io::write(&dir.join(format!("{id}{}", io::POSTERIOR_JSON_EXT)), posteriorgram_to_json(p)?.as_bytes())?;
    } else {
        io::write(&dir.join(format!("{id}{}", io::PGRM_EXT)), &write_posteriorgram(p)?)?;
    }
    let reference = AlignmentDocument::from_alignment(
        &id,
        &out.reference,
        p.frame_hop(),
        p.frame_offset(),
        &inv,
        Provenance::Synth { scenario },
    )?;
    io::write(&dir.join(format!("{id}{}", io::REFERENCE_EXT)), (reference.to_json()? + "\n").as_bytes())?;
    let targets = TargetsDocument::from_targets(&out.targets, &inv)?;
    io::write(&dir.join(format!("{id}{}", io::TARGETS_EXT)), (targets.to_json()? + "\n").as_bytes())?;
    println!("{id}: {} frames, {} phonemes", p.num_frames(), out.reference.intervals.len());
    Ok(())
}
