use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{ArgGroup, Args};
use ctc_align::document::{AlignmentDocument, Provenance, TargetsDocument};
use ctc_align::phoneset::MapMode;
use ctc_align::pipeline::align_detailed;
use ctc_align::posterior::ValueSpace;
use ctc_align::textgrid::TextGrid;
use ctc_align::{par, AlignConfig, MapOptions, PhonemeInventory, TargetSequence};

use crate::io;
use crate::{BatchError, DecodeFlags, InventoryArg, OutputFormat};

#[derive(Args)]
#[command(group(ArgGroup::new("input").required(true).args(["posteriorgram", "input_dir"])))]
pub struct AlignArgs {
    /// Posteriorgram file, PGRM binary or JSON.
    posteriorgram: Option<PathBuf>,
    /// Targets file for a single posteriorgram.
    #[arg(long, conflicts_with_all = ["ipa", "input_dir"])]
    targets: Option<PathBuf>,
    /// Inline IPA symbols separated by spaces; pause punctuation marks silence.
    #[arg(long, conflicts_with = "input_dir")]
    ipa: Option<String>,
    /// Align every *.pgrm and *.post.json file in this directory.
    #[arg(long, value_name = "DIR")]
    input_dir: Option<PathBuf>,
    /// Where batch mode finds <id>.targets.json; defaults to the input directory.
    #[arg(long, value_name = "DIR", requires = "input_dir")]
    targets_dir: Option<PathBuf>,
    /// Output directory; single-file output goes to stdout when absent.
    #[arg(short, long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Output formats; repeat the flag for several.
    #[arg(long, value_enum, default_value = "json")]
    format: Vec<OutputFormat>,
    /// Skip unknown IPA symbols instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Value space of JSON posteriorgrams when the file does not say.
    #[arg(long, value_enum)]
    space: Option<SpaceArg>,
    #[arg(long)]
    no_normalization_check: bool,
    #[command(flatten)]
    decode: DecodeFlags,
    #[command(flatten)]
    inventory: InventoryArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SpaceArg {
    Log,
    Prob,
}

enum Targets {
    File(PathBuf),
    Ipa(String),
}

struct Job {
    id: String,
    posteriorgram: PathBuf,
    targets: Targets,
}

fn load_targets(t: &Targets, inv: &PhonemeInventory, lenient: bool) -> anyhow::Result<TargetSequence> {
    match t {
        Targets::File(path) => {
            let doc = TargetsDocument::from_json(&io::read_text(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            Ok(doc.to_targets(inv).with_context(|| format!("targets in {}", path.display()))?)
        }
        Targets::Ipa(s) => {
            let symbols: Vec<&str> = s.split_whitespace().collect();
            let opts = MapOptions { mode: if lenient { MapMode::Lenient } else { MapMode::Strict }, ..MapOptions::default() };
            Ok(inv.map_ipa(&symbols, &opts)?)
        }
    }
}

fn align_job(job: &Job, args: &AlignArgs, inv: &PhonemeInventory, cfg: &AlignConfig) -> anyhow::Result<AlignmentDocument> {
    let space = args.space.map(|s| match s {
        SpaceArg::Log => ValueSpace::Log,
        SpaceArg::Prob => ValueSpace::Prob,
    });
    let p = io::read_posterior(&job.posteriorgram, space, !args.no_normalization_check)?;
    let targets = load_targets(&job.targets, inv, args.lenient)?;
    let (a, report) = align_detailed(&p, &targets, inv, cfg).with_context(|| format!("aligning {}", job.id))?;
    log::info!("{}: {} intervals, {} gaps, {}", job.id, a.intervals.len(), a.gaps.len(), report.mode);
    let provenance =
        Provenance::Align { config: cfg.clone(), decode: report.mode.to_string(), inserted: report.inserted };
    Ok(AlignmentDocument::from_alignment(&job.id, &a, p.frame_hop(), p.frame_offset(), inv, provenance)?)
}

fn render(doc: &AlignmentDocument, format: OutputFormat) -> anyhow::Result<String> {
    Ok(match format {
        OutputFormat::Json => doc.to_json()? + "\n",
        OutputFormat::Textgrid => TextGrid::from_document(doc)?.to_long_text(),
    })
}

fn emit(doc: &AlignmentDocument, dir: &Path, formats: &[OutputFormat]) -> anyhow::Result<()> {
    for &f in formats {
        let ext = match f {
            OutputFormat::Json => io::ALIGN_EXT,
            OutputFormat::Textgrid => io::TEXTGRID_EXT,
        };
        io::write(&dir.join(format!("{}{ext}", doc.utterance_id)), render(doc, f)?.as_bytes())?;
    }
    Ok(())
}

fn batch_jobs(args: &AlignArgs, dir: &Path) -> anyhow::Result<Vec<Job>> {
    let targets_dir = args.targets_dir.as_deref().unwrap_or(dir);
    let jobs: Vec<Job> = io::list(dir, io::is_posteriorgram)?
        .into_iter()
        .map(|path| {
            let id = io::utterance_id(&path);
            let targets = Targets::File(targets_dir.join(format!("{id}{}", io::TARGETS_EXT)));
            Job { id, posteriorgram: path, targets }
        })
        .collect();
    if jobs.is_empty() {
        bail!("no *.pgrm or *.post.json files in {}", dir.display());
    }
    Ok(jobs)
}

fn is_infeasible(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| matches!(c.downcast_ref::<ctc_align::Error>(), Some(ctc_align::Error::Infeasible(_))))
}

pub fn run(args: AlignArgs) -> anyhow::Result<()> {
    let inv = args.inventory.load()?;
    let cfg = args.decode.config();

    if let Some(dir) = &args.input_dir {
        let Some(out) = &args.output_dir else { bail!("batch mode needs --output-dir") };
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let jobs = batch_jobs(&args, dir)?;
        let results = par::map(&jobs, |job| align_job(job, &args, &inv, &cfg));
        let (mut failed, mut infeasible) = (0, false);
        for (job, r) in jobs.iter().zip(results) {
            match r.and_then(|doc| emit(&doc, out, &args.format)) {
                Ok(()) => {}
                Err(e) => {
                    eprintln!("{}: {e:#}", job.id);
                    infeasible |= is_infeasible(&e);
                    failed += 1;
                }
            }
        }
        if failed > 0 {
            return Err(BatchError { failed, total: jobs.len(), infeasible }.into());
        }
        return Ok(());
    }

    let path = args.posteriorgram.clone().expect("clap requires an input");
    let targets = match (&args.targets, &args.ipa) {
        (Some(t), None) => Targets::File(t.clone()),
        (None, Some(s)) => Targets::Ipa(s.clone()),
        _ => bail!("give the targets with --targets FILE or --ipa SYMBOLS"),
    };
    let job = Job { id: io::utterance_id(&path), posteriorgram: path, targets };
    let doc = align_job(&job, &args, &inv, &cfg)?;
    match &args.output_dir {
        Some(out) => {
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            emit(&doc, out, &args.format)
        }
        None => {
            for &f in &args.format {
                print!("{}", render(&doc, f)?);
            }
            Ok(())
        }
    }
}
