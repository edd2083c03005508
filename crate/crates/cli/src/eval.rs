use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use ctc_align::document::AlignmentDocument;
use ctc_align::metrics::{evaluate_corpus, BoundarySet, EvalOptions, EvalReport};
use serde::Serialize;

use crate::io;

#[derive(Args)]
pub struct EvalArgs {
    /// Directory of predicted alignment documents.
    #[arg(long, value_name = "DIR")]
    pred: PathBuf,
    /// Directory of reference alignment documents.
    #[arg(long = "ref", value_name = "DIR")]
    reference: PathBuf,
    /// Recall and precision tolerances in ms.
    #[arg(long, value_delimiter = ',', default_values_t = [20.0, 40.0, 60.0])]
    tolerances: Vec<f64>,
    /// Tolerance of the onset-only precision column, in ms.
    #[arg(long, default_value_t = 20.0)]
    onset_tolerance: f64,
    /// Onset window for deletion and insertion matching, in ms.
    #[arg(long, default_value_t = 100.0)]
    match_window: f64,
    #[arg(long, default_value_t = 10.0)]
    bin_width: f64,
    /// Distances at or beyond this go to the overflow bin, in ms.
    #[arg(long, default_value_t = 200.0)]
    histogram_max: f64,
    /// Score reference onsets only, ignoring reference end times.
    #[arg(long)]
    ref_onsets_only: bool,
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    table: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    histogram: Option<PathBuf>,
    /// Write a report for each utterance as JSON.
    #[arg(long, value_name = "PATH")]
    per_utterance: Option<PathBuf>,
}

fn load_dir(dir: &Path) -> anyhow::Result<BTreeMap<String, AlignmentDocument>> {
    let mut docs = BTreeMap::new();
    for path in io::list(dir, io::is_alignment)? {
        let doc = AlignmentDocument::from_json(&io::read_text(&path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        if let Some(prev) = docs.insert(doc.utterance_id.clone(), doc) {
            bail!("utterance {} appears twice in {}", prev.utterance_id, dir.display());
        }
    }
    if docs.is_empty() {
        bail!("no alignment documents in {}", dir.display());
    }
    Ok(docs)
}

fn missing(from: &BTreeMap<String, AlignmentDocument>, other: &BTreeMap<String, AlignmentDocument>) -> Vec<String> {
    from.keys().filter(|k| !other.contains_key(*k)).cloned().collect()
}

#[derive(Serialize)]
struct UtteranceReport<'a> {
    utterance_id: &'a str,
    report: EvalReport,
}

pub fn run(args: EvalArgs) -> anyhow::Result<()> {
    let pred = load_dir(&args.pred)?;
    let reference = load_dir(&args.reference)?;
    let (no_pred, no_ref) = (missing(&reference, &pred), missing(&pred, &reference));
    if !no_pred.is_empty() || !no_ref.is_empty() {
        bail!(
            "utterance ids differ; without prediction: [{}]; without reference: [{}]",
            no_pred.join(", "),
            no_ref.join(", ")
        );
    }
    let opts = EvalOptions {
        tolerances_ms: args.tolerances.clone(),
        onset_tolerance_ms: args.onset_tolerance,
        match_window_ms: args.match_window,
        bin_width_ms: args.bin_width,
        histogram_max_ms: args.histogram_max,
    };
    let mut ids = Vec::with_capacity(pred.len());
    let mut pairs = Vec::with_capacity(pred.len());
    for (id, r) in &reference {
        let mut rb = r.boundaries()?;
        if args.ref_onsets_only {
            rb = BoundarySet::new(rb.onsets().to_vec(), None, rb.labels().to_vec())?;
        }
        pairs.push((rb, pred[id].boundaries()?));
        ids.push(id.as_str());
    }
    let report = evaluate_corpus(&pairs, &opts)?;
    let table = report.to_table();
    print!("{table}");
    if let Some(p) = &args.json {
        io::write(p, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    }
    if let Some(p) = &args.table {
        io::write(p, table.as_bytes())?;
    }
    if let Some(p) = &args.histogram {
        io::write(p, report.histogram.to_csv().as_bytes())?;
    }
    if let Some(p) = &args.per_utterance {
        let per = ids
            .iter()
            .zip(&pairs)
            .map(|(id, pair)| {
                let report = evaluate_corpus(std::slice::from_ref(pair), &opts)?;
                Ok(UtteranceReport { utterance_id: id, report })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        io::write(p, (serde_json::to_string_pretty(&per)? + "\n").as_bytes())?;
    }
    Ok(())
}
