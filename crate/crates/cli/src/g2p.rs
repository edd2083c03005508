use std::path::PathBuf;
use std::process::Command;

use clap::Args;
use ctc_align::document::TargetsDocument;
use ctc_align::phoneset::{strip_diacritics, MapMode};
use ctc_align::MapOptions;

use crate::{io, ExternalToolError, InventoryArg};

pub const ESPEAK_ENV: &str = "ESPEAK_NG_PATH";

#[derive(Args)]
pub struct G2pArgs {
    /// Text to convert.
    #[arg(long)]
    text: String,
    /// espeak-ng voice.
    #[arg(long, default_value = "en-us")]
    lang: String,
    /// Targets file to write; stdout when absent.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Skip IPA symbols the inventory cannot map.
    #[arg(long)]
    lenient: bool,
    #[command(flatten)]
    inventory: InventoryArg,
}

fn espeak() -> String {
    std::env::var(ESPEAK_ENV).unwrap_or_else(|_| "espeak-ng".into())
}

fn phonemize(exe: &str, lang: &str, clause: &str) -> Result<String, ExternalToolError> {
    let out = Command::new(exe).args(["-q", "--ipa", "--sep= ", "-v", lang, clause]).output().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ExternalToolError(format!(
                "espeak-ng not found at {exe:?}; install espeak-ng or point {ESPEAK_ENV} at the executable"
            ))
        } else {
            ExternalToolError(format!("running {exe}: {e}"))
        }
    })?;
    if !out.status.success() {
        return Err(ExternalToolError(format!(
            "{exe} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    String::from_utf8(out.stdout).map_err(|_| ExternalToolError(format!("{exe} printed invalid UTF-8")))
}

/// Splits text at pause punctuation, keeping each mark as its own piece.
fn clauses<'a>(text: &'a str, opts: &MapOptions) -> Vec<(&'a str, Option<String>)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        let mark = c.to_string();
        if opts.is_pause(&mark) {
            out.push((&text[start..i], Some(mark)));
            start = i + c.len_utf8();
        }
    }
    out.push((&text[start..], None));
    out
}

pub fn run(args: G2pArgs) -> anyhow::Result<()> {
    let inv = args.inventory.load()?;
    let opts = MapOptions { mode: if args.lenient { MapMode::Lenient } else { MapMode::Strict }, ..MapOptions::default() };
    let exe = espeak();
    let mut symbols = Vec::new();
    let mut raw = Vec::new();
    for (clause, mark) in clauses(&args.text, &opts) {
        if !clause.trim().is_empty() {
            let ipa = phonemize(&exe, &args.lang, clause.trim())?;
            symbols.extend(
                ipa.split_whitespace().filter(|s| !strip_diacritics(s).is_empty()).map(str::to_string),
            );
            raw.push(ipa.trim_end().to_string());
        }
        if let Some(m) = mark {
            symbols.push(m);
        }
    }
    let mut targets = inv.map_ipa(&symbols, &opts)?;
    targets.source_text = Some(args.text.clone());
    let mut doc = TargetsDocument::from_targets(&targets, &inv)?;
    doc.ipa = symbols;
    doc.raw_g2p = Some(raw.join("\n"));
    let json = doc.to_json()? + "\n";
    match &args.output {
        Some(p) => io::write(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clauses_keep_marks() {
        let opts = MapOptions::default();
        let c = clauses("cat, dog.", &opts);
        assert_eq!(c, vec![("cat", Some(",".into())), (" dog", Some(".".into())), ("", None)]);
    }
}
