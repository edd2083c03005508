use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use ctc_align::document::write_atomic;
use ctc_align::posterior::{read_posteriorgram, ReadOptions, ValueSpace};
use ctc_align::Posteriorgram;

pub const PGRM_EXT: &str = ".pgrm";
pub const POSTERIOR_JSON_EXT: &str = ".post.json";
pub const TARGETS_EXT: &str = ".targets.json";
pub const ALIGN_EXT: &str = ".align.json";
pub const REFERENCE_EXT: &str = ".ref.json";
pub const TEXTGRID_EXT: &str = ".TextGrid";

pub fn read_posterior(path: &Path, space: Option<ValueSpace>, check: bool) -> anyhow::Result<Posteriorgram> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let opts = ReadOptions { space, check_normalization: check };
    read_posteriorgram(&bytes, &opts).with_context(|| format!("reading {}", path.display()))
}

pub fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// File name with a known posteriorgram or document suffix removed.
pub fn utterance_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for ext in [PGRM_EXT, POSTERIOR_JSON_EXT, TARGETS_EXT, ALIGN_EXT, REFERENCE_EXT, ".json"] {
        if let Some(stem) = name.strip_suffix(ext) {
            return stem.to_string();
        }
    }
    name
}

/// Sorted files in `dir` accepted by `keep`.
pub fn list(dir: &Path, keep: impl Fn(&str) -> bool) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if path.is_file() && keep(&name) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn is_posteriorgram(name: &str) -> bool {
    name.ends_with(PGRM_EXT) || name.ends_with(POSTERIOR_JSON_EXT)
}

pub fn is_alignment(name: &str) -> bool {
    name.ends_with(".json") && !name.ends_with(TARGETS_EXT) && !name.ends_with(POSTERIOR_JSON_EXT)
}
