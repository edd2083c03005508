//! JSON interchange documents: alignments with a provenance record, and
//! target sequences. Files are written atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::BoundarySet;
use crate::phoneset::{PhonemeInventory, TargetSequence, Token};
use crate::pipeline::{AlignConfig, Alignment, PhonemeInterval};
use crate::synth::SynthScenario;
use crate::time::{maybe_neg_inf, Ticks};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub label: String,
    pub start_ms: f64,
    pub end_ms: f64,
    #[serde(with = "maybe_neg_inf")]
    pub score: f64,
    #[serde(default)]
    pub inserted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    /// Index of the interval the gap follows.
    pub after: usize,
    pub start_ms: f64,
    pub end_ms: f64,
}

/// What produced a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Align { config: AlignConfig, decode: String, inserted: usize },
    Synth { scenario: SynthScenario },
    Imported { source: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDocument {
    pub utterance_id: String,
    pub frame_hop_ms: f64,
    pub frame_offset_ms: f64,
    pub span_start_ms: f64,
    pub span_end_ms: f64,
    pub intervals: Vec<IntervalRecord>,
    #[serde(default)]
    pub gaps: Vec<GapRecord>,
    pub provenance: Provenance,
}

fn grid(ms: f64, what: &str) -> Result<Ticks> {
    Ticks::from_ms_exact(ms).ok_or_else(|| Error::Format(format!("{what} {ms} ms is not on the 0.1 ms grid")))
}

impl AlignmentDocument {
    pub fn from_alignment(
        utterance_id: impl Into<String>,
        a: &Alignment,
        frame_hop: Ticks,
        frame_offset: Ticks,
        inv: &PhonemeInventory,
        provenance: Provenance,
    ) -> Result<Self> {
        let intervals = a
            .intervals
            .iter()
            .map(|i| {
                let label = inv.label(i.label).ok_or(Error::LabelOutOfRange {
                    label: i.label,
                    num_classes: inv.num_classes(crate::phoneset::Head::Phoneme),
                })?;
                Ok(IntervalRecord {
                    label: label.to_string(),
                    start_ms: i.start.ms(),
                    end_ms: i.end.ms(),
                    score: i.score,
                    inserted: i.inserted,
                })
            })
            .collect::<Result<_>>()?;
        let gaps = a
            .gaps
            .iter()
            .map(|g| GapRecord {
                after: g.after,
                start_ms: a.intervals[g.after].end.ms(),
                end_ms: a.intervals[g.after + 1].start.ms(),
            })
            .collect();
        Ok(Self {
            utterance_id: utterance_id.into(),
            frame_hop_ms: frame_hop.ms(),
            frame_offset_ms: frame_offset.ms(),
            span_start_ms: a.span_start.ms(),
            span_end_ms: a.span_end.ms(),
            intervals,
            gaps,
            provenance,
        })
    }

    /// Rebuilds the alignment. Gaps are re-derived from the intervals.
    pub fn to_alignment(&self, inv: &PhonemeInventory) -> Result<Alignment> {
        let intervals = self
            .intervals
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let label = inv
                    .class_of_label(&r.label)
                    .ok_or_else(|| Error::UnknownSymbol { symbol: r.label.clone(), position: k + 1 })?;
                Ok(PhonemeInterval {
                    label,
                    start: grid(r.start_ms, "interval start")?,
                    end: grid(r.end_ms, "interval end")?,
                    score: r.score,
                    inserted: r.inserted,
                })
            })
            .collect::<Result<_>>()?;
        let a = Alignment::new(intervals, grid(self.span_start_ms, "span start")?, grid(self.span_end_ms, "span end")?);
        a.check().map_err(Error::Format)?;
        Ok(a)
    }

    /// Onsets, offsets and labels for evaluation.
    pub fn boundaries(&self) -> Result<BoundarySet> {
        BoundarySet::new(
            self.intervals.iter().map(|i| i.start_ms).collect(),
            Some(self.intervals.iter().map(|i| i.end_ms).collect()),
            self.intervals.iter().map(|i| i.label.clone()).collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetItem {
    Phoneme(String),
    Silence,
}

/// Targets file: the label sequence plus what it was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetsDocument {
    pub items: Vec<TargetItem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ipa: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
    /// Unparsed G2P output, kept for auditing symbol segmentation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_g2p: Option<String>,
}

impl TargetsDocument {
    pub fn from_targets(t: &TargetSequence, inv: &PhonemeInventory) -> Result<Self> {
        let items = t
            .items()
            .iter()
            .map(|tok| match *tok {
                Token::Phoneme(c) => inv
                    .label(c)
                    .map(|l| TargetItem::Phoneme(l.to_string()))
                    .ok_or(Error::LabelOutOfRange { label: c, num_classes: inv.num_classes(crate::Head::Phoneme) }),
                Token::Silence => Ok(TargetItem::Silence),
            })
            .collect::<Result<_>>()?;
        Ok(Self { items, ipa: Vec::new(), source_text: t.source_text.clone(), raw_g2p: None })
    }

    pub fn to_targets(&self, inv: &PhonemeInventory) -> Result<TargetSequence> {
        let items = self
            .items
            .iter()
            .enumerate()
            .map(|(k, it)| match it {
                TargetItem::Phoneme(l) => inv
                    .class_of_label(l)
                    .map(Token::Phoneme)
                    .ok_or_else(|| Error::UnknownSymbol { symbol: l.clone(), position: k + 1 }),
                TargetItem::Silence => Ok(Token::Silence),
            })
            .collect::<Result<_>>()?;
        let mut t = TargetSequence::new(items, inv)?;
        t.source_text = self.source_text.clone();
        Ok(t)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
