//! Frame-level log-probability matrices and their on-disk formats.
//!
//! Binary `PGRM` layout (all integers little-endian):
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 4     | magic `PGRM`                            |
//! | 1     | version, `1`                            |
//! | 4     | `u32` frame count T                     |
//! | 4     | `u32` class count V                     |
//! | 2     | `u16` frame hop, tenths of a ms         |
//! | 2     | `u16` first-frame offset, tenths of a ms|
//! | 1     | head tag: 0 phoneme, 1 group            |
//! | 4·T·V | `f32` log-probabilities, row-major      |

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phoneset::Head;
use crate::time::{maybe_neg_inf, Ticks};

pub const MAGIC: &[u8; 4] = b"PGRM";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 18;

/// Allowed deviation of a raw frame's logsumexp from zero.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-3;

/// T×V matrix of natural-log class probabilities with frame timing.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriorgram {
    logits: Vec<f32>,
    num_frames: usize,
    num_classes: usize,
    frame_hop: Ticks,
    frame_offset: Ticks,
    head: Head,
}

impl Posteriorgram {
    /// Builds a posteriorgram from row-major log-probabilities. Entries must
    /// be finite or negative infinity.
    pub fn new(
        logits: Vec<f32>,
        num_frames: usize,
        num_classes: usize,
        frame_hop: Ticks,
        frame_offset: Ticks,
        head: Head,
    ) -> Result<Self> {
        if num_frames == 0 {
            return Err(Error::Format("posteriorgram has no frames".into()));
        }
        if num_classes == 0 {
            return Err(Error::Format("posteriorgram has no classes".into()));
        }
        if frame_hop == Ticks::ZERO {
            return Err(Error::Format("frame hop must be positive".into()));
        }
        if logits.len() != num_frames * num_classes {
            return Err(Error::Format(format!(
                "expected {num_frames}x{num_classes} = {} values, found {}",
                num_frames * num_classes,
                logits.len()
            )));
        }
        if let Some(i) = logits.iter().position(|v| v.is_nan() || *v == f32::INFINITY) {
            return Err(Error::NonFinite { frame: i / num_classes, class: i % num_classes });
        }
        Ok(Self { logits, num_frames, num_classes, frame_hop, frame_offset, head })
    }

    pub fn from_rows(rows: &[Vec<f32>], frame_hop: Ticks, frame_offset: Ticks, head: Head) -> Result<Self> {
        let num_classes = rows.first().map_or(0, Vec::len);
        if let Some(t) = rows.iter().position(|r| r.len() != num_classes) {
            return Err(Error::Format(format!("frame {t} has {} classes, expected {num_classes}", rows[t].len())));
        }
        Self::new(rows.concat(), rows.len(), num_classes, frame_hop, frame_offset, head)
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn frame_hop(&self) -> Ticks {
        self.frame_hop
    }

    pub fn frame_offset(&self) -> Ticks {
        self.frame_offset
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn logits(&self) -> &[f32] {
        &self.logits
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.logits[t * self.num_classes..(t + 1) * self.num_classes]
    }

    #[inline]
    pub fn get(&self, t: usize, class: usize) -> f32 {
        self.logits[t * self.num_classes + class]
    }

    /// Start time of frame `t`; frame `t` covers `[start(t), start(t + 1))`.
    #[inline]
    pub fn frame_start(&self, t: usize) -> Ticks {
        Ticks(self.frame_offset.0 + t as u64 * self.frame_hop.0)
    }

    /// Frame containing time `at`, if `at` lies on the frame grid.
    pub fn frame_at(&self, at: Ticks) -> Option<usize> {
        let rel = at.0.checked_sub(self.frame_offset.0)?;
        (rel % self.frame_hop.0 == 0).then_some((rel / self.frame_hop.0) as usize)
    }

    pub fn span_start(&self) -> Ticks {
        self.frame_offset
    }

    pub fn span_end(&self) -> Ticks {
        self.frame_start(self.num_frames)
    }

    pub fn duration(&self) -> Ticks {
        Ticks(self.num_frames as u64 * self.frame_hop.0)
    }

    /// Copy of a frame range, with the offset moved so times are unchanged.
    pub fn slice(&self, frames: Range<usize>) -> Result<Self> {
        if frames.start >= frames.end || frames.end > self.num_frames {
            return Err(Error::Format(format!("invalid frame range {frames:?} for {} frames", self.num_frames)));
        }
        let v = self.num_classes;
        Ok(Self {
            logits: self.logits[frames.start * v..frames.end * v].to_vec(),
            num_frames: frames.len(),
            num_classes: v,
            frame_hop: self.frame_hop,
            frame_offset: self.frame_start(frames.start),
            head: self.head,
        })
    }

    /// Copy with `f` applied to every entry of the selected columns.
    pub fn map_columns(&self, columns: &[bool], f: impl Fn(f32) -> f32) -> Self {
        debug_assert_eq!(columns.len(), self.num_classes);
        let mut out = self.clone();
        for row in out.logits.chunks_exact_mut(self.num_classes) {
            for (v, &sel) in row.iter_mut().zip(columns) {
                if sel {
                    *v = f(*v);
                }
            }
        }
        out
    }

    /// Checks that every frame's logsumexp is within
    /// [`NORMALIZATION_TOLERANCE`] of zero.
    pub fn check_normalized(&self) -> Result<()> {
        for t in 0..self.num_frames {
            let lse = logsumexp(self.row(t));
            if !(lse.abs() <= NORMALIZATION_TOLERANCE) {
                return Err(Error::Normalization { frame: t, logsumexp: lse });
            }
        }
        Ok(())
    }
}

pub fn logsumexp(row: &[f32]) -> f64 {
    let max = row.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + row.iter().map(|&v| (v as f64 - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueSpace {
    #[default]
    Log,
    Prob,
}

#[derive(Debug, Clone, Copy)]
pub struct ReadOptions {
    /// Overrides the value space of JSON input (binary input is always log).
    pub space: Option<ValueSpace>,
    pub check_normalization: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self { space: None, check_normalization: true }
    }
}

/// Reads a posteriorgram in either the `PGRM` binary or the JSON format.
pub fn read_posteriorgram(bytes: &[u8], opts: &ReadOptions) -> Result<Posteriorgram> {
    let p = if bytes.starts_with(MAGIC) {
        decode_pgram(bytes)?
    } else {
        decode_json(bytes, opts.space)?
    };
    if opts.check_normalization {
        p.check_normalized()?;
    }
    Ok(p)
}

fn decode_pgram(bytes: &[u8]) -> Result<Posteriorgram> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("truncated header".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let u16_at = |i: usize| u16::from_le_bytes(bytes[i..i + 2].try_into().unwrap()) as u64;
    let (t, v) = (u32_at(5), u32_at(9));
    let hop = Ticks(u16_at(13));
    let offset = Ticks(u16_at(15));
    let head = Head::from_tag(bytes[17]).ok_or_else(|| Error::Format(format!("unknown head tag {}", bytes[17])))?;
    let expected = t
        .checked_mul(v)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("size overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::Format(format!("{t}x{v} matrix needs {expected} data bytes, found {}", body.len())));
    }
    let logits = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Posteriorgram::new(logits, t, v, hop, offset, head)
}

/// Encodes a posteriorgram in the `PGRM` binary format.
pub fn write_posteriorgram(p: &Posteriorgram) -> Result<Vec<u8>> {
    let narrow = |x: u64, what: &str| {
        u16::try_from(x).map_err(|_| Error::Format(format!("{what} of {} does not fit the header", Ticks(x))))
    };
    let t = u32::try_from(p.num_frames).map_err(|_| Error::Format("too many frames".into()))?;
    let v = u32::try_from(p.num_classes).map_err(|_| Error::Format("too many classes".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * p.logits.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&v.to_le_bytes());
    out.extend_from_slice(&narrow(p.frame_hop.0, "frame hop")?.to_le_bytes());
    out.extend_from_slice(&narrow(p.frame_offset.0, "frame offset")?.to_le_bytes());
    out.push(p.head.tag());
    for x in &p.logits {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JsonPosteriorgram {
    frames: Vec<Vec<JsonValue>>,
    frame_hop_ms: f64,
    #[serde(default)]
    frame_offset_ms: f64,
    #[serde(default = "default_head")]
    head: Head,
    #[serde(default)]
    space: ValueSpace,
}

fn default_head() -> Head {
    Head::Phoneme
}

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct JsonValue(#[serde(with = "maybe_neg_inf")] f64);

fn decode_json(bytes: &[u8], space: Option<ValueSpace>) -> Result<Posteriorgram> {
    let doc: JsonPosteriorgram = serde_json::from_slice(bytes)?;
    let space = space.unwrap_or(doc.space);
    let hop = Ticks::from_ms_exact(doc.frame_hop_ms)
        .ok_or_else(|| Error::Format(format!("frame_hop_ms {} is not a multiple of 0.1 ms", doc.frame_hop_ms)))?;
    let offset = Ticks::from_ms_exact(doc.frame_offset_ms).ok_or_else(|| {
        Error::Format(format!("frame_offset_ms {} is not a multiple of 0.1 ms", doc.frame_offset_ms))
    })?;
    let mut rows = Vec::with_capacity(doc.frames.len());
    for (t, frame) in doc.frames.iter().enumerate() {
        let row = frame
            .iter()
            .enumerate()
            .map(|(c, &JsonValue(v))| match space {
                ValueSpace::Log => Ok(v as f32),
                ValueSpace::Prob if (0.0..=1.0 + NORMALIZATION_TOLERANCE).contains(&v) => Ok(v.ln() as f32),
                ValueSpace::Prob => {
                    Err(Error::Format(format!("probability {v} out of range at frame {t}, class {c}")))
                }
            })
            .collect::<Result<Vec<f32>>>()?;
        rows.push(row);
    }
    Posteriorgram::from_rows(&rows, hop, offset, doc.head)
}

/// Encodes a posteriorgram in the JSON format (log space).
pub fn posteriorgram_to_json(p: &Posteriorgram) -> Result<String> {
    let doc = JsonPosteriorgram {
        frames: (0..p.num_frames).map(|t| p.row(t).iter().map(|&v| JsonValue(v as f64)).collect()).collect(),
        frame_hop_ms: p.frame_hop.ms(),
        frame_offset_ms: p.frame_offset.ms(),
        head: p.head,
        space: ValueSpace::Log,
    };
    Ok(serde_json::to_string(&doc)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(rows: &[Vec<f32>]) -> Posteriorgram {
        Posteriorgram::from_rows(rows, Ticks(100), Ticks(0), Head::Phoneme).unwrap()
    }

    fn log_row(probs: &[f64]) -> Vec<f32> {
        probs.iter().map(|p| p.ln() as f32).collect()
    }

    #[test]
    fn pgram_round_trip_3x6() {
        let rows: Vec<Vec<f32>> = (0..3).map(|_| log_row(&[0.5, 0.1, 0.1, 0.1, 0.1, 0.1])).collect();
        let p = toy(&rows);
        let bytes = write_posteriorgram(&p).unwrap();
        assert_eq!(bytes.len(), 18 + 3 * 6 * 4);
        let q = read_posteriorgram(&bytes, &ReadOptions::default()).unwrap();
        assert_eq!((q.num_frames(), q.num_classes()), (3, 6));
        assert_eq!(p, q);
    }

    #[test]
    fn minimal_matrix_round_trips() {
        let p = toy(&[vec![0.0, f32::NEG_INFINITY]]);
        let q = read_posteriorgram(&write_posteriorgram(&p).unwrap(), &ReadOptions::default()).unwrap();
        assert_eq!(p, q);
        let j = posteriorgram_to_json(&p).unwrap();
        assert_eq!(read_posteriorgram(j.as_bytes(), &ReadOptions::default()).unwrap(), p);
    }

    #[test]
    fn empty_rejected() {
        assert!(Posteriorgram::new(vec![], 0, 2, Ticks(100), Ticks(0), Head::Phoneme).is_err());
        let mut bytes = write_posteriorgram(&toy(&[vec![0.0]])).unwrap();
        bytes[5..9].copy_from_slice(&0u32.to_le_bytes());
        bytes.truncate(HEADER_LEN);
        assert!(read_posteriorgram(&bytes, &ReadOptions::default()).is_err());
    }

    #[test]
    fn nan_names_frame_and_class() {
        let mut bytes = write_posteriorgram(&toy(&[log_row(&[0.5, 0.5]), log_row(&[0.5, 0.5])])).unwrap();
        let at = HEADER_LEN + 4 * 3;
        bytes[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        match read_posteriorgram(&bytes, &ReadOptions::default()) {
            Err(Error::NonFinite { frame: 1, class: 1 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_magic_version_and_size() {
        let good = write_posteriorgram(&toy(&[vec![0.0]])).unwrap();
        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(matches!(read_posteriorgram(&v2, &ReadOptions::default()), Err(Error::Format(_))));
        let mut short = good.clone();
        short.pop();
        assert!(matches!(read_posteriorgram(&short, &ReadOptions::default()), Err(Error::Format(_))));
        // not PGRM and not JSON
        assert!(read_posteriorgram(b"PGRX....", &ReadOptions::default()).is_err());
    }

    #[test]
    fn prob_space_row_summing_to_098_is_rejected() {
        let json = r#"{"frames": [[0.5, 0.48]], "frame_hop_ms": 10, "space": "prob"}"#;
        match read_posteriorgram(json.as_bytes(), &ReadOptions::default()) {
            Err(Error::Normalization { frame: 0, logsumexp }) => {
                assert!((logsumexp - 0.98f64.ln()).abs() < 1e-6);
            }
            other => panic!("{other:?}"),
        }
        let ok = r#"{"frames": [[0.5, 0.5], [1, 0]], "frame_hop_ms": 10, "space": "prob"}"#;
        let p = read_posteriorgram(ok.as_bytes(), &ReadOptions::default()).unwrap();
        assert_eq!(p.get(1, 1), f32::NEG_INFINITY);
    }

    #[test]
    fn space_override_applies_to_json() {
        let json = r#"{"frames": [[0.25, 0.75]], "frame_hop_ms": 20, "frame_offset_ms": 5}"#;
        let opts = ReadOptions { space: Some(ValueSpace::Prob), check_normalization: true };
        let p = read_posteriorgram(json.as_bytes(), &opts).unwrap();
        assert_eq!(p.frame_hop(), Ticks(200));
        assert_eq!(p.frame_start(1), Ticks(250));
    }

    #[test]
    fn frame_grid() {
        let p = Posteriorgram::from_rows(&vec![vec![0.0]; 5], Ticks(100), Ticks(30), Head::Phoneme).unwrap();
        assert_eq!(p.frame_start(2), Ticks(230));
        assert_eq!(p.span_end(), Ticks(530));
        assert_eq!(p.frame_at(Ticks(230)), Some(2));
        assert_eq!(p.frame_at(Ticks(231)), None);
        let s = p.slice(2..4).unwrap();
        assert_eq!(s.frame_start(0), Ticks(230));
        assert_eq!(s.span_end(), Ticks(430));
    }
}
