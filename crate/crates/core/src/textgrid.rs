//! Praat TextGrid (long text format) with a single interval tier named
//! "phones". Gaps and utterance edges become empty-label intervals.

use std::fmt::Write as _;

use crate::document::AlignmentDocument;
use crate::error::{Error, Result};
use crate::time::Ticks;

pub const TIER_NAME: &str = "phones";

#[derive(Debug, Clone, PartialEq)]
pub struct TgInterval {
    pub start: Ticks,
    pub end: Ticks,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTier {
    pub name: String,
    pub xmin: Ticks,
    pub xmax: Ticks,
    pub intervals: Vec<TgInterval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextGrid {
    pub xmin: Ticks,
    pub xmax: Ticks,
    pub tiers: Vec<IntervalTier>,
}

fn ticks(ms: f64) -> Result<Ticks> {
    Ticks::from_ms_exact(ms).ok_or_else(|| Error::Format(format!("{ms} ms is not on the 0.1 ms grid")))
}

impl TextGrid {
    /// One "phones" tier covering the document span, with empty intervals
    /// filling everything between phonemes.
    pub fn from_document(doc: &AlignmentDocument) -> Result<Self> {
        let (xmin, xmax) = (ticks(doc.span_start_ms)?, ticks(doc.span_end_ms)?);
        let mut intervals = Vec::with_capacity(doc.intervals.len() * 2 + 1);
        let mut cursor = xmin;
        for r in &doc.intervals {
            let (s, e) = (ticks(r.start_ms)?, ticks(r.end_ms)?);
            if s < cursor || e <= s || e > xmax {
                return Err(Error::Format(format!("interval {} [{s}, {e}) is out of order", r.label)));
            }
            if s > cursor {
                intervals.push(TgInterval { start: cursor, end: s, text: String::new() });
            }
            intervals.push(TgInterval { start: s, end: e, text: r.label.clone() });
            cursor = e;
        }
        if cursor < xmax {
            intervals.push(TgInterval { start: cursor, end: xmax, text: String::new() });
        }
        Ok(Self { xmin, xmax, tiers: vec![IntervalTier { name: TIER_NAME.into(), xmin, xmax, intervals }] })
    }

    /// Labelled intervals of the named tier, empty-label intervals dropped.
    pub fn labelled(&self, tier: &str) -> Option<Vec<(String, Ticks, Ticks)>> {
        let t = self.tiers.iter().find(|t| t.name == tier)?;
        Some(t.intervals.iter().filter(|i| !i.text.is_empty()).map(|i| (i.text.clone(), i.start, i.end)).collect())
    }

    pub fn to_long_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "File type = \"ooTextFile\"");
        let _ = writeln!(out, "Object class = \"TextGrid\"");
        let _ = writeln!(out);
        let _ = writeln!(out, "xmin = {}", self.xmin.seconds());
        let _ = writeln!(out, "xmax = {}", self.xmax.seconds());
        let _ = writeln!(out, "tiers? <exists>");
        let _ = writeln!(out, "size = {}", self.tiers.len());
        let _ = writeln!(out, "item []:");
        for (k, tier) in self.tiers.iter().enumerate() {
            let _ = writeln!(out, "    item [{}]:", k + 1);
            let _ = writeln!(out, "        class = \"IntervalTier\"");
            let _ = writeln!(out, "        name = {}", quote(&tier.name));
            let _ = writeln!(out, "        xmin = {}", tier.xmin.seconds());
            let _ = writeln!(out, "        xmax = {}", tier.xmax.seconds());
            let _ = writeln!(out, "        intervals: size = {}", tier.intervals.len());
            for (i, iv) in tier.intervals.iter().enumerate() {
                let _ = writeln!(out, "        intervals [{}]:", i + 1);
                let _ = writeln!(out, "            xmin = {}", iv.start.seconds());
                let _ = writeln!(out, "            xmax = {}", iv.end.seconds());
                let _ = writeln!(out, "            text = {}", quote(&iv.text));
            }
        }
        out
    }

    /// Reads the long text format. Only interval tiers are supported.
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { lines: src.lines().enumerate().peekable() };
        p.expect_eq("File type", "\"ooTextFile\"")?;
        p.expect_eq("Object class", "\"TextGrid\"")?;
        let xmin = p.seconds("xmin")?;
        let xmax = p.seconds("xmax")?;
        let (line, exists) = p.next()?;
        if exists != "tiers? <exists>" {
            return Err(tg_err(line, "expected `tiers? <exists>`"));
        }
        let size = p.count("size")?;
        p.literal("item []:")?;
        let mut tiers = Vec::with_capacity(size);
        for k in 1..=size {
            p.literal(&format!("item [{k}]:"))?;
            let (line, class) = p.field("class")?;
            if unquote(&class, line)? != "IntervalTier" {
                return Err(tg_err(line, format!("unsupported tier class {class}")));
            }
            let (line, name) = p.field("name")?;
            let name = unquote(&name, line)?;
            let txmin = p.seconds("xmin")?;
            let txmax = p.seconds("xmax")?;
            let n = p.count("intervals: size")?;
            let mut intervals = Vec::with_capacity(n);
            for i in 1..=n {
                p.literal(&format!("intervals [{i}]:"))?;
                let start = p.seconds("xmin")?;
                let end = p.seconds("xmax")?;
                let (line, text) = p.field("text")?;
                intervals.push(TgInterval { start, end, text: unquote(&text, line)? });
            }
            tiers.push(IntervalTier { name, xmin: txmin, xmax: txmax, intervals });
        }
        Ok(Self { xmin, xmax, tiers })
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn unquote(s: &str, line: usize) -> Result<String> {
    let inner = s
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .ok_or_else(|| tg_err(line, format!("expected a quoted string, found {s}")))?;
    Ok(inner.replace("\"\"", "\""))
}

fn tg_err(line: usize, message: impl Into<String>) -> Error {
    Error::TextGrid { line: line + 1, message: message.into() }
}

struct Parser<'a, I: Iterator<Item = (usize, &'a str)>> {
    lines: std::iter::Peekable<I>,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Parser<'a, I> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((n, l)) => return Ok((n, l.trim())),
                None => return Err(Error::TextGrid { line: 0, message: "unexpected end of file".into() }),
            }
        }
    }

    fn literal(&mut self, want: &str) -> Result<()> {
        let (line, got) = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(tg_err(line, format!("expected `{want}`, found `{got}`")))
        }
    }

    fn field(&mut self, key: &str) -> Result<(usize, String)> {
        let (line, got) = self.next()?;
        let value = got
            .strip_prefix(key)
            .and_then(|r| r.trim_start().strip_prefix('='))
            .ok_or_else(|| tg_err(line, format!("expected `{key} = ...`, found `{got}`")))?;
        Ok((line, value.trim().to_string()))
    }

    fn expect_eq(&mut self, key: &str, want: &str) -> Result<()> {
        let (line, v) = self.field(key)?;
        if v == want {
            Ok(())
        } else {
            Err(tg_err(line, format!("expected {key} = {want}")))
        }
    }

    fn seconds(&mut self, key: &str) -> Result<Ticks> {
        let (line, v) = self.field(key)?;
        let s: f64 = v.parse().map_err(|_| tg_err(line, format!("bad number {v}")))?;
        Ticks::from_ms(s * 1000.0).ok_or_else(|| tg_err(line, format!("bad time {v}")))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (line, v) = self.field(key)?;
        v.parse().map_err(|_| tg_err(line, format!("bad count {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{IntervalRecord, Provenance};

    fn doc() -> AlignmentDocument {
        let r = |label: &str, s, e| IntervalRecord { label: label.into(), start_ms: s, end_ms: e, score: 0.0, inserted: false };
        AlignmentDocument {
            utterance_id: "u".into(),
            frame_hop_ms: 10.0,
            frame_offset_ms: 0.0,
            span_start_ms: 0.0,
            span_end_ms: 310.0,
            intervals: vec![r("k", 12.5, 40.0), r("\"q\"", 60.0, 90.0), r("t", 90.0, 300.1)],
            gaps: vec![],
            provenance: Provenance::Imported { source: String::new() },
        }
    }

    #[test]
    fn fills_gaps_and_edges() {
        let tg = TextGrid::from_document(&doc()).unwrap();
        let texts: Vec<&str> = tg.tiers[0].intervals.iter().map(|i| i.text.as_str()).collect();
        assert_eq!(texts, vec!["", "k", "", "\"q\"", "t", ""]);
        assert_eq!(tg.tiers[0].name, "phones");
    }

    #[test]
    fn long_text_round_trip() {
        let tg = TextGrid::from_document(&doc()).unwrap();
        let text = tg.to_long_text();
        assert!(text.contains("xmin = 0.0125"));
        assert!(text.contains("text = \"\"\"q\"\"\""));
        let back = TextGrid::parse(&text).unwrap();
        assert_eq!(back, tg);
        let labels = back.labelled("phones").unwrap();
        assert_eq!(labels[2], ("t".to_string(), Ticks(900), Ticks(3001)));
    }

    #[test]
    fn parse_errors_carry_line() {
        let text = TextGrid::from_document(&doc()).unwrap().to_long_text().replace("xmax = 0.04\n", "xmax = abc\n");
        match TextGrid::parse(&text) {
            Err(Error::TextGrid { line, .. }) => assert!(line > 10),
            other => panic!("{other:?}"),
        }
        assert!(TextGrid::parse("").is_err());
    }
}
