//! Alignment pipeline around the lattice decoder: probability floor and
//! boosting for target classes, silence-split decoding, interval and gap
//! extraction, and the completeness pass.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Infeasibility, Result};
use crate::lattice::{self, backtrace_to_occupancy, OccupancyRun, StatePath};
use crate::par;
use crate::phoneset::{Head, PhonemeInventory, TargetSequence};
use crate::posterior::Posteriorgram;
use crate::time::{maybe_neg_inf, Ticks};

pub const DEFAULT_BOOST: f64 = 5.0;
pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Multiplier applied to target-class probabilities (added as `ln β`).
    pub boost_factor: f64,
    /// Minimum probability of every target class in every frame.
    pub floor: f64,
    pub boost_enabled: bool,
    pub enforce_completeness: bool,
    pub hierarchical: bool,
    /// Blank gaps strictly shorter than this are closed.
    pub gap_tolerance_ms: f64,
    /// Silence plus blank probability a frame must exceed to count as silent.
    pub silence_threshold: f64,
    pub silence_min_duration_ms: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            boost_factor: DEFAULT_BOOST,
            floor: DEFAULT_FLOOR,
            boost_enabled: true,
            enforce_completeness: true,
            hierarchical: true,
            gap_tolerance_ms: 0.0,
            silence_threshold: 0.5,
            silence_min_duration_ms: 100.0,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self, frame_hop: Ticks) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.boost_factor >= 1.0 && self.boost_factor.is_finite()) {
            return fail(format!("boost factor must be >= 1, got {}", self.boost_factor));
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return fail(format!("floor must lie in (0, 1), got {}", self.floor));
        }
        if !(self.gap_tolerance_ms >= 0.0 && self.gap_tolerance_ms.is_finite()) {
            return fail(format!("gap tolerance must be >= 0, got {}", self.gap_tolerance_ms));
        }
        if !(0.0..=1.0).contains(&self.silence_threshold) {
            return fail(format!("silence threshold must lie in [0, 1], got {}", self.silence_threshold));
        }
        if !(self.silence_min_duration_ms >= frame_hop.ms()) {
            return fail(format!(
                "silence minimum duration {} ms is shorter than the frame hop {}",
                self.silence_min_duration_ms, frame_hop
            ));
        }
        Ok(())
    }

    fn gap_tolerance(&self) -> Ticks {
        Ticks::from_ms(self.gap_tolerance_ms).unwrap_or(Ticks::ZERO)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeInterval {
    /// Phoneme-head class index.
    pub label: usize,
    pub start: Ticks,
    pub end: Ticks,
    /// Mean per-frame log-probability of `label` over the interval.
    #[serde(with = "maybe_neg_inf")]
    pub score: f64,
    /// Added by the completeness pass rather than found by the decoder.
    pub inserted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    /// Index of the interval the gap follows.
    pub after: usize,
    pub duration: Ticks,
}

/// Ordered, non-overlapping phoneme intervals over an utterance span.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub intervals: Vec<PhonemeInterval>,
    pub gaps: Vec<Gap>,
    pub span_start: Ticks,
    pub span_end: Ticks,
}

impl Alignment {
    /// Builds an alignment; gaps are derived from the intervals.
    pub fn new(intervals: Vec<PhonemeInterval>, span_start: Ticks, span_end: Ticks) -> Self {
        let gaps = intervals
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].start > w[0].end)
            .map(|(i, w)| Gap { after: i, duration: w[1].start - w[0].end })
            .collect();
        Self { intervals, gaps, span_start, span_end }
    }

    pub fn labels(&self) -> Vec<usize> {
        self.intervals.iter().map(|i| i.label).collect()
    }

    pub fn utterance_span(&self) -> Ticks {
        self.span_end - self.span_start
    }

    /// Silence before the first phoneme; not counted as a gap.
    pub fn leading_silence(&self) -> Ticks {
        self.intervals.first().map_or(self.utterance_span(), |i| i.start - self.span_start)
    }

    pub fn trailing_silence(&self) -> Ticks {
        self.intervals.last().map_or(Ticks::ZERO, |i| self.span_end - i.end)
    }

    /// Checks ordering, non-overlap and span containment.
    pub fn check(&self) -> std::result::Result<(), String> {
        let mut prev_end = self.span_start;
        for (i, iv) in self.intervals.iter().enumerate() {
            if iv.start >= iv.end {
                return Err(format!("interval {i} is empty or reversed"));
            }
            if iv.start < prev_end {
                return Err(format!("interval {i} starts before the previous one ends"));
            }
            prev_end = iv.end;
        }
        if prev_end > self.span_end {
            return Err("intervals extend past the utterance span".into());
        }
        Ok(())
    }
}

fn target_columns(num_classes: usize, targets: &TargetSequence) -> Vec<bool> {
    let mut cols = vec![false; num_classes];
    for c in targets.phonemes() {
        if c < num_classes {
            cols[c] = true;
        }
    }
    cols
}

/// Adds `ln β` to every target-class log-probability. Rows are not
/// renormalized.
pub fn boost_targets(p: &Posteriorgram, targets: &TargetSequence, beta: f64) -> Posteriorgram {
    let shift = beta.ln() as f32;
    p.map_columns(&target_columns(p.num_classes(), targets), |v| v + shift)
}

/// Raises every target-class log-probability to at least `ln ε`.
pub fn apply_floor(p: &Posteriorgram, targets: &TargetSequence, epsilon: f64) -> Posteriorgram {
    let floor = epsilon.ln() as f32;
    p.map_columns(&target_columns(p.num_classes(), targets), |v| v.max(floor))
}

/// Maximal frame runs whose silence plus blank probability exceeds the
/// threshold and which last at least the minimum duration. Ranges are
/// half-open frame ranges.
pub fn detect_silence_regions(p: &Posteriorgram, inv: &PhonemeInventory, cfg: &AlignConfig) -> Vec<Range<usize>> {
    let (sil, blank) = (inv.silence_id(), inv.blank_id());
    let min_ticks = Ticks::from_ms(cfg.silence_min_duration_ms).unwrap_or(Ticks::ZERO);
    let long_enough = |r: &Range<usize>| Ticks(r.len() as u64 * p.frame_hop().0) >= min_ticks;
    let mut regions = Vec::new();
    let mut run_start = None;
    for t in 0..p.num_frames() {
        let mass = (p.get(t, sil) as f64).exp() + (p.get(t, blank) as f64).exp();
        match (mass > cfg.silence_threshold, run_start) {
            (true, None) => run_start = Some(t),
            (false, Some(s)) => {
                regions.push(s..t);
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        regions.push(s..p.num_frames());
    }
    regions.retain(long_enough);
    regions
}

/// Converts occupancy runs into phoneme intervals. Blank runs between
/// phonemes become gaps; gaps shorter than the tolerance are closed by
/// extending the earlier phoneme. Runs and frames are local to `p`.
pub fn extract_intervals(runs: &[OccupancyRun], path: &StatePath, p: &Posteriorgram, cfg: &AlignConfig) -> Alignment {
    let mut frames: Vec<(usize, usize, usize)> = runs
        .iter()
        .filter(|r| r.is_phoneme())
        .map(|r| (path.states()[r.position], r.first_frame, r.last_frame + 1))
        .collect();
    let tol = cfg.gap_tolerance();
    let hop = p.frame_hop().0;
    for i in 1..frames.len() {
        let gap = Ticks((frames[i].1 - frames[i - 1].2) as u64 * hop);
        if gap > Ticks::ZERO && gap < tol {
            frames[i - 1].2 = frames[i].1;
        }
    }
    let intervals = frames
        .into_iter()
        .map(|(label, first, end)| PhonemeInterval {
            label,
            start: p.frame_start(first),
            end: p.frame_start(end),
            score: mean_logit(p, label, first..end),
            inserted: false,
        })
        .collect();
    Alignment::new(intervals, p.span_start(), p.span_end())
}

pub(crate) fn mean_logit(p: &Posteriorgram, class: usize, frames: Range<usize>) -> f64 {
    let n = frames.len() as f64;
    frames.map(|t| p.get(t, class) as f64).sum::<f64>() / n
}

/// Decodes `phonemes` on a frame range. `calibrated` drives the decoder;
/// interval scores come from `raw`.
fn decode_span(
    calibrated: &Posteriorgram,
    raw: &Posteriorgram,
    frames: Range<usize>,
    phonemes: &[usize],
    cfg: &AlignConfig,
    blank: usize,
) -> Result<(Vec<PhonemeInterval>, usize)> {
    let whole = frames.start == 0 && frames.end == raw.num_frames();
    let (cal, raw) = if whole {
        (calibrated.clone(), raw.clone())
    } else {
        (calibrated.slice(frames.clone())?, raw.slice(frames)?)
    };
    let path = StatePath::new(phonemes, blank)?;
    let trace = lattice::viterbi(&cal, &path)?;
    let runs = backtrace_to_occupancy(&trace);
    let a = extract_intervals(&runs, &path, &raw, cfg);
    Ok((a.intervals, lattice::lattice_cells(cal.num_frames(), &path)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeMode {
    Global,
    Hierarchical { chunks: usize },
    /// Hierarchical decoding was requested but the global decode ran.
    Fallback(FallbackReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FallbackReason {
    CountMismatch { markers: usize, regions: usize },
    ChunkInfeasible { chunk: usize },
    /// One silence region covers the whole utterance.
    NoSpeech,
}

impl std::fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecodeMode::Global => write!(f, "global"),
            DecodeMode::Hierarchical { chunks: 1 } => write!(f, "hierarchical (1 chunk)"),
            DecodeMode::Hierarchical { chunks } => write!(f, "hierarchical ({chunks} chunks)"),
            DecodeMode::Fallback(FallbackReason::CountMismatch { markers, regions }) => {
                write!(f, "global fallback ({markers} markers, {regions} silence regions)")
            }
            DecodeMode::Fallback(FallbackReason::ChunkInfeasible { chunk }) => {
                write!(f, "global fallback (chunk {chunk} infeasible)")
            }
            DecodeMode::Fallback(FallbackReason::NoSpeech) => write!(f, "global fallback (no speech region)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeReport {
    pub mode: DecodeMode,
    /// Largest backpointer table allocated by any single decode.
    pub peak_lattice_cells: usize,
    pub inserted: usize,
}

fn global_decode(
    calibrated: &Posteriorgram,
    raw: &Posteriorgram,
    targets: &TargetSequence,
    cfg: &AlignConfig,
    blank: usize,
) -> Result<(Alignment, usize)> {
    let (intervals, cells) =
        decode_span(calibrated, raw, 0..raw.num_frames(), &targets.phonemes(), cfg, blank)?;
    Ok((Alignment::new(intervals, raw.span_start(), raw.span_end()), cells))
}

/// Splits the utterance at detected silences and decodes each speech region
/// against its chunk of targets.
///
/// Interior silence regions pair with interior silence markers; regions
/// touching either end of the utterance are trimmed as edge silence. When the
/// interior counts disagree, or a chunk cannot be decoded, the whole
/// utterance is decoded at once with markers ignored.
pub fn hierarchical_align(
    calibrated: &Posteriorgram,
    raw: &Posteriorgram,
    targets: &TargetSequence,
    inv: &PhonemeInventory,
    cfg: &AlignConfig,
) -> Result<(Alignment, DecodeReport)> {
    let blank = inv.blank_id();
    let frames = raw.num_frames();
    let regions = detect_silence_regions(raw, inv, cfg);
    let chunks = targets.chunks();
    let interior = regions.iter().filter(|r| r.start > 0 && r.end < frames).count();

    let fallback = |reason: FallbackReason| -> Result<(Alignment, DecodeReport)> {
        log::debug!("hierarchical decode falling back to global: {reason:?}");
        let (a, cells) = global_decode(calibrated, raw, targets, cfg, blank)?;
        Ok((a, DecodeReport { mode: DecodeMode::Fallback(reason), peak_lattice_cells: cells, inserted: 0 }))
    };

    if regions.is_empty() {
        let (a, cells) = global_decode(calibrated, raw, targets, cfg, blank)?;
        return Ok((a, DecodeReport { mode: DecodeMode::Global, peak_lattice_cells: cells, inserted: 0 }));
    }
    if interior != chunks.len() - 1 {
        return fallback(FallbackReason::CountMismatch { markers: chunks.len() - 1, regions: interior });
    }

    let mut spans = Vec::with_capacity(chunks.len());
    let mut cursor = 0;
    for r in &regions {
        if r.start > cursor {
            spans.push(cursor..r.start);
        }
        cursor = r.end;
    }
    if cursor < frames {
        spans.push(cursor..frames);
    }
    if spans.is_empty() {
        return fallback(FallbackReason::NoSpeech);
    }
    debug_assert_eq!(spans.len(), chunks.len());

    let mut intervals = Vec::new();
    let mut peak = 0;
    for (i, (span, chunk)) in spans.into_iter().zip(&chunks).enumerate() {
        match decode_span(calibrated, raw, span, chunk, cfg, blank) {
            Ok((mut ivs, cells)) => {
                intervals.append(&mut ivs);
                peak = peak.max(cells);
            }
            Err(Error::Infeasible(_)) => return fallback(FallbackReason::ChunkInfeasible { chunk: i }),
            Err(e) => return Err(e),
        }
    }
    Ok((
        Alignment::new(intervals, raw.span_start(), raw.span_end()),
        DecodeReport { mode: DecodeMode::Hierarchical { chunks: chunks.len() }, peak_lattice_cells: peak, inserted: 0 },
    ))
}

/// Makes the interval labels equal `targets` by inserting each missing
/// phoneme as a one-frame interval at its most probable frame between its
/// neighbours. When the neighbours leave too little room, neighbouring edges
/// move by as few frames as needed.
///
/// Intervals that do not fit the target order are dropped first. Fails only
/// when the utterance has fewer frames than targets.
pub fn enforce_completeness(a: &Alignment, p: &Posteriorgram, targets: &[usize]) -> Result<Alignment> {
    let frames = p.num_frames();
    if targets.len() > frames {
        return Err(Infeasibility::TooFewFrames { frames, required: targets.len() }.into());
    }
    let hop = p.frame_hop().0;
    let to_frame = |t: Ticks| (t.0.saturating_sub(p.frame_offset().0) / hop) as usize;

    // greedy subsequence match of intervals onto target positions
    let mut slots: Vec<Option<usize>> = vec![None; targets.len()];
    let mut next = 0;
    for (i, iv) in a.intervals.iter().enumerate() {
        match (next..targets.len()).find(|&k| targets[k] == iv.label) {
            Some(k) => {
                slots[k] = Some(i);
                next = k + 1;
            }
            None => log::warn!("dropping interval {i}: label {} does not follow the target order", iv.label),
        }
    }
    if slots.iter().all(Option::is_some) && a.intervals.len() == targets.len() {
        return Ok(a.clone());
    }

    // desired frame ranges, then a repair pass that restores order
    let mut want: Vec<(usize, usize)> = Vec::with_capacity(targets.len());
    let mut k = 0;
    while k < targets.len() {
        if let Some(i) = slots[k] {
            let iv = &a.intervals[i];
            want.push((to_frame(iv.start), to_frame(iv.end).max(to_frame(iv.start) + 1)));
            k += 1;
            continue;
        }
        let run_end = (k..targets.len()).find(|&j| slots[j].is_some()).unwrap_or(targets.len());
        let missing = run_end - k;
        let lo = want.last().map_or(0, |w| w.1);
        let hi = if run_end < targets.len() { to_frame(a.intervals[slots[run_end].unwrap()].start) } else { frames };
        if hi >= lo + missing {
            let mut from = lo;
            for (j, &label) in targets[k..run_end].iter().enumerate() {
                let limit = hi - (missing - j - 1);
                let best = argmax_frame(p, label, from..limit);
                want.push((best, best + 1));
                from = best + 1;
            }
        } else {
            for j in 0..missing {
                want.push((lo + j, lo + j + 1));
            }
        }
        k = run_end;
    }
    for i in 0..want.len() {
        let floor = if i == 0 { 0 } else { want[i - 1].1 };
        want[i].0 = want[i].0.max(floor);
        want[i].1 = want[i].1.max(want[i].0 + 1);
    }
    for i in (0..want.len()).rev() {
        let ceil = if i + 1 == want.len() { frames } else { want[i + 1].0 };
        want[i].1 = want[i].1.min(ceil);
        want[i].0 = want[i].0.min(want[i].1 - 1);
    }

    let intervals = want
        .into_iter()
        .enumerate()
        .map(|(k, (first, end))| {
            let (start, end_t) = (p.frame_start(first), p.frame_start(end));
            match slots[k].map(|i| &a.intervals[i]) {
                Some(iv) if iv.start == start && iv.end == end_t => iv.clone(),
                Some(iv) => PhonemeInterval {
                    start,
                    end: end_t,
                    score: mean_logit(p, iv.label, first..end),
                    ..iv.clone()
                },
                None => PhonemeInterval {
                    label: targets[k],
                    start,
                    end: end_t,
                    score: mean_logit(p, targets[k], first..end),
                    inserted: true,
                },
            }
        })
        .collect();
    Ok(Alignment::new(intervals, a.span_start, a.span_end))
}

fn argmax_frame(p: &Posteriorgram, class: usize, frames: Range<usize>) -> usize {
    let mut best = frames.start;
    for t in frames {
        if p.get(t, class) > p.get(best, class) {
            best = t;
        }
    }
    best
}

/// Full alignment: floor, optional boost, silence-split or global decode,
/// interval extraction and the optional completeness pass.
pub fn align(p: &Posteriorgram, targets: &TargetSequence, inv: &PhonemeInventory, cfg: &AlignConfig) -> Result<Alignment> {
    align_detailed(p, targets, inv, cfg).map(|(a, _)| a)
}

pub fn align_detailed(
    p: &Posteriorgram,
    targets: &TargetSequence,
    inv: &PhonemeInventory,
    cfg: &AlignConfig,
) -> Result<(Alignment, DecodeReport)> {
    cfg.validate(p.frame_hop())?;
    if p.head() != Head::Phoneme {
        return Err(Error::Config(format!("only phoneme-head posteriorgrams can be aligned, got {}", p.head())));
    }
    let expected = inv.num_classes(Head::Phoneme);
    if p.num_classes() != expected {
        return Err(Error::Format(format!(
            "posteriorgram has {} classes but the inventory needs {expected}",
            p.num_classes()
        )));
    }

    let mut calibrated = apply_floor(p, targets, cfg.floor);
    if cfg.boost_enabled {
        calibrated = boost_targets(&calibrated, targets, cfg.boost_factor);
    }
    let (alignment, mut report) = if cfg.hierarchical {
        hierarchical_align(&calibrated, p, targets, inv, cfg)?
    } else {
        let (a, cells) = global_decode(&calibrated, p, targets, cfg, inv.blank_id())?;
        (a, DecodeReport { mode: DecodeMode::Global, peak_lattice_cells: cells, inserted: 0 })
    };
    if !cfg.enforce_completeness {
        return Ok((alignment, report));
    }
    let complete = enforce_completeness(&alignment, p, &targets.phonemes())?;
    report.inserted = complete.intervals.iter().filter(|i| i.inserted).count();
    Ok((complete, report))
}

/// One utterance of a batch.
#[derive(Debug, Clone)]
pub struct AlignJob {
    pub posteriorgram: Posteriorgram,
    pub targets: TargetSequence,
}

/// Aligns independent utterances, in parallel when the `parallel` feature is
/// enabled. Results are in job order and do not depend on scheduling.
pub fn align_batch(jobs: &[AlignJob], inv: &PhonemeInventory, cfg: &AlignConfig) -> Vec<Result<Alignment>> {
    par::map(jobs, |j| align(&j.posteriorgram, &j.targets, inv, cfg))
}

pub fn align_batch_sequential(jobs: &[AlignJob], inv: &PhonemeInventory, cfg: &AlignConfig) -> Vec<Result<Alignment>> {
    par::map_sequential(jobs, |j| align(&j.posteriorgram, &j.targets, inv, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phoneset::Token;

    fn toy() -> PhonemeInventory {
        PhonemeInventory::toy()
    }

    /// Toy-inventory posteriorgram: each frame puts `peak` on one class and
    /// spreads the rest evenly.
    fn scripted(classes: &[usize], peak: f64) -> Posteriorgram {
        let v = toy().num_classes(Head::Phoneme);
        let rows: Vec<Vec<f32>> = classes
            .iter()
            .map(|&c| {
                (0..v)
                    .map(|k| if k == c { peak.ln() as f32 } else { ((1.0 - peak) / (v - 1) as f64).ln() as f32 })
                    .collect()
            })
            .collect();
        Posteriorgram::from_rows(&rows, Ticks(100), Ticks(0), Head::Phoneme).unwrap()
    }

    fn targets(inv: &PhonemeInventory, labels: &[&str]) -> TargetSequence {
        let items = labels
            .iter()
            .map(|l| if *l == "," { Token::Silence } else { Token::Phoneme(inv.class_of_label(l).unwrap()) })
            .collect();
        TargetSequence::new(items, inv).unwrap()
    }

    #[test]
    fn boost_examples() {
        let inv = toy();
        let k = inv.class_of_label("k").unwrap();
        let mut rows = vec![vec![-0.5f32; 6]];
        rows[0][k] = -2.0;
        let p = Posteriorgram::from_rows(&rows, Ticks(100), Ticks(0), Head::Phoneme).unwrap();
        let t = targets(&inv, &["k"]);
        let b = boost_targets(&p, &t, 5.0);
        assert!((b.get(0, k) - (-0.39056)).abs() < 1e-5);
        assert_eq!(b.get(0, inv.class_of_label("t").unwrap()), -0.5);
        assert_eq!(boost_targets(&p, &t, 1.0), p);
    }

    #[test]
    fn floor_examples() {
        let inv = toy();
        let (k, t_) = (inv.class_of_label("k").unwrap(), inv.class_of_label("t").unwrap());
        let mut row = vec![f32::NEG_INFINITY; 6];
        row[k] = f32::NEG_INFINITY;
        row[t_] = -1.0;
        let p = Posteriorgram::from_rows(&[row], Ticks(100), Ticks(0), Head::Phoneme).unwrap();
        let f = apply_floor(&p, &targets(&inv, &["k", "t"]), 1e-8);
        assert!((f.get(0, k) as f64 - (-18.4207)).abs() < 1e-4);
        assert_eq!(f.get(0, t_), -1.0);
        assert_eq!(f.get(0, inv.blank_id()), f32::NEG_INFINITY);
    }

    #[test]
    fn silence_detection_rules() {
        let inv = toy();
        let (sil, k) = (inv.silence_id(), inv.class_of_label("k").unwrap());
        let cfg = AlignConfig::default();
        let mut script = vec![k; 10];
        script.extend(vec![sil; 50]);
        script.extend(vec![k; 10]);
        let regions = detect_silence_regions(&scripted(&script, 0.9), &inv, &cfg);
        assert_eq!(regions, vec![10..60]);

        let mut burst = vec![k; 10];
        burst.extend(vec![sil; 5]);
        burst.extend(vec![k; 10]);
        assert!(detect_silence_regions(&scripted(&burst, 0.9), &inv, &cfg).is_empty());

        let alternating: Vec<usize> = (0..40).map(|t| if t % 2 == 0 { sil } else { k }).collect();
        assert!(detect_silence_regions(&scripted(&alternating, 0.9), &inv, &cfg).is_empty());
    }

    fn runs(spec: &[(usize, usize, usize)]) -> Vec<OccupancyRun> {
        spec.iter().map(|&(position, first_frame, last_frame)| OccupancyRun { position, first_frame, last_frame }).collect()
    }

    #[test]
    fn extract_intervals_examples() {
        let inv = toy();
        let (p_, q) = (inv.class_of_label("k").unwrap(), inv.class_of_label("t").unwrap());
        let path = StatePath::new(&[p_, q], inv.blank_id()).unwrap();
        let pg = scripted(&[p_, p_, p_, 0, 0, q, q], 0.9);
        let r = runs(&[(1, 0, 2), (2, 3, 4), (3, 5, 6)]);

        let a = extract_intervals(&r, &path, &pg, &AlignConfig::default());
        let spans: Vec<_> = a.intervals.iter().map(|i| (i.start.ms(), i.end.ms())).collect();
        assert_eq!(spans, vec![(0.0, 30.0), (50.0, 70.0)]);
        assert_eq!(a.gaps, vec![Gap { after: 0, duration: Ticks(200) }]);

        let cfg = AlignConfig { gap_tolerance_ms: 25.0, ..AlignConfig::default() };
        let a = extract_intervals(&r, &path, &pg, &cfg);
        let spans: Vec<_> = a.intervals.iter().map(|i| (i.start.ms(), i.end.ms())).collect();
        assert_eq!(spans, vec![(0.0, 50.0), (50.0, 70.0)]);
        assert!(a.gaps.is_empty());

        // a gap exactly at the tolerance survives
        let cfg = AlignConfig { gap_tolerance_ms: 20.0, ..AlignConfig::default() };
        assert_eq!(extract_intervals(&r, &path, &pg, &cfg).gaps.len(), 1);

        let tight = runs(&[(0, 0, 0), (1, 1, 3), (3, 4, 6)]);
        let a = extract_intervals(&tight, &path, &pg, &AlignConfig::default());
        assert!(a.gaps.is_empty());
        assert_eq!(a.leading_silence(), Ticks(100));
    }

    #[test]
    fn completeness_noop_when_complete() {
        let inv = toy();
        let k = inv.class_of_label("k").unwrap();
        let pg = scripted(&[k, k, 0], 0.9);
        let a = Alignment::new(
            vec![PhonemeInterval { label: k, start: Ticks(0), end: Ticks(200), score: -0.1, inserted: false }],
            Ticks(0),
            Ticks(300),
        );
        assert_eq!(enforce_completeness(&a, &pg, &[k]).unwrap(), a);
    }

    #[test]
    fn completeness_inserts_at_argmax_in_gap() {
        let inv = toy();
        let (p_, q, r) = (
            inv.class_of_label("k").unwrap(),
            inv.class_of_label("æ").unwrap(),
            inv.class_of_label("t").unwrap(),
        );
        // p on frames 0-1, ten blank frames 2-11, r on 12-13; q peaks at gap frame 4
        let mut script = vec![p_, p_];
        script.extend(vec![0; 10]);
        script.extend([r, r]);
        let mut pg_rows: Vec<Vec<f32>> = (0..script.len()).map(|t| scripted(&script, 0.9).row(t).to_vec()).collect();
        pg_rows[2 + 4][q] = -0.5;
        pg_rows[2 + 7][q] = -0.9;
        let pg = Posteriorgram::from_rows(&pg_rows, Ticks(100), Ticks(0), Head::Phoneme).unwrap();
        let iv = |label, s, e| PhonemeInterval { label, start: Ticks(s), end: Ticks(e), score: 0.0, inserted: false };
        let a = Alignment::new(vec![iv(p_, 0, 200), iv(r, 1200, 1400)], Ticks(0), Ticks(1400));
        let out = enforce_completeness(&a, &pg, &[p_, q, r]).unwrap();
        assert_eq!(out.labels(), vec![p_, q, r]);
        let ins = &out.intervals[1];
        assert!(ins.inserted);
        assert_eq!((ins.start, ins.end), (Ticks(600), Ticks(700)));
        assert_eq!(out.intervals[0], a.intervals[0]);
        assert_eq!(out.intervals[2], a.intervals[1]);
    }

    #[test]
    fn completeness_zero_slack_shifts_neighbour() {
        let inv = toy();
        let (p_, q) = (inv.class_of_label("k").unwrap(), inv.class_of_label("t").unwrap());
        let pg = scripted(&[p_, p_, p_, p_], 0.9);
        let a = Alignment::new(
            vec![PhonemeInterval { label: p_, start: Ticks(0), end: Ticks(400), score: 0.0, inserted: false }],
            Ticks(0),
            Ticks(400),
        );
        let out = enforce_completeness(&a, &pg, &[p_, q]).unwrap();
        assert_eq!(out.labels(), vec![p_, q]);
        assert_eq!((out.intervals[0].start, out.intervals[0].end), (Ticks(0), Ticks(300)));
        assert_eq!((out.intervals[1].start, out.intervals[1].end), (Ticks(300), Ticks(400)));
        assert!(out.intervals[1].inserted && !out.intervals[0].inserted);
        out.check().unwrap();
    }

    #[test]
    fn completeness_from_nothing_and_crowded() {
        let inv = toy();
        let labels: Vec<usize> = ["k", "æ", "t", "ə"].iter().map(|l| inv.class_of_label(l).unwrap()).collect();
        let pg = scripted(&[0, 0, 0, 0], 0.9);
        let empty = Alignment::new(vec![], Ticks(0), Ticks(400));
        let out = enforce_completeness(&empty, &pg, &labels).unwrap();
        assert_eq!(out.labels(), labels);
        out.check().unwrap();
        assert!(enforce_completeness(&empty, &pg, &[labels.clone(), labels].concat()).is_err());
    }

    #[test]
    fn align_recovers_scripted_boundaries() {
        let inv = toy();
        let (k, a_, t_) = (
            inv.class_of_label("k").unwrap(),
            inv.class_of_label("æ").unwrap(),
            inv.class_of_label("t").unwrap(),
        );
        let b = inv.blank_id();
        let script = [b, k, k, k, b, b, a_, a_, a_, a_, t_, t_, b];
        let pg = scripted(&script, 0.9);
        let a = align(&pg, &targets(&inv, &["k", "æ", "t"]), &inv, &AlignConfig::default()).unwrap();
        let spans: Vec<_> = a.intervals.iter().map(|i| (i.start.ms(), i.end.ms())).collect();
        assert_eq!(spans, vec![(10.0, 40.0), (60.0, 100.0), (100.0, 120.0)]);
        assert_eq!(a.gaps.len(), 1);
    }

    #[test]
    fn align_rejects_short_and_mismatched_input() {
        let inv = toy();
        let pg = scripted(&[0, 0], 0.9);
        let err = align(&pg, &targets(&inv, &["k", "æ", "t"]), &inv, &AlignConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible(Infeasibility::TooFewFrames { .. })));
        let builtin = PhonemeInventory::builtin();
        assert!(align(&pg, &targets(&inv, &["k"]), &builtin, &AlignConfig::default()).is_err());
        let bad = AlignConfig { boost_factor: 0.5, ..AlignConfig::default() };
        assert!(matches!(align(&pg, &targets(&inv, &["k"]), &inv, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn hierarchical_splits_on_matching_markers() {
        let inv = toy();
        let (k, t_, sil) = (inv.class_of_label("k").unwrap(), inv.class_of_label("t").unwrap(), inv.silence_id());
        let mut script = vec![k; 5];
        script.extend(vec![sil; 20]);
        script.extend(vec![t_; 5]);
        let pg = scripted(&script, 0.9);
        let (a, report) = align_detailed(&pg, &targets(&inv, &["k", ",", "t"]), &inv, &AlignConfig::default()).unwrap();
        assert_eq!(report.mode, DecodeMode::Hierarchical { chunks: 2 });
        let spans: Vec<_> = a.intervals.iter().map(|i| (i.start.ms(), i.end.ms())).collect();
        assert_eq!(spans, vec![(0.0, 50.0), (250.0, 300.0)]);

        let (_, report) =
            align_detailed(&pg, &targets(&inv, &["k", ",", "t", ",", "k"]), &inv, &AlignConfig::default()).unwrap();
        assert_eq!(report.mode, DecodeMode::Fallback(FallbackReason::CountMismatch { markers: 2, regions: 1 }));
    }

    #[test]
    fn all_silence_falls_back_to_global() {
        let inv = toy();
        let pg = scripted(&vec![inv.blank_id(); 30], 0.9);
        let (a, report) = align_detailed(&pg, &targets(&inv, &["k", "t"]), &inv, &AlignConfig::default()).unwrap();
        assert_eq!(report.mode, DecodeMode::Fallback(FallbackReason::NoSpeech));
        assert_eq!(a.intervals.len(), 2);
        assert_eq!(report.mode.to_string(), "global fallback (no speech region)");
    }
}
