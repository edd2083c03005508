//! Boundary evaluation: recall and precision at a tolerance, nearest-boundary
//! distances in both directions, inter-phoneme gap statistics, deletion and
//! insertion rates, and error-distance histograms.
//!
//! Matching is nearest-neighbour without exclusivity: a predicted boundary
//! may satisfy several reference boundaries and vice versa. When both sides
//! carry offsets, onsets and offsets are pooled into one boundary set.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::phoneset::PhonemeInventory;
use crate::pipeline::Alignment;

pub const DEFAULT_TOLERANCES_MS: [f64; 3] = [20.0, 40.0, 60.0];

/// Onset (and optionally offset) times in ms with a label per onset.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySet {
    onsets: Vec<f64>,
    offsets: Option<Vec<f64>>,
    labels: Vec<String>,
}

impl BoundarySet {
    pub fn new(onsets: Vec<f64>, offsets: Option<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let sorted = |xs: &[f64]| xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] <= w[1]);
        if !sorted(&onsets) {
            return Err(Error::Metric("onsets must be finite and sorted".into()));
        }
        if labels.len() != onsets.len() {
            return Err(Error::Metric(format!("{} labels for {} onsets", labels.len(), onsets.len())));
        }
        if let Some(off) = &offsets {
            if off.len() != onsets.len() || !sorted(off) {
                return Err(Error::Metric("offsets must be sorted and parallel to onsets".into()));
            }
        }
        Ok(Self { onsets, offsets, labels })
    }

    /// Onset-only set with empty labels.
    pub fn unlabeled(onsets: Vec<f64>) -> Result<Self> {
        let labels = vec![String::new(); onsets.len()];
        Self::new(onsets, None, labels)
    }

    pub fn from_alignment(a: &Alignment, inv: &PhonemeInventory) -> Self {
        Self {
            onsets: a.intervals.iter().map(|i| i.start.ms()).collect(),
            offsets: Some(a.intervals.iter().map(|i| i.end.ms()).collect()),
            labels: a.intervals.iter().map(|i| inv.label(i.label).unwrap_or("?").to_string()).collect(),
        }
    }

    pub fn onsets(&self) -> &[f64] {
        &self.onsets
    }

    pub fn offsets(&self) -> Option<&[f64]> {
        self.offsets.as_deref()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn has_offsets(&self) -> bool {
        self.offsets.is_some()
    }

    pub fn len(&self) -> usize {
        self.onsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.is_empty()
    }

    /// Sorted boundary times, offsets included when asked and present.
    pub fn pooled(&self, with_offsets: bool) -> Vec<f64> {
        let mut all = self.onsets.clone();
        if let (true, Some(off)) = (with_offsets, &self.offsets) {
            all.extend_from_slice(off);
            all.sort_by(f64::total_cmp);
        }
        all
    }

    /// Durations of the positive gaps between consecutive intervals, and the
    /// number of phonemes such a gap precedes. Needs offsets.
    fn gaps(&self) -> Vec<f64> {
        let Some(off) = &self.offsets else { return Vec::new() };
        self.onsets.iter().skip(1).zip(off).map(|(on, prev_off)| on - prev_off).filter(|g| *g > 0.0).collect()
    }
}

fn reference_pool(reference: &BoundarySet, predicted: &BoundarySet) -> Vec<f64> {
    reference.pooled(reference.has_offsets() && predicted.has_offsets())
}

fn nearest_distance(x: f64, sorted: &[f64]) -> f64 {
    let i = sorted.partition_point(|&v| v < x);
    let after = sorted.get(i).map(|v| v - x);
    let before = i.checked_sub(1).map(|j| x - sorted[j]);
    match (before, after) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => f64::INFINITY,
    }
}

fn hit_rate(from: &[f64], to: &[f64], tol: f64) -> f64 {
    let hits = from.iter().filter(|&&x| nearest_distance(x, to) <= tol).count();
    100.0 * hits as f64 / from.len() as f64
}

fn check_tolerance(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Metric(format!("tolerance must be positive, got {tol}")))
    }
}

/// Percentage of reference boundaries with a predicted boundary within `tol`
/// ms (inclusive).
pub fn recall_at(reference: &BoundarySet, predicted: &BoundarySet, tol: f64) -> Result<f64> {
    check_tolerance(tol)?;
    if reference.is_empty() {
        return Err(Error::Metric("recall of an empty reference".into()));
    }
    Ok(hit_rate(&reference_pool(reference, predicted), &predicted.pooled(true), tol))
}

/// Percentage of predicted boundaries with a reference boundary within `tol`
/// ms. With `onset_only`, predicted offsets are left out.
pub fn precision_at(reference: &BoundarySet, predicted: &BoundarySet, tol: f64, onset_only: bool) -> Result<f64> {
    check_tolerance(tol)?;
    if predicted.is_empty() {
        return Err(Error::Metric("precision of an empty prediction".into()));
    }
    Ok(hit_rate(&predicted.pooled(!onset_only), &reference.pooled(true), tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub mean_ms: f64,
    pub median_ms: f64,
}

impl DistanceSummary {
    fn of(distances: &[f64]) -> Self {
        Self { mean_ms: mean(distances), median_ms: median(distances) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDistances {
    pub known_to_aligned: DistanceSummary,
    pub aligned_to_known: DistanceSummary,
}

fn distances(from: &[f64], to: &[f64]) -> Vec<f64> {
    from.iter().map(|&x| nearest_distance(x, to)).collect()
}

/// Mean and median distance from each reference boundary to the nearest
/// predicted one, and the reverse.
pub fn boundary_distances(reference: &BoundarySet, predicted: &BoundarySet) -> Result<BoundaryDistances> {
    if reference.is_empty() || predicted.is_empty() {
        return Err(Error::Metric("boundary distances need non-empty sets".into()));
    }
    let (r, p) = (reference_pool(reference, predicted), predicted.pooled(true));
    Ok(BoundaryDistances {
        known_to_aligned: DistanceSummary::of(&distances(&r, &p)),
        aligned_to_known: DistanceSummary::of(&distances(&p, &reference.pooled(true))),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub median_ms: f64,
    /// Sample standard deviation; 0 with fewer than two gaps.
    pub std_ms: f64,
    /// Percentage of phonemes preceded by a positive gap.
    pub pct_gap_per_phone: f64,
    pub gaps: usize,
}

impl GapStats {
    fn from_gaps(gaps: &[f64], phonemes: usize) -> Self {
        let pct = if phonemes == 0 { 0.0 } else { 100.0 * gaps.len() as f64 / phonemes as f64 };
        Self { median_ms: median(gaps), std_ms: sample_std(gaps), pct_gap_per_phone: pct, gaps: gaps.len() }
    }
}

/// Gap statistics of one alignment. Edge silence before the first phoneme
/// does not count as a gap.
pub fn gap_stats(a: &Alignment) -> GapStats {
    let gaps: Vec<f64> = a.gaps.iter().map(|g| g.duration.ms()).collect();
    GapStats::from_gaps(&gaps, a.intervals.len())
}

pub fn gap_stats_of(boundaries: &BoundarySet) -> GapStats {
    GapStats::from_gaps(&boundaries.gaps(), boundaries.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditRates {
    pub deletions_pct: f64,
    pub insertions_pct: f64,
    pub unmatched_reference: usize,
    pub unmatched_predicted: usize,
}

fn greedy_unmatched(reference: &BoundarySet, predicted: &BoundarySet, window: f64) -> (usize, usize) {
    let mut used = vec![false; predicted.len()];
    let mut cursor = 0;
    let mut unmatched_ref = 0;
    for (on, label) in reference.onsets.iter().zip(&reference.labels) {
        let found = (cursor..predicted.len())
            .take_while(|&j| predicted.onsets[j] <= on + window)
            .find(|&j| !used[j] && predicted.labels[j] == *label && (predicted.onsets[j] - on).abs() <= window);
        match found {
            Some(j) => {
                used[j] = true;
                cursor = j + 1;
            }
            None => unmatched_ref += 1,
        }
    }
    (unmatched_ref, used.iter().filter(|u| !**u).count())
}

/// Greedy in-order matching of same-label phonemes whose onsets lie within
/// `window` ms. Unmatched reference phonemes are deletions, unmatched
/// predictions insertions.
pub fn deletions_insertions(reference: &BoundarySet, predicted: &BoundarySet, window: f64) -> EditRates {
    let (ur, up) = greedy_unmatched(reference, predicted, window);
    let pct = |n: usize, d: usize| if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 };
    EditRates {
        deletions_pct: pct(ur, reference.len()),
        insertions_pct: pct(up, predicted.len()),
        unmatched_reference: ur,
        unmatched_predicted: up,
    }
}

/// Distance histogram: bins `[k·w, (k+1)·w)` up to `max`, then one overflow
/// bin holding everything at or beyond `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_ms: f64,
    pub max_ms: f64,
    /// Lower edge of each bin; the last entry is the overflow bin.
    pub edges_ms: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bin_width_ms: f64, max_ms: f64) -> Result<Self> {
        if !(bin_width_ms > 0.0 && bin_width_ms.is_finite()) || !(max_ms > 0.0 && max_ms.is_finite()) {
            return Err(Error::Metric("histogram bin width and range must be positive".into()));
        }
        let bins = (max_ms / bin_width_ms).ceil() as usize;
        let mut edges: Vec<f64> = (0..bins).map(|k| k as f64 * bin_width_ms).collect();
        edges.push(max_ms);
        Ok(Self { bin_width_ms, max_ms, counts: vec![0; edges.len()], edges_ms: edges })
    }

    pub fn add(&mut self, distance: f64) {
        let last = self.counts.len() - 1;
        let bin = if distance >= self.max_ms { last } else { ((distance / self.bin_width_ms) as usize).min(last) };
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// `bin_start_ms,count` rows; the overflow bin is labelled `>=max`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start_ms,count\n");
        let last = self.counts.len() - 1;
        for (i, (e, c)) in self.edges_ms.iter().zip(&self.counts).enumerate() {
            if i == last {
                let _ = writeln!(out, ">={e},{c}");
            } else {
                let _ = writeln!(out, "{e},{c}");
            }
        }
        out
    }
}

/// Histogram of distances from each reference boundary to its nearest
/// predicted boundary.
pub fn error_histogram(reference: &BoundarySet, predicted: &BoundarySet, bin_width: f64, max: f64) -> Result<Histogram> {
    if reference.is_empty() {
        return Err(Error::Metric("histogram of an empty reference".into()));
    }
    let mut h = Histogram::new(bin_width, max)?;
    let pool = predicted.pooled(true);
    for x in reference_pool(reference, predicted) {
        h.add(nearest_distance(x, &pool));
    }
    Ok(h)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub tolerances_ms: Vec<f64>,
    /// Tolerance of the onset-only precision column.
    pub onset_tolerance_ms: f64,
    pub match_window_ms: f64,
    pub bin_width_ms: f64,
    pub histogram_max_ms: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            tolerances_ms: DEFAULT_TOLERANCES_MS.to_vec(),
            onset_tolerance_ms: 20.0,
            match_window_ms: 100.0,
            bin_width_ms: 10.0,
            histogram_max_ms: 200.0,
        }
    }
}

/// Mergeable sufficient statistics for a set of utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    utterances: usize,
    recall_hits: Vec<u64>,
    recall_total: u64,
    precision_hits: Vec<u64>,
    precision_total: u64,
    onset_hits: u64,
    onset_total: u64,
    known_to_aligned: Vec<f64>,
    aligned_to_known: Vec<f64>,
    gaps: Vec<f64>,
    predicted_phonemes: u64,
    reference_phonemes: u64,
    unmatched_reference: u64,
    unmatched_predicted: u64,
    histogram: Histogram,
}

impl EvalStats {
    pub fn empty(opts: &EvalOptions) -> Result<Self> {
        Ok(Self {
            utterances: 0,
            recall_hits: vec![0; opts.tolerances_ms.len()],
            recall_total: 0,
            precision_hits: vec![0; opts.tolerances_ms.len()],
            precision_total: 0,
            onset_hits: 0,
            onset_total: 0,
            known_to_aligned: Vec::new(),
            aligned_to_known: Vec::new(),
            gaps: Vec::new(),
            predicted_phonemes: 0,
            reference_phonemes: 0,
            unmatched_reference: 0,
            unmatched_predicted: 0,
            histogram: Histogram::new(opts.bin_width_ms, opts.histogram_max_ms)?,
        })
    }

    pub fn utterance(reference: &BoundarySet, predicted: &BoundarySet, opts: &EvalOptions) -> Result<Self> {
        for &t in opts.tolerances_ms.iter().chain([&opts.onset_tolerance_ms]) {
            check_tolerance(t)?;
        }
        let mut s = Self::empty(opts)?;
        s.utterances = 1;
        let ref_pool = reference_pool(reference, predicted);
        let ref_all = reference.pooled(true);
        let pred_all = predicted.pooled(true);
        s.known_to_aligned = distances(&ref_pool, &pred_all);
        s.aligned_to_known = distances(&pred_all, &ref_all);
        for (i, &tol) in opts.tolerances_ms.iter().enumerate() {
            s.recall_hits[i] = s.known_to_aligned.iter().filter(|&&d| d <= tol).count() as u64;
            s.precision_hits[i] = s.aligned_to_known.iter().filter(|&&d| d <= tol).count() as u64;
        }
        s.recall_total = ref_pool.len() as u64;
        s.precision_total = pred_all.len() as u64;
        s.onset_hits = predicted
            .onsets()
            .iter()
            .filter(|&&x| nearest_distance(x, &ref_all) <= opts.onset_tolerance_ms)
            .count() as u64;
        s.onset_total = predicted.len() as u64;
        for &d in &s.known_to_aligned {
            s.histogram.add(d);
        }
        s.gaps = predicted.gaps();
        s.predicted_phonemes = predicted.len() as u64;
        s.reference_phonemes = reference.len() as u64;
        let (ur, up) = greedy_unmatched(reference, predicted, opts.match_window_ms);
        s.unmatched_reference = ur as u64;
        s.unmatched_predicted = up as u64;
        Ok(s)
    }

    pub fn merge(&mut self, other: &EvalStats) {
        self.utterances += other.utterances;
        for (a, b) in self.recall_hits.iter_mut().zip(&other.recall_hits) {
            *a += b;
        }
        for (a, b) in self.precision_hits.iter_mut().zip(&other.precision_hits) {
            *a += b;
        }
        self.recall_total += other.recall_total;
        self.precision_total += other.precision_total;
        self.onset_hits += other.onset_hits;
        self.onset_total += other.onset_total;
        self.known_to_aligned.extend_from_slice(&other.known_to_aligned);
        self.aligned_to_known.extend_from_slice(&other.aligned_to_known);
        self.gaps.extend_from_slice(&other.gaps);
        self.predicted_phonemes += other.predicted_phonemes;
        self.reference_phonemes += other.reference_phonemes;
        self.unmatched_reference += other.unmatched_reference;
        self.unmatched_predicted += other.unmatched_predicted;
        self.histogram.merge(&other.histogram);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceScore {
    pub tolerance_ms: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    /// Reference boundaries scored for recall.
    pub annotated: u64,
    /// Predicted boundaries, onsets and offsets.
    pub predicted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub utterances: usize,
    pub recall_at: Vec<ToleranceScore>,
    pub precision_at: Vec<ToleranceScore>,
    pub precision_onset: ToleranceScore,
    pub known_to_aligned: DistanceSummary,
    pub aligned_to_known: DistanceSummary,
    pub gaps: GapStats,
    pub totals: Totals,
    pub deletions_pct: f64,
    pub insertions_pct: f64,
    pub histogram: Histogram,
}

impl EvalReport {
    pub fn from_stats(s: &EvalStats, opts: &EvalOptions) -> Result<Self> {
        if s.recall_total == 0 || s.precision_total == 0 {
            return Err(Error::Metric("no boundaries to evaluate".into()));
        }
        let pct = |n: u64, d: u64| if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 };
        let scores = |hits: &[u64], total: u64| {
            opts.tolerances_ms
                .iter()
                .zip(hits)
                .map(|(&tolerance_ms, &h)| ToleranceScore { tolerance_ms, percent: pct(h, total) })
                .collect()
        };
        Ok(Self {
            utterances: s.utterances,
            recall_at: scores(&s.recall_hits, s.recall_total),
            precision_at: scores(&s.precision_hits, s.precision_total),
            precision_onset: ToleranceScore {
                tolerance_ms: opts.onset_tolerance_ms,
                percent: pct(s.onset_hits, s.onset_total),
            },
            known_to_aligned: DistanceSummary::of(&s.known_to_aligned),
            aligned_to_known: DistanceSummary::of(&s.aligned_to_known),
            gaps: GapStats::from_gaps(&s.gaps, s.predicted_phonemes as usize),
            totals: Totals { annotated: s.recall_total, predicted: s.precision_total },
            deletions_pct: pct(s.unmatched_reference, s.reference_phonemes),
            insertions_pct: pct(s.unmatched_predicted, s.predicted_phonemes),
            histogram: s.histogram.clone(),
        })
    }

    /// Fixed-width table: alignment performance, then distances and gaps.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let tol = |s: &ToleranceScore| format!("{}ms", s.tolerance_ms);
        let mut head = String::new();
        let mut row = String::new();
        for s in &self.recall_at {
            let _ = write!(head, "{:>9}", format!("R@{}", tol(s)));
            let _ = write!(row, "{:>9.1}", s.percent);
        }
        let _ = write!(head, "{:>11}", format!("P@{}*", tol(&self.precision_onset)));
        let _ = write!(row, "{:>11.1}", self.precision_onset.percent);
        for s in &self.precision_at {
            let _ = write!(head, "{:>9}", format!("P@{}", tol(s)));
            let _ = write!(row, "{:>9.1}", s.percent);
        }
        let _ = write!(head, "{:>11}{:>11}{:>7}{:>7}", "Annotated", "Predicted", "Del%", "Ins%");
        let _ = write!(
            row,
            "{:>11}{:>11}{:>7.2}{:>7.2}",
            self.totals.annotated, self.totals.predicted, self.deletions_pct, self.insertions_pct
        );
        let _ = writeln!(out, "Alignment performance ({} utterances)", self.utterances);
        let _ = writeln!(out, "{head}");
        let _ = writeln!(out, "{row}");
        let _ = writeln!(out, "* onset boundaries only");
        let _ = writeln!(out);
        let _ = writeln!(out, "Boundary distance (ms) and inter-phoneme gaps");
        let _ = writeln!(
            out,
            "{:>10}{:>10}{:>10}{:>10}{:>12}{:>10}{:>12}",
            "K->A mean", "K->A med", "A->K mean", "A->K med", "gap median", "gap std", "%gap/phone"
        );
        let _ = writeln!(
            out,
            "{:>10.1}{:>10.1}{:>10.1}{:>10.1}{:>12.1}{:>10.1}{:>11.2}%",
            self.known_to_aligned.mean_ms,
            self.known_to_aligned.median_ms,
            self.aligned_to_known.mean_ms,
            self.aligned_to_known.median_ms,
            self.gaps.median_ms,
            self.gaps.std_ms,
            self.gaps.pct_gap_per_phone
        );
        out
    }
}

/// Evaluates (reference, predicted) utterance pairs. Per-utterance statistics
/// are computed in parallel and merged in input order.
pub fn evaluate_corpus(pairs: &[(BoundarySet, BoundarySet)], opts: &EvalOptions) -> Result<EvalReport> {
    let per_utterance = par::map(pairs, |(r, p)| EvalStats::utterance(r, p, opts));
    let mut total = EvalStats::empty(opts)?;
    for s in per_utterance {
        total.merge(&s?);
    }
    EvalReport::from_stats(&total, opts)
}
