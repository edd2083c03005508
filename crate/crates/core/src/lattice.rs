//! Blank-interleaved CTC state path and the exact max-product dynamic program
//! over it.
//!
//! For targets `p1..pS` the path is `[blank, p1, blank, p2, ..., pS, blank]`.
//! Between consecutive frames a trace may stay in its state, advance one
//! state, or advance two states when that skips a blank separating two
//! different phonemes. Skipping the blank between equal phonemes is illegal,
//! which is what keeps repeated phonemes distinct.

use crate::error::{Error, Infeasibility, Result};
use crate::posterior::Posteriorgram;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePath {
    states: Vec<usize>,
    blank: usize,
}

impl StatePath {
    pub fn new(targets: &[usize], blank: usize) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyTargets);
        }
        if targets.contains(&blank) {
            return Err(Error::InvalidTarget("blank class used as a target".into()));
        }
        let mut states = Vec::with_capacity(2 * targets.len() + 1);
        states.push(blank);
        for &p in targets {
            states.push(p);
            states.push(blank);
        }
        Ok(Self { states, blank })
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    /// Number of target phonemes S.
    pub fn num_targets(&self) -> usize {
        self.states.len() / 2
    }

    pub fn targets(&self) -> impl Iterator<Item = usize> + '_ {
        self.states.iter().skip(1).step_by(2).copied()
    }

    pub fn is_phoneme_position(pos: usize) -> bool {
        pos % 2 == 1
    }

    /// Whether a trace may move from `pos - 2` straight to `pos`.
    #[inline]
    pub fn can_skip_into(&self, pos: usize) -> bool {
        pos >= 2 && self.states[pos] != self.states[pos - 2]
    }

    /// Fewest frames any legal trace needs: one per phoneme plus one for each
    /// blank separating equal neighbours.
    pub fn min_frames(&self) -> usize {
        let targets: Vec<usize> = self.targets().collect();
        targets.len() + targets.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// Best state-path position per frame plus the path's total log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrace {
    pub state_at_frame: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    Length { frames: usize, expected: usize },
    Start(usize),
    End(usize),
    Step { frame: usize, from: usize, to: usize },
    IllegalSkip { frame: usize, into: usize },
    Unvisited(usize),
}

impl StateTrace {
    /// Checks every structural invariant of a legal trace for `path` over
    /// `frames` frames.
    pub fn validate(&self, path: &StatePath, frames: usize) -> Result<(), TraceViolation> {
        let s = &self.state_at_frame;
        if s.len() != frames || frames == 0 {
            return Err(TraceViolation::Length { frames: s.len(), expected: frames });
        }
        let last = path.len() - 1;
        if s[0] > 1 {
            return Err(TraceViolation::Start(s[0]));
        }
        if s[frames - 1] + 1 < last || s[frames - 1] > last {
            return Err(TraceViolation::End(s[frames - 1]));
        }
        for (t, w) in s.windows(2).enumerate() {
            let (from, to) = (w[0], w[1]);
            if to < from || to - from > 2 {
                return Err(TraceViolation::Step { frame: t + 1, from, to });
            }
            if to - from == 2 && !path.can_skip_into(to) {
                return Err(TraceViolation::IllegalSkip { frame: t + 1, into: to });
            }
        }
        let mut seen = vec![false; path.len()];
        for &p in s {
            seen[p] = true;
        }
        if let Some(pos) = (1..path.len()).step_by(2).find(|&p| !seen[p]) {
            return Err(TraceViolation::Unvisited(pos));
        }
        Ok(())
    }
}

const STAY: u8 = 0;
const ADVANCE: u8 = 1;
const SKIP: u8 = 2;

/// Exact Viterbi decode of `path` against the posteriorgram.
///
/// Ties prefer the smaller move (stay, then advance, then skip). At the final
/// frame the trace ends on the closing blank only when that is strictly
/// better than ending on the last phoneme. Scores accumulate in `f64` in frame
/// order.
pub fn viterbi(p: &Posteriorgram, path: &StatePath) -> Result<StateTrace> {
    let frames = p.num_frames();
    let n = path.len();
    let states = path.states();
    if let Some(&label) = states.iter().find(|&&c| c >= p.num_classes()) {
        return Err(Error::LabelOutOfRange { label, num_classes: p.num_classes() });
    }
    let required = path.min_frames();
    if frames < required {
        return Err(Infeasibility::TooFewFrames { frames, required }.into());
    }

    let mut prev = vec![f64::NEG_INFINITY; n];
    let mut cur = vec![f64::NEG_INFINITY; n];
    let mut back = vec![STAY; frames * n];

    prev[0] = p.get(0, states[0]) as f64;
    prev[1] = p.get(0, states[1]) as f64;
    if prev[0] == f64::NEG_INFINITY && prev[1] == f64::NEG_INFINITY {
        return Err(Infeasibility::Unreachable { frame: 0 }.into());
    }

    for t in 1..frames {
        // positions outside [lo, hi] either cannot be reached by frame t or
        // can no longer reach the final pair of states
        let hi = (2 * t + 1).min(n - 1);
        let lo = (n - 2).saturating_sub(2 * (frames - 1 - t));
        cur.fill(f64::NEG_INFINITY);
        let row = p.row(t);
        let bp = &mut back[t * n..(t + 1) * n];
        let mut any = false;
        for s in lo..=hi {
            let mut best = prev[s];
            let mut step = STAY;
            if s >= 1 && prev[s - 1] > best {
                best = prev[s - 1];
                step = ADVANCE;
            }
            if path.can_skip_into(s) && prev[s - 2] > best {
                best = prev[s - 2];
                step = SKIP;
            }
            let score = best + row[states[s]] as f64;
            cur[s] = score;
            bp[s] = step;
            any |= score > f64::NEG_INFINITY;
        }
        if !any {
            return Err(Infeasibility::Unreachable { frame: t }.into());
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let mut s = if prev[n - 1] > prev[n - 2] { n - 1 } else { n - 2 };
    let score = prev[s];
    if score == f64::NEG_INFINITY {
        return Err(Infeasibility::Unreachable { frame: frames - 1 }.into());
    }
    let mut state_at_frame = vec![0; frames];
    for t in (0..frames).rev() {
        state_at_frame[t] = s;
        if t > 0 {
            s -= back[t * n + s] as usize;
        }
    }
    Ok(StateTrace { state_at_frame, score })
}

/// Number of backpointer cells a decode of this size allocates.
pub fn lattice_cells(frames: usize, path: &StatePath) -> usize {
    frames * path.len()
}

/// A maximal run of frames spent in one state-path position. Frames are
/// inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OccupancyRun {
    pub position: usize,
    pub first_frame: usize,
    pub last_frame: usize,
}

impl OccupancyRun {
    pub fn frames(&self) -> usize {
        self.last_frame - self.first_frame + 1
    }

    pub fn is_phoneme(&self) -> bool {
        StatePath::is_phoneme_position(self.position)
    }
}

/// Compresses a trace into runs of equal consecutive positions.
pub fn backtrace_to_occupancy(trace: &StateTrace) -> Vec<OccupancyRun> {
    let mut runs: Vec<OccupancyRun> = Vec::new();
    for (t, &pos) in trace.state_at_frame.iter().enumerate() {
        match runs.last_mut() {
            Some(run) if run.position == pos => run.last_frame = t,
            _ => runs.push(OccupancyRun { position: pos, first_frame: t, last_frame: t }),
        }
    }
    runs
}
