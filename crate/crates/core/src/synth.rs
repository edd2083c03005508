//! Synthetic posteriorgrams with scripted ground truth.
//!
//! A scenario lists phonemes with durations, blank gaps between them and
//! silence blocks. Every frame gives its scripted class probability `peak`;
//! the remaining mass goes to the other classes through a softmax over
//! seeded uniform noise at the given temperature.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phoneset::{Head, PhonemeInventory, TargetSequence, Token};
use crate::pipeline::{mean_logit, Alignment, PhonemeInterval};
use crate::posterior::Posteriorgram;
use crate::time::Ticks;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthPhoneme {
    pub label: String,
    pub frames: usize,
}

/// Silence frames placed before phoneme `position`; `position` equal to the
/// phoneme count puts the block at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSilence {
    pub position: usize,
    pub frames: usize,
}

fn default_hop_ms() -> f64 {
    10.0
}

fn default_peak() -> f64 {
    1.0
}

fn default_temperature() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScenario {
    pub phonemes: Vec<SynthPhoneme>,
    /// Blank frames after each phoneme but the last. Empty means no gaps.
    #[serde(default)]
    pub gaps: Vec<usize>,
    #[serde(default)]
    pub leading_blank: usize,
    #[serde(default)]
    pub trailing_blank: usize,
    #[serde(default)]
    pub silences: Vec<SynthSilence>,
    #[serde(default = "default_peak")]
    pub peak: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hop_ms")]
    pub frame_hop_ms: f64,
    #[serde(default)]
    pub frame_offset_ms: f64,
    /// When set, the scripted timeline must have exactly this many frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_frames: Option<usize>,
}

impl SynthScenario {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn gap_after(&self, i: usize) -> usize {
        self.gaps.get(i).copied().unwrap_or(0)
    }

    fn silence_before(&self, position: usize) -> usize {
        self.silences.iter().filter(|s| s.position == position).map(|s| s.frames).sum()
    }

    pub fn scripted_frames(&self) -> usize {
        let n = self.phonemes.len();
        self.leading_blank
            + self.trailing_blank
            + self.phonemes.iter().map(|p| p.frames).sum::<usize>()
            + (0..n.saturating_sub(1)).map(|i| self.gap_after(i)).sum::<usize>()
            + self.silences.iter().map(|s| s.frames).sum::<usize>()
    }

    fn validate(&self, inv: &PhonemeInventory) -> Result<Vec<usize>> {
        let bad = |m: String| Err(Error::Config(m));
        let n = self.phonemes.len();
        if n == 0 {
            return Err(Error::EmptyTargets);
        }
        if !(self.peak > 0.0 && self.peak <= 1.0) {
            return bad(format!("peak must lie in (0, 1], got {}", self.peak));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !self.gaps.is_empty() && self.gaps.len() != n - 1 {
            return bad(format!("{} gaps for {n} phonemes", self.gaps.len()));
        }
        if let Some(s) = self.silences.iter().find(|s| s.position > n || s.frames == 0) {
            return bad(format!("silence block at position {} with {} frames is invalid", s.position, s.frames));
        }
        let mut classes = Vec::with_capacity(n);
        for (i, p) in self.phonemes.iter().enumerate() {
            if p.frames == 0 {
                return bad(format!("phoneme {i} has zero frames"));
            }
            let c = inv.class_of_label(&p.label).ok_or_else(|| Error::UnknownSymbol {
                symbol: p.label.clone(),
                position: i + 1,
            })?;
            if c == inv.blank_id() {
                return Err(Error::InvalidTarget("blank class used as a target".into()));
            }
            if i > 0 && classes[i - 1] == c && self.gap_after(i - 1) == 0 && self.silence_before(i) == 0 {
                return bad(format!("repeated phoneme {} at {i} needs a gap before it", p.label));
            }
            classes.push(c);
        }
        if let Some(total) = self.total_frames {
            let scripted = self.scripted_frames();
            if scripted != total {
                return bad(format!("scenario scripts {scripted} frames but total_frames is {total}"));
            }
        }
        Ok(classes)
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub posteriorgram: Posteriorgram,
    pub reference: Alignment,
    pub targets: TargetSequence,
}

/// Renders a scenario into a posteriorgram, the scripted alignment and the
/// target sequence. Interior silence blocks add a silence marker to the
/// targets. Output is a pure function of the scenario.
pub fn generate(s: &SynthScenario, inv: &PhonemeInventory) -> Result<Synthetic> {
    let classes = s.validate(inv)?;
    let hop = Ticks::from_ms_exact(s.frame_hop_ms)
        .filter(|h| *h > Ticks::ZERO)
        .ok_or_else(|| Error::Config(format!("frame hop {} ms is not on the 0.1 ms grid", s.frame_hop_ms)))?;
    let offset = Ticks::from_ms_exact(s.frame_offset_ms)
        .ok_or_else(|| Error::Config(format!("frame offset {} ms is not on the 0.1 ms grid", s.frame_offset_ms)))?;
    let (blank, sil) = (inv.blank_id(), inv.silence_id());
    let n = classes.len();

    let mut script = vec![blank; s.leading_blank];
    let mut spans = Vec::with_capacity(n);
    let mut items = Vec::with_capacity(n + s.silences.len());
    for (i, (&c, p)) in classes.iter().zip(&s.phonemes).enumerate() {
        let silence = s.silence_before(i);
        script.extend(std::iter::repeat_n(sil, silence));
        if silence > 0 && i > 0 {
            items.push(Token::Silence);
        }
        spans.push((c, script.len(), script.len() + p.frames));
        script.extend(std::iter::repeat_n(c, p.frames));
        if i + 1 < n {
            script.extend(std::iter::repeat_n(blank, s.gap_after(i)));
        }
        items.push(Token::Phoneme(c));
    }
    script.extend(std::iter::repeat_n(sil, s.silence_before(n)));
    script.extend(std::iter::repeat_n(blank, s.trailing_blank));

    let num_classes = inv.num_classes(Head::Phoneme);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let log_peak = s.peak.ln();
    let log_rest = (1.0 - s.peak).ln();
    let mut logits = Vec::with_capacity(script.len() * num_classes);
    let mut noise = vec![0.0f64; num_classes];
    for &truth in &script {
        for (j, z) in noise.iter_mut().enumerate() {
            *z = if j == truth { f64::NEG_INFINITY } else { rng.gen::<f64>() / s.temperature };
        }
        let lse = logsumexp(&noise);
        logits.extend(noise.iter().enumerate().map(|(j, z)| {
            if j == truth {
                log_peak as f32
            } else {
                (log_rest + z - lse) as f32
            }
        }));
    }
    let p = Posteriorgram::new(logits, script.len(), num_classes, hop, offset, Head::Phoneme)?;

    let intervals = spans
        .into_iter()
        .map(|(label, first, end)| PhonemeInterval {
            label,
            start: p.frame_start(first),
            end: p.frame_start(end),
            score: mean_logit(&p, label, first..end),
            inserted: false,
        })
        .collect();
    let reference = Alignment::new(intervals, p.span_start(), p.span_end());
    let targets = TargetSequence::new(items, inv)?;
    Ok(Synthetic { posteriorgram: p, reference, targets })
}

fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Parameters for [`random_scenario`]. Frame ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub phonemes: usize,
    pub phoneme_frames: (usize, usize),
    /// Fraction of phonemes preceded by a gap, rounded to a whole count.
    pub gap_fraction: f64,
    pub gap_frames: (usize, usize),
    /// Insert an interior silence block every this many phonemes.
    pub silence_every: Option<usize>,
    pub silence_frames: usize,
    pub edge_frames: usize,
    /// Pad the trailing blank up to this length.
    pub total_frames: Option<usize>,
    pub peak: f64,
    pub temperature: f64,
    pub seed: u64,
    pub frame_hop_ms: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            phonemes: 20,
            phoneme_frames: (4, 10),
            gap_fraction: 0.35,
            gap_frames: (1, 4),
            silence_every: None,
            silence_frames: 30,
            edge_frames: 5,
            total_frames: None,
            peak: 0.8,
            temperature: 0.2,
            seed: 0,
            frame_hop_ms: 10.0,
        }
    }
}

/// Draws a scenario from `spec`. Labels are drawn from the inventory's
/// phonemes other than silence, never repeating back to back.
pub fn random_scenario(spec: &RandomSpec, inv: &PhonemeInventory) -> Result<SynthScenario> {
    let bad = |m: String| Err(Error::Config(m));
    let ordered = |r: (usize, usize)| r.0 >= 1 && r.0 <= r.1;
    if spec.phonemes == 0 {
        return Err(Error::EmptyTargets);
    }
    if !ordered(spec.phoneme_frames) || !ordered(spec.gap_frames) {
        return bad("frame ranges must be non-empty and start at 1 or more".into());
    }
    if !(0.0..=1.0).contains(&spec.gap_fraction) {
        return bad(format!("gap fraction {} outside [0, 1]", spec.gap_fraction));
    }
    let labels: Vec<usize> = inv.phoneme_classes().filter(|&c| c != inv.silence_id()).collect();
    if labels.len() < 2 {
        return bad("inventory needs two or more non-silence phonemes".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.phonemes;
    let mut phonemes = Vec::with_capacity(n);
    let mut prev = None;
    for _ in 0..n {
        let c = loop {
            let c = *labels.choose(&mut rng).unwrap();
            if Some(c) != prev {
                break c;
            }
        };
        prev = Some(c);
        phonemes.push(SynthPhoneme {
            label: inv.label(c).unwrap().to_string(),
            frames: rng.gen_range(spec.phoneme_frames.0..=spec.phoneme_frames.1),
        });
    }

    let silences: Vec<SynthSilence> = match spec.silence_every {
        Some(k) if k > 0 => (1..n)
            .filter(|i| i % k == 0)
            .map(|position| SynthSilence { position, frames: spec.silence_frames })
            .collect(),
        _ => Vec::new(),
    };
    let open: Vec<usize> =
        (1..n).filter(|i| !silences.iter().any(|s| s.position == *i)).collect();
    let wanted = ((spec.gap_fraction * n as f64).round() as usize).min(open.len());
    let mut gaps = vec![0; n - 1];
    for &i in open.choose_multiple(&mut rng, wanted) {
        gaps[i - 1] = rng.gen_range(spec.gap_frames.0..=spec.gap_frames.1);
    }

    let mut s = SynthScenario {
        phonemes,
        gaps,
        leading_blank: spec.edge_frames,
        trailing_blank: spec.edge_frames,
        silences,
        peak: spec.peak,
        temperature: spec.temperature,
        seed: rng.gen(),
        frame_hop_ms: spec.frame_hop_ms,
        frame_offset_ms: 0.0,
        total_frames: None,
    };
    if let Some(total) = spec.total_frames {
        let scripted = s.scripted_frames();
        if scripted > total {
            return bad(format!("random scenario needs {scripted} frames, more than {total}"));
        }
        s.trailing_blank += total - scripted;
        s.total_frames = Some(total);
    }
    Ok(s)
}
