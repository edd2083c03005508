//! Forced alignment of known phoneme sequences against frame-level phoneme
//! log-posteriors.
//!
//! The decoder runs an exact Viterbi pass over a blank-interleaved CTC state
//! path. Each phoneme gets both a start and an end boundary, so blank frames
//! between phonemes surface as explicit gaps. Around the decoder sit a
//! probability floor and boost for target classes, silence-split decoding,
//! and a pass that guarantees every target phoneme appears in the output.
//! [`metrics`] implements the boundary evaluation suite and [`synth`]
//! generates posteriorgrams with known ground truth.

pub mod document;
pub mod error;
pub mod lattice;
pub mod metrics;
pub mod par;
pub mod phoneset;
pub mod pipeline;
pub mod posterior;
pub mod synth;
pub mod textgrid;
pub mod time;

pub use error::{Error, Infeasibility, Result};
pub use lattice::{backtrace_to_occupancy, viterbi, OccupancyRun, StatePath, StateTrace};
pub use phoneset::{CountCheck, Head, MapOptions, PhonemeInventory, TargetSequence, Token};
pub use pipeline::{align, AlignConfig, Alignment, PhonemeInterval};
pub use posterior::{read_posteriorgram, write_posteriorgram, Posteriorgram, ReadOptions};
pub use time::Ticks;
