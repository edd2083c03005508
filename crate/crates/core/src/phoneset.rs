//! Phoneme and phoneme-group inventories, and the mapping from IPA symbols
//! onto inventory classes.
//!
//! Class indices are positions along a posteriorgram axis. Each head (phoneme
//! or group) reserves one class for the CTC blank, placed either before or
//! after the labelled classes.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PHONEME_COUNT: usize = 67;
pub const DEFAULT_GROUP_COUNT: usize = 17;

const BUILTIN_INVENTORY: &str = include_str!("../assets/inventory-67.txt");
const TOY_INVENTORY: &str = include_str!("../assets/inventory-toy.txt");

/// Which classifier output a posteriorgram axis indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Phoneme,
    Group,
}

impl Head {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Head::Phoneme => 0,
            Head::Group => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Head> {
        match tag {
            0 => Some(Head::Phoneme),
            1 => Some(Head::Group),
            _ => None,
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Phoneme => f.write_str("phoneme"),
            Head::Group => f.write_str("group"),
        }
    }
}

/// Whether the 67/17 class counts are enforced when loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountCheck {
    #[default]
    Strict,
    Permissive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlankPosition {
    First,
    Last,
}

/// Immutable phoneme inventory: phoneme labels, group labels, the total
/// phoneme → group map, the IPA symbol table and the blank/silence classes.
#[derive(Debug, Clone)]
pub struct PhonemeInventory {
    phonemes: Vec<String>,
    groups: Vec<String>,
    // indexed by phoneme position, holds group position
    group_of: Vec<usize>,
    blank: BlankPosition,
    blank_label: String,
    silence: usize,
    by_label: HashMap<String, usize>,
    ipa: HashMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Phonemes,
    Groups,
    GroupMap,
    IpaMap,
    Special,
}

impl PhonemeInventory {
    /// The shipped 67-phoneme / 17-group inventory.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_INVENTORY, CountCheck::Strict).expect("builtin inventory is valid")
    }

    /// Five phonemes in two groups; used by tests and small fixtures.
    pub fn toy() -> Self {
        Self::parse(TOY_INVENTORY, CountCheck::Permissive).expect("toy inventory is valid")
    }

    pub fn load(path: impl AsRef<Path>, check: CountCheck) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, check)
    }

    /// Parses and validates an inventory document.
    pub fn parse(doc: &str, check: CountCheck) -> Result<Self> {
        let mut section = None;
        let mut saw_version = false;
        let mut phonemes: Vec<String> = Vec::new();
        let mut groups: Vec<String> = Vec::new();
        let mut group_pairs: Vec<(usize, String, String)> = Vec::new();
        let mut ipa_pairs: Vec<(usize, String, String)> = Vec::new();
        let mut blank = BlankPosition::First;
        let mut blank_label = "<blank>".to_string();
        let mut silence_label: Option<(usize, String)> = None;

        for (idx, raw) in doc.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name.trim() {
                    "PHONEMES" => Section::Phonemes,
                    "GROUPS" => Section::Groups,
                    "GROUPMAP" => Section::GroupMap,
                    "IPAMAP" => Section::IpaMap,
                    "SPECIAL" => Section::Special,
                    other => {
                        return Err(Error::inventory(Some(lineno), format!("unknown section [{other}]")))
                    }
                });
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some(section) = section else {
                match fields.as_slice() {
                    ["version", "1"] => {
                        saw_version = true;
                        continue;
                    }
                    ["version", v] => {
                        return Err(Error::inventory(Some(lineno), format!("unsupported version {v}")))
                    }
                    _ => return Err(Error::inventory(Some(lineno), "entry outside of any section")),
                }
            };
            let expect = |n: usize| -> Result<()> {
                if fields.len() == n {
                    Ok(())
                } else {
                    Err(Error::inventory(
                        Some(lineno),
                        format!("expected {n} field(s), found {}", fields.len()),
                    ))
                }
            };
            match section {
                Section::Phonemes => {
                    expect(1)?;
                    phonemes.push(fields[0].to_string());
                }
                Section::Groups => {
                    expect(1)?;
                    groups.push(fields[0].to_string());
                }
                Section::GroupMap => {
                    expect(2)?;
                    group_pairs.push((lineno, fields[0].to_string(), fields[1].to_string()));
                }
                Section::IpaMap => {
                    expect(2)?;
                    ipa_pairs.push((lineno, fields[0].to_string(), fields[1].to_string()));
                }
                Section::Special => {
                    expect(2)?;
                    match fields[0] {
                        "blank" => {
                            blank = match fields[1] {
                                "first" => BlankPosition::First,
                                "last" => BlankPosition::Last,
                                other => {
                                    return Err(Error::inventory(
                                        Some(lineno),
                                        format!("blank must be `first` or `last`, got {other:?}"),
                                    ))
                                }
                            }
                        }
                        "blank_label" => blank_label = fields[1].to_string(),
                        "silence" => silence_label = Some((lineno, fields[1].to_string())),
                        other => {
                            return Err(Error::inventory(Some(lineno), format!("unknown special key {other:?}")))
                        }
                    }
                }
            }
        }

        if !saw_version {
            return Err(Error::inventory(None, "missing `version 1` line"));
        }
        if phonemes.is_empty() || groups.is_empty() {
            return Err(Error::inventory(None, "inventory needs at least one phoneme and one group"));
        }
        if check == CountCheck::Strict
            && (phonemes.len() != DEFAULT_PHONEME_COUNT || groups.len() != DEFAULT_GROUP_COUNT)
        {
            return Err(Error::inventory(
                None,
                format!(
                    "expected {DEFAULT_PHONEME_COUNT} phonemes and {DEFAULT_GROUP_COUNT} groups, found {} and {}",
                    phonemes.len(),
                    groups.len()
                ),
            ));
        }

        let mut by_label = HashMap::new();
        for (i, p) in phonemes.iter().enumerate() {
            if by_label.insert(p.clone(), i).is_some() {
                return Err(Error::inventory(None, format!("duplicate phoneme label {p:?}")));
            }
        }
        if by_label.contains_key(&blank_label) {
            return Err(Error::inventory(None, format!("blank label {blank_label:?} collides with a phoneme")));
        }
        let mut group_index = HashMap::new();
        for (i, g) in groups.iter().enumerate() {
            if group_index.insert(g.as_str(), i).is_some() {
                return Err(Error::inventory(None, format!("duplicate group label {g:?}")));
            }
        }

        let mut group_of = vec![None; phonemes.len()];
        for (lineno, phone, group) in &group_pairs {
            let &p = by_label
                .get(phone)
                .ok_or_else(|| Error::inventory(Some(*lineno), format!("unknown phoneme {phone:?}")))?;
            let &g = group_index
                .get(group.as_str())
                .ok_or_else(|| Error::inventory(Some(*lineno), format!("unknown group {group:?}")))?;
            if group_of[p].replace(g).is_some() {
                return Err(Error::inventory(Some(*lineno), format!("phoneme {phone:?} assigned twice")));
            }
        }
        let group_of = group_of
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.ok_or_else(|| Error::inventory(None, format!("phoneme {:?} has no group", phonemes[i])))
            })
            .collect::<Result<Vec<_>>>()?;

        let (silence_line, silence_label) =
            silence_label.ok_or_else(|| Error::inventory(None, "missing `silence` entry in [SPECIAL]"))?;
        let &silence = by_label.get(&silence_label).ok_or_else(|| {
            Error::inventory(Some(silence_line), format!("silence label {silence_label:?} is not a phoneme"))
        })?;

        let mut ipa: HashMap<String, usize> = HashMap::new();
        for (i, p) in phonemes.iter().enumerate() {
            if i != silence {
                ipa.insert(p.clone(), i);
            }
        }
        let mut explicit = HashSet::new();
        for (lineno, symbol, phone) in &ipa_pairs {
            let &p = by_label
                .get(phone)
                .ok_or_else(|| Error::inventory(Some(*lineno), format!("IPA target {phone:?} is not a phoneme")))?;
            if !explicit.insert(symbol.clone()) && ipa.get(symbol) != Some(&p) {
                return Err(Error::inventory(
                    Some(*lineno),
                    format!("IPA symbol {symbol:?} maps to more than one phoneme"),
                ));
            }
            ipa.insert(symbol.clone(), p);
        }

        Ok(Self { phonemes, groups, group_of, blank, blank_label, silence, by_label, ipa })
    }

    pub fn num_phonemes(&self) -> usize {
        self.phonemes.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Width of a posteriorgram for the given head, blank included.
    pub fn num_classes(&self, head: Head) -> usize {
        match head {
            Head::Phoneme => self.phonemes.len() + 1,
            Head::Group => self.groups.len() + 1,
        }
    }

    pub fn blank_id(&self) -> usize {
        self.blank_for(Head::Phoneme)
    }

    pub fn blank_for(&self, head: Head) -> usize {
        match self.blank {
            BlankPosition::First => 0,
            BlankPosition::Last => self.num_classes(head) - 1,
        }
    }

    pub fn silence_id(&self) -> usize {
        self.class_of_position(self.silence)
    }

    fn class_of_position(&self, pos: usize) -> usize {
        match self.blank {
            BlankPosition::First => pos + 1,
            BlankPosition::Last => pos,
        }
    }

    fn position_of_class(&self, class: usize, head: Head) -> Option<usize> {
        let blank = self.blank_for(head);
        if class >= self.num_classes(head) || class == blank {
            return None;
        }
        Some(match self.blank {
            BlankPosition::First => class - 1,
            BlankPosition::Last => class,
        })
    }

    /// Phoneme-head class indices of every phoneme, blank excluded.
    pub fn phoneme_classes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.phonemes.len()).map(|p| self.class_of_position(p))
    }

    /// Label of a phoneme-head class; the blank class yields the blank label.
    pub fn label(&self, class: usize) -> Option<&str> {
        if class == self.blank_id() {
            return Some(&self.blank_label);
        }
        self.position_of_class(class, Head::Phoneme).map(|p| self.phonemes[p].as_str())
    }

    pub fn class_of_label(&self, label: &str) -> Option<usize> {
        self.by_label.get(label).map(|&p| self.class_of_position(p))
    }

    /// Group-head class of a phoneme-head class.
    pub fn group_of(&self, class: usize) -> Option<usize> {
        let pos = self.position_of_class(class, Head::Phoneme)?;
        let g = self.group_of[pos];
        Some(match self.blank {
            BlankPosition::First => g + 1,
            BlankPosition::Last => g,
        })
    }

    pub fn group_label(&self, group_class: usize) -> Option<&str> {
        self.position_of_class(group_class, Head::Group).map(|g| self.groups[g].as_str())
    }

    /// Exact IPA lookup, no fallback.
    pub fn ipa_class(&self, symbol: &str) -> Option<usize> {
        self.ipa.get(symbol).map(|&p| self.class_of_position(p))
    }

    /// Looks up an IPA symbol, falling back to the symbol with diacritics and
    /// modifier letters removed.
    pub fn resolve_ipa(&self, symbol: &str) -> Option<usize> {
        if let Some(c) = self.ipa_class(symbol) {
            return Some(c);
        }
        let base = strip_diacritics(symbol);
        if base.is_empty() || base == symbol {
            return None;
        }
        self.ipa_class(&base)
    }

    /// Maps an IPA symbol list onto a target sequence. Pause and punctuation
    /// symbols become silence markers.
    pub fn map_ipa<S: AsRef<str>>(&self, symbols: &[S], opts: &MapOptions) -> Result<TargetSequence> {
        let mut items = Vec::with_capacity(symbols.len());
        for (i, sym) in symbols.iter().enumerate() {
            let sym = sym.as_ref();
            if opts.is_pause(sym) {
                items.push(Token::Silence);
                continue;
            }
            match self.resolve_ipa(sym) {
                Some(class) => items.push(Token::Phoneme(class)),
                None => match opts.mode {
                    MapMode::Strict => {
                        return Err(Error::UnknownSymbol { symbol: sym.to_string(), position: i + 1 })
                    }
                    MapMode::Lenient => {
                        log::warn!("skipping unknown IPA symbol {sym:?} at position {}", i + 1)
                    }
                },
            }
        }
        TargetSequence::new(items, self)
    }
}

fn is_diacritic(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F   // combining diacritical marks, tie bars
        | 0x02B0..=0x02FF // spacing modifier letters: ʰ ʲ ʷ ː ˈ ˌ ...
        | 0x1AB0..=0x1AFF
        | 0x1DC0..=0x1DFF
        | 0x20D0..=0x20FF)
}

pub fn strip_diacritics(symbol: &str) -> String {
    symbol.chars().filter(|&c| !is_diacritic(c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MapMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone)]
pub struct MapOptions {
    pub mode: MapMode,
    pub pause_symbols: Vec<String>,
}

pub const DEFAULT_PAUSE_SYMBOLS: [&str; 8] = [".", ",", ";", ":", "!", "?", "—", "…"];

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            mode: MapMode::Strict,
            pause_symbols: DEFAULT_PAUSE_SYMBOLS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl MapOptions {
    pub fn lenient() -> Self {
        Self { mode: MapMode::Lenient, ..Self::default() }
    }

    pub fn is_pause(&self, symbol: &str) -> bool {
        self.pause_symbols.iter().any(|p| p == symbol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Token {
    Phoneme(usize),
    Silence,
}

/// Ordered phoneme targets with optional silence markers between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSequence {
    items: Vec<Token>,
    pub source_text: Option<String>,
}

impl TargetSequence {
    pub fn new(items: Vec<Token>, inv: &PhonemeInventory) -> Result<Self> {
        Self::with_classes(items, inv.num_classes(Head::Phoneme), inv.blank_id())
    }

    /// Validates against a raw class axis of `num_classes` with the given blank.
    pub fn with_classes(items: Vec<Token>, num_classes: usize, blank: usize) -> Result<Self> {
        let mut any = false;
        for t in &items {
            if let Token::Phoneme(c) = *t {
                if c == blank {
                    return Err(Error::InvalidTarget("blank class used as a target".into()));
                }
                if c >= num_classes {
                    return Err(Error::LabelOutOfRange { label: c, num_classes });
                }
                any = true;
            }
        }
        if !any {
            return Err(Error::EmptyTargets);
        }
        Ok(Self { items, source_text: None })
    }

    pub fn items(&self) -> &[Token] {
        &self.items
    }

    /// Phoneme classes with silence markers removed.
    pub fn phonemes(&self) -> Vec<usize> {
        self.items
            .iter()
            .filter_map(|t| match t {
                Token::Phoneme(c) => Some(*c),
                Token::Silence => None,
            })
            .collect()
    }

    /// Splits the phonemes at interior silence markers. Leading and trailing
    /// markers are utterance-edge silence and runs of markers count once, so
    /// every chunk is non-empty.
    pub fn chunks(&self) -> Vec<Vec<usize>> {
        let mut chunks = vec![Vec::new()];
        for t in &self.items {
            match *t {
                Token::Phoneme(c) => chunks.last_mut().unwrap().push(c),
                Token::Silence => {
                    if !chunks.last().unwrap().is_empty() {
                        chunks.push(Vec::new());
                    }
                }
            }
        }
        if chunks.last().is_some_and(|c| c.is_empty()) {
            chunks.pop();
        }
        chunks
    }

    pub fn interior_markers(&self) -> usize {
        self.chunks().len() - 1
    }
}
