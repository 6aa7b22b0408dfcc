//! Arabic-aware text preprocessing.
//!
//! The pipeline is `clean -> normalize -> tokenize -> remove_stopwords -> stem`.
//! Every stage is a pure function of its input and configuration.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const DEFAULT_PREFIXES: &str = include_str!("../data/prefixes.txt");
const DEFAULT_SUFFIXES: &str = include_str!("../data/suffixes.txt");

/// Characters removed as "special characters" in addition to punctuation.
pub const SPECIAL_CHARS: [char; 4] = ['#', '%', '&', '@'];

/// Letters of the Arabic script (hamza, alef variants, base letters and the
/// extended letters used for Persian/Urdu loans such as گ).
pub fn is_arabic_letter(c: char) -> bool {
    matches!(c,
        '\u{0621}'..='\u{063A}'
        | '\u{0641}'..='\u{064A}'
        | '\u{066E}'..='\u{066F}'
        | '\u{0671}'..='\u{06D3}'
        | '\u{06D5}'
        | '\u{06EE}'..='\u{06EF}'
        | '\u{06FA}'..='\u{06FC}'
        | '\u{06FF}'
        | '\u{0750}'..='\u{077F}')
}

/// Short vowels, tanween, shadda, sukun, Quranic annotation marks and tatweel.
pub fn is_arabic_diacritic(c: char) -> bool {
    matches!(c,
        '\u{0610}'..='\u{061A}'
        | '\u{064B}'..='\u{065F}'
        | '\u{0670}'
        | '\u{06D6}'..='\u{06DC}'
        | '\u{06DF}'..='\u{06E8}'
        | '\u{06EA}'..='\u{06ED}'
        | '\u{0640}')
}

/// Latin, Arabic and general Unicode punctuation plus the special characters.
pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || SPECIAL_CHARS.contains(&c)
        || matches!(c,
            '\u{060C}' | '\u{060D}' | '\u{061B}' | '\u{061E}' | '\u{061F}'
            | '\u{066A}'..='\u{066D}'
            | '\u{06D4}'
            | '\u{00A1}'..='\u{00BF}'
            | '\u{2010}'..='\u{205E}'
            | '\u{3000}'..='\u{303F}'
            | '\u{FD3E}' | '\u{FD3F}'
            | '\u{FE10}'..='\u{FE19}'
            | '\u{FE30}'..='\u{FE6B}'
            | '\u{FF01}'..='\u{FF0F}'
            | '\u{FF1A}'..='\u{FF20}')
}

/// Classes of codepoints that cleaning may delete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharClass {
    Diacritics,
    Punctuation,
    NonArabic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRules {
    pub char_map: BTreeMap<char, char>,
    pub strip_classes: BTreeSet<CharClass>,
    pub repeat_threshold: usize,
}

impl Default for NormalizationRules {
    fn default() -> Self {
        let char_map = [
            ('\u{0623}', '\u{0627}'), // أ -> ا
            ('\u{0625}', '\u{0627}'), // إ -> ا
            ('\u{0622}', '\u{0627}'), // آ -> ا
            ('\u{0626}', '\u{0627}'), // ئ -> ا
            ('\u{0649}', '\u{064A}'), // ى -> ي
            ('\u{0629}', '\u{0647}'), // ة -> ه
            ('\u{0624}', '\u{0648}'), // ؤ -> و
            ('\u{06AF}', '\u{0643}'), // گ -> ك
        ]
        .into_iter()
        .collect();
        Self {
            char_map,
            strip_classes: [CharClass::Diacritics, CharClass::Punctuation, CharClass::NonArabic]
                .into_iter()
                .collect(),
            repeat_threshold: 3,
        }
    }
}

impl NormalizationRules {
    pub fn validate(&self) -> Result<()> {
        if self.repeat_threshold < 2 {
            return Err(Error::config("repeat_threshold must be at least 2"));
        }
        for (from, to) in &self.char_map {
            if self.char_map.get(to).is_some_and(|t| t != to) {
                return Err(Error::config(format!(
                    "char_map is not idempotent: {from:?} -> {to:?} -> {:?}",
                    self.char_map[to]
                )));
            }
        }
        Ok(())
    }
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap())
}

/// Removes URLs, special characters, punctuation, diacritics and non-Arabic
/// material using the default rules.
pub fn clean(text: &str) -> String {
    clean_with(text, &NormalizationRules::default())
}

pub fn clean_with(text: &str, rules: &NormalizationRules) -> String {
    let strip_diacritics = rules.strip_classes.contains(&CharClass::Diacritics);
    let strip_punct = rules.strip_classes.contains(&CharClass::Punctuation);
    let strip_foreign = rules.strip_classes.contains(&CharClass::NonArabic);

    let without_urls = url_regex().replace_all(text, " ");
    let mut out = String::with_capacity(without_urls.len());
    let is_sep = |c: char| c.is_whitespace() || (strip_punct && is_punctuation(c));

    for piece in without_urls.split(is_sep) {
        if piece.is_empty() {
            continue;
        }
        if strip_foreign && !piece.chars().any(is_arabic_letter) {
            continue;
        }
        let kept = piece.chars().filter(|&c| {
            if is_arabic_diacritic(c) {
                !strip_diacritics
            } else if is_arabic_letter(c) {
                true
            } else {
                !strip_foreign
            }
        });
        let start = out.len();
        if !out.is_empty() {
            out.push(' ');
        }
        let before = out.len();
        out.extend(kept);
        if out.len() == before {
            out.truncate(start);
        }
    }
    out
}

/// Applies the character map and collapses runs of `repeat_threshold` or more
/// identical codepoints to a single codepoint.
pub fn normalize(text: &str, rules: &NormalizationRules) -> String {
    let mapped: Vec<char> = text
        .chars()
        .map(|c| rules.char_map.get(&c).copied().unwrap_or(c))
        .collect();

    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < mapped.len() {
        let c = mapped[i];
        let mut j = i + 1;
        while j < mapped.len() && mapped[j] == c {
            j += 1;
        }
        let run = j - i;
        let keep = if run >= rules.repeat_threshold { 1 } else { run };
        out.extend(std::iter::repeat_n(c, keep));
        i = j;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    #[serde(default)]
    pub source_id: String,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        Self {
            tokens,
            source_id: String::new(),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence::new(text.split_whitespace().map(str::to_owned).collect())
}

/// A set of normalized stop words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The bundled list of common Modern Standard Arabic function words.
    pub fn default_arabic() -> Self {
        Self::parse(DEFAULT_STOPWORDS, &NormalizationRules::default())
    }

    /// Builds a list from raw words; entries are normalized so the list is a
    /// fixpoint of `normalize`.
    pub fn from_words<I, S>(words: I, rules: &NormalizationRules) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| normalize(w.as_ref().trim(), rules))
            .filter(|w| !w.is_empty())
            .collect();
        Self { words }
    }

    /// One entry per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, rules: &NormalizationRules) -> Self {
        Self::from_words(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
            rules,
        )
    }

    pub fn load(path: &Path, rules: &NormalizationRules) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text, rules))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

pub fn remove_stopwords(seq: TokenSequence, stops: &StopList) -> TokenSequence {
    TokenSequence {
        tokens: seq
            .tokens
            .into_iter()
            .filter(|t| !stops.contains(t))
            .collect(),
        source_id: seq.source_id,
    }
}

pub trait Stemmer {
    fn stem_word(&self, word: &str) -> String;
}

/// Identity stemmer.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoopStemmer;

impl Stemmer for NoopStemmer {
    fn stem_word(&self, word: &str) -> String {
        word.to_owned()
    }
}

/// Affix-stripping stemmer.
///
/// Each pass strips the longest matching prefix and then the longest matching
/// suffix, provided the residual keeps at least `min_len` characters. Passes
/// repeat until the word stops changing, so stemming is idempotent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LightStemmer {
    prefixes: Vec<String>,
    suffixes: Vec<String>,
    min_len: usize,
}

impl Default for LightStemmer {
    fn default() -> Self {
        Self::from_tables(DEFAULT_PREFIXES, DEFAULT_SUFFIXES, 3)
    }
}

impl LightStemmer {
    pub fn new(prefixes: Vec<String>, suffixes: Vec<String>, min_len: usize) -> Self {
        let mut prefixes = prefixes;
        let mut suffixes = suffixes;
        // longest first; ties keep table order
        prefixes.sort_by_key(|p| std::cmp::Reverse(p.chars().count()));
        suffixes.sort_by_key(|s| std::cmp::Reverse(s.chars().count()));
        Self {
            prefixes,
            suffixes,
            min_len,
        }
    }

    pub fn from_tables(prefixes: &str, suffixes: &str, min_len: usize) -> Self {
        let lines = |t: &str| {
            t.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_owned)
                .collect::<Vec<_>>()
        };
        Self::new(lines(prefixes), lines(suffixes), min_len)
    }

    pub fn load(prefix_path: &Path, suffix_path: &Path, min_len: usize) -> Result<Self> {
        let p = std::fs::read_to_string(prefix_path).map_err(|e| Error::io(prefix_path, e))?;
        let s = std::fs::read_to_string(suffix_path).map_err(|e| Error::io(suffix_path, e))?;
        Ok(Self::from_tables(&p, &s, min_len))
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    fn strip_once<'a>(&self, word: &'a str) -> &'a str {
        let mut w = word;
        for p in &self.prefixes {
            if let Some(rest) = w.strip_prefix(p.as_str()) {
                if rest.chars().count() >= self.min_len {
                    w = rest;
                    break;
                }
            }
        }
        for s in &self.suffixes {
            if let Some(rest) = w.strip_suffix(s.as_str()) {
                if rest.chars().count() >= self.min_len {
                    w = rest;
                    break;
                }
            }
        }
        w
    }
}

impl Stemmer for LightStemmer {
    fn stem_word(&self, word: &str) -> String {
        let mut w = word;
        loop {
            let next = self.strip_once(w);
            if next.len() == w.len() {
                return w.to_owned();
            }
            w = next;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StemmerKind {
    None,
    #[default]
    Light,
}

pub fn stem(seq: TokenSequence, stemmer: &dyn Stemmer) -> TokenSequence {
    TokenSequence {
        tokens: seq
            .tokens
            .into_iter()
            .map(|t| {
                let s = stemmer.stem_word(&t);
                if s.is_empty() {
                    t
                } else {
                    s
                }
            })
            .collect(),
        source_id: seq.source_id,
    }
}

/// Full preprocessing configuration.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub rules: NormalizationRules,
    pub stops: StopList,
    pub stemmer: Option<LightStemmer>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            rules: NormalizationRules::default(),
            stops: StopList::default_arabic(),
            stemmer: Some(LightStemmer::default()),
        }
    }
}

impl PreprocessConfig {
    pub fn with_stemmer(mut self, kind: StemmerKind) -> Self {
        self.stemmer = match kind {
            StemmerKind::None => None,
            StemmerKind::Light => Some(LightStemmer::default()),
        };
        self
    }

    pub fn with_stops(mut self, stops: StopList) -> Self {
        self.stops = stops;
        self
    }
}

/// clean -> normalize -> tokenize -> remove_stopwords -> stem.
///
/// Tokens whose stem lands in the stop list are dropped as well, so every
/// output token is outside the stop list.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> TokenSequence {
    let cleaned = clean_with(text, &config.rules);
    let normalized = normalize(&cleaned, &config.rules);
    let tokens = remove_stopwords(tokenize(&normalized), &config.stops);
    match &config.stemmer {
        Some(stemmer) => remove_stopwords(stem(tokens, stemmer), &config.stops),
        None => tokens,
    }
}
