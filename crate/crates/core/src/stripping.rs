//! Content-word extraction and the three noise schemes applied to it.
//!
//! Randomness is always drawn from a ChaCha stream keyed by `(seed, document
//! id)`, so a document's output does not depend on which thread processed it
//! or on what else was in the batch.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{is_punctuation, Document, Line, Verse, LINE_BREAK};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum StripError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("synonym lexicon line {line}: {reason}")]
    MalformedSynonyms { line: usize, reason: String },
    #[error("synonym noise requires a synonym lexicon")]
    MissingSynonyms,
    #[error("{name} must be in [0, 1], got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("writing training pair: {0}")]
    Write(#[source] io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    /// The bundled English list.
    pub fn english() -> Self {
        StopWords::parse(BUNDLED_STOPWORDS)
    }

    /// One word per line; blank lines ignored.
    pub fn parse(text: &str) -> Self {
        StopWords {
            words: text
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StripError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| StripError::Io { path: path.to_path_buf(), source })?;
        Ok(StopWords::parse(&text))
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
}

/// Digits, optionally grouped by interior commas or periods (`4`, `1,000`, `3.5`).
pub fn is_number(token: &str) -> bool {
    token.starts_with(|c: char| c.is_ascii_digit())
        && token.ends_with(|c: char| c.is_ascii_digit())
        && token.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.')
}

pub fn is_content_word(token: &str, stopwords: &StopWords) -> bool {
    !token.is_empty() && !is_punctuation(token) && !is_number(token) && !stopwords.contains(token)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    Shuffle,
    Drop,
    Synonym,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::None => "none",
            NoiseKind::Shuffle => "shuffle",
            NoiseKind::Drop => "drop",
            NoiseKind::Synonym => "synonym",
        })
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(NoiseKind::None),
            "shuffle" => Ok(NoiseKind::Shuffle),
            "drop" => Ok(NoiseKind::Drop),
            "synonym" => Ok(NoiseKind::Synonym),
            other => Err(format!("unknown noise `{other}` (expected shuffle, drop or synonym)")),
        }
    }
}

/// Content tokens per source line. Lines emptied by filtering are kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentWords {
    pub provenance: String,
    pub noise: NoiseKind,
    pub seed: u64,
    pub lines: Vec<Vec<String>>,
}

impl ContentWords {
    pub fn num_tokens(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flat_map(|l| l.iter().map(String::as_str))
    }

    /// Non-empty lines as a verse.
    pub fn to_verse(&self) -> Verse {
        let lines = self
            .lines
            .iter()
            .filter(|l| !l.is_empty())
            .map(|l| Line::new(l.clone()))
            .collect();
        Verse { lines, source_doc: Some(self.provenance.clone()) }
    }

    /// Non-empty lines joined by ` <nl> `; empty when there are no content words.
    pub fn to_flat(&self) -> String {
        self.lines
            .iter()
            .filter(|l| !l.is_empty())
            .map(|l| l.join(" "))
            .collect::<Vec<_>>()
            .join(&format!(" {LINE_BREAK} "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub drop_rate: f64,
    pub synonym_rate: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { drop_rate: 0.20, synonym_rate: 0.20, seed: 0 }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), StripError> {
        for (name, value) in [("drop_rate", self.drop_rate), ("synonym_rate", self.synonym_rate)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(StripError::InvalidRate { name, value });
            }
        }
        Ok(())
    }
}

/// Word to single-word synonyms, from a `word<TAB>syn1,syn2,...` file.
#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn parse(text: &str) -> Result<Self, StripError> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((word, syns)) = line.split_once('\t') else {
                return Err(StripError::MalformedSynonyms {
                    line: idx + 1,
                    reason: "expected `word<TAB>syn1,syn2,...`".into(),
                });
            };
            let word = word.trim().to_lowercase();
            let list = entries.entry(word.clone()).or_default();
            for syn in syns.split(',') {
                let syn = syn.trim().to_lowercase();
                // multi-word synonyms would change the token count
                if syn.is_empty() || syn == word || syn.contains(|c: char| c.is_whitespace() || c == '_') {
                    continue;
                }
                if !list.contains(&syn) {
                    list.push(syn);
                }
            }
        }
        entries.retain(|_, v| !v.is_empty());
        Ok(SynonymLexicon { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StripError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| StripError::Io { path: path.to_path_buf(), source })?;
        SynonymLexicon::parse(&text)
    }

    /// Drops synonyms that are not content words so substitution never
    /// introduces a stopword, number or punctuation token.
    pub fn retain_content(mut self, stopwords: &StopWords) -> Self {
        for list in self.entries.values_mut() {
            list.retain(|s| is_content_word(s, stopwords));
        }
        self.entries.retain(|_, v| !v.is_empty());
        self
    }

    pub fn synonyms(&self, word: &str) -> &[String] {
        self.entries.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// RNG stream for one document.
pub fn document_rng(seed: u64, doc_id: &str, purpose: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((doc_id.len() as u64).to_le_bytes());
    hasher.update(doc_id.as_bytes());
    hasher.update(purpose.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

pub fn content_words_from_lines(lines: &[Line], provenance: &str, stopwords: &StopWords) -> ContentWords {
    ContentWords {
        provenance: provenance.to_string(),
        noise: NoiseKind::None,
        seed: 0,
        lines: lines
            .iter()
            .map(|l| l.tokens.iter().filter(|t| is_content_word(t, stopwords)).cloned().collect())
            .collect(),
    }
}

/// Removes stopwords, numbers and punctuation line by line.
pub fn extract_content_words(doc: &Document, stopwords: &StopWords) -> ContentWords {
    content_words_from_lines(&doc.lines, &doc.id, stopwords)
}

/// Shuffles each line independently.
pub fn noise_shuffle(cw: &ContentWords, seed: u64) -> ContentWords {
    let mut rng = document_rng(seed, &cw.provenance, "shuffle");
    let mut out = cw.clone();
    for line in &mut out.lines {
        line.shuffle(&mut rng);
    }
    out.noise = NoiseKind::Shuffle;
    out.seed = seed;
    out
}

/// `floor(rate * n)`, tolerant of representation error in `rate * n`.
fn noised_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64) + 1e-9).floor().min(n as f64) as usize
}

fn positions(cw: &ContentWords) -> Vec<(usize, usize)> {
    cw.lines
        .iter()
        .enumerate()
        .flat_map(|(li, l)| (0..l.len()).map(move |ti| (li, ti)))
        .collect()
}

/// Removes exactly `floor(drop_rate * n)` tokens chosen uniformly.
pub fn noise_drop(cw: &ContentWords, cfg: &NoiseConfig) -> ContentWords {
    let mut rng = document_rng(cfg.seed, &cw.provenance, "drop");
    let flat = positions(cw);
    let count = noised_count(cfg.drop_rate, flat.len());
    let mut dropped = vec![false; flat.len()];
    for i in index::sample(&mut rng, flat.len(), count) {
        dropped[i] = true;
    }
    let mut lines: Vec<Vec<String>> = vec![Vec::new(); cw.lines.len()];
    for (k, &(li, ti)) in flat.iter().enumerate() {
        if !dropped[k] {
            lines[li].push(cw.lines[li][ti].clone());
        }
    }
    ContentWords { provenance: cw.provenance.clone(), noise: NoiseKind::Drop, seed: cfg.seed, lines }
}

/// Replaces `floor(synonym_rate * n)` uniformly chosen tokens by a random
/// synonym; tokens without synonyms stay as they are.
pub fn noise_synonym(cw: &ContentWords, lex: &SynonymLexicon, cfg: &NoiseConfig) -> ContentWords {
    let mut rng = document_rng(cfg.seed, &cw.provenance, "synonym");
    let flat = positions(cw);
    let count = noised_count(cfg.synonym_rate, flat.len());
    let mut out = cw.clone();
    let mut chosen = index::sample(&mut rng, flat.len(), count).into_vec();
    chosen.sort_unstable();
    for k in chosen {
        let (li, ti) = flat[k];
        let token = &cw.lines[li][ti];
        let options: Vec<&String> = lex.synonyms(token).iter().filter(|s| *s != token).collect();
        if let Some(syn) = options.choose(&mut rng) {
            out.lines[li][ti] = (*syn).clone();
        }
    }
    out.noise = NoiseKind::Synonym;
    out.seed = cfg.seed;
    out
}

pub fn apply_noise(
    cw: &ContentWords,
    kind: NoiseKind,
    cfg: &NoiseConfig,
    synonyms: Option<&SynonymLexicon>,
) -> Result<ContentWords, StripError> {
    Ok(match kind {
        NoiseKind::None => ContentWords { seed: cfg.seed, ..cw.clone() },
        NoiseKind::Shuffle => noise_shuffle(cw, cfg.seed),
        NoiseKind::Drop => noise_drop(cw, cfg),
        NoiseKind::Synonym => noise_synonym(cw, synonyms.ok_or(StripError::MissingSynonyms)?, cfg),
    })
}

/// Stripping plus exactly one noise scheme.
#[derive(Debug, Clone)]
pub struct Stripper {
    pub stopwords: StopWords,
    pub synonyms: Option<SynonymLexicon>,
    pub noise: NoiseKind,
    pub config: NoiseConfig,
}

impl Stripper {
    pub fn new(stopwords: StopWords, noise: NoiseKind, config: NoiseConfig) -> Self {
        Stripper { stopwords, synonyms: None, noise, config }
    }

    pub fn with_synonyms(mut self, synonyms: SynonymLexicon) -> Self {
        self.synonyms = Some(synonyms.retain_content(&self.stopwords));
        self
    }

    pub fn strip_lines(&self, lines: &[Line], provenance: &str) -> Result<ContentWords, StripError> {
        let cw = content_words_from_lines(lines, provenance, &self.stopwords);
        apply_noise(&cw, self.noise, &self.config, self.synonyms.as_ref())
    }

    pub fn strip(&self, doc: &Document) -> Result<ContentWords, StripError> {
        self.strip_lines(&doc.lines, &doc.id)
    }

    /// Strips documents in parallel; output order follows input order.
    pub fn strip_batch(&self, docs: &[Document]) -> Result<Vec<ContentWords>, StripError> {
        self.config.validate()?;
        docs.par_iter().map(|d| self.strip(d)).collect()
    }
}

/// One source/target record for an external sequence-to-sequence trainer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub source: String,
    pub target: String,
}

impl TrainingPair {
    pub fn new(cw: &ContentWords, target: &Verse) -> Self {
        TrainingPair { source: cw.to_flat(), target: target.to_flat() }
    }
}

/// Writes the pair as one JSON line.
pub fn emit_training_pair(
    cw: &ContentWords,
    target: &Verse,
    out: &mut impl Write,
) -> Result<TrainingPair, StripError> {
    let pair = TrainingPair::new(cw, target);
    serde_json::to_writer(&mut *out, &pair).map_err(|e| StripError::Write(e.into()))?;
    out.write_all(b"\n").map_err(StripError::Write)?;
    Ok(pair)
}
