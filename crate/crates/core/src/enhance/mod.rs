//! Rhyme enhancement by masked-word substitution.
//!
//! Adjacent lines are processed in disjoint pairs `(0, 1)`, `(2, 3)`, ... For
//! each pair the line-final word of either line is masked, a
//! [`MaskedPredictor`] proposes replacements, and whichever single substitution
//! gives the longer end rhyme with the other line is applied. A pair's end
//! rhyme never gets shorter.

mod corpus_predictor;
mod remote;

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Verse, LINE_BREAK};
use crate::metrics::rhyme_length_with;
use crate::phonetics::Lexicon;

pub use corpus_predictor::CorpusPredictor;
pub use remote::{RemotePredictor, RetryPolicy};

pub const MASK: &str = "<mask>";

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("line {line}: cannot mask empty line")]
    EmptyLine { line: usize },
    #[error("line index {line} out of range for a verse of {len} lines")]
    LineOutOfRange { line: usize, len: usize },
    #[error("predictor failed for mask at token {mask_index}: {source}")]
    Predictor {
        mask_index: usize,
        #[source]
        source: PredictError,
    },
    #[error("cannot build a predictor from an empty corpus")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum PredictError {
    /// Transport failure or server error that persisted through all retries.
    #[error("retryable failure after {attempts} attempts: {message}")]
    Retryable { attempts: u32, message: String },
    /// The server answered with something that violates the wire protocol.
    #[error("protocol error: {reason}; body: {excerpt}")]
    Protocol { reason: String, excerpt: String },
    #[error("{0}")]
    Other(String),
}

/// A flattened verse with exactly one token replaced by [`MASK`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorQuery {
    pub tokens: Vec<String>,
    pub mask_index: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub token: String,
    pub score: f64,
}

/// Replacement candidates in descending score order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateList {
    pub candidates: Vec<Candidate>,
}

impl CandidateList {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Checks descending order and the `k` bound.
    pub fn validate(&self, k: usize) -> Result<(), String> {
        if self.candidates.len() > k {
            return Err(format!("{} candidates returned for k = {k}", self.candidates.len()));
        }
        if let Some(i) = self
            .candidates
            .windows(2)
            .position(|w| w[0].score.partial_cmp(&w[1].score).is_none_or(|o| o.is_lt()))
        {
            return Err(format!("candidates not sorted by descending score at position {}", i + 1));
        }
        Ok(())
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for CandidateList {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        CandidateList {
            candidates: iter.into_iter().map(|(t, s)| Candidate { token: t.into(), score: s }).collect(),
        }
    }
}

/// Anything that ranks replacements for a masked position. Identical queries
/// must give identical answers.
pub trait MaskedPredictor: Send + Sync {
    fn predict(&self, query: &PredictorQuery) -> Result<CandidateList, PredictError>;
}

impl<P: MaskedPredictor + ?Sized> MaskedPredictor for &P {
    fn predict(&self, query: &PredictorQuery) -> Result<CandidateList, PredictError> {
        (**self).predict(query)
    }
}

impl<P: MaskedPredictor + ?Sized> MaskedPredictor for Box<P> {
    fn predict(&self, query: &PredictorQuery) -> Result<CandidateList, PredictError> {
        (**self).predict(query)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EnhanceMode {
    /// Take the highest-scored candidate that improves the rhyme.
    #[default]
    #[serde(rename = "first")]
    FirstImprovement,
    /// Take the candidate with the longest rhyme, ties by predictor score.
    #[serde(rename = "best")]
    BestOfK,
}

impl FromStr for EnhanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" | "first_improvement" => Ok(EnhanceMode::FirstImprovement),
            "best" | "best_of_k" => Ok(EnhanceMode::BestOfK),
            other => Err(format!("unknown mode `{other}` (expected first or best)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnhanceConfig {
    pub k: usize,
    pub mode: EnhanceMode,
    pub deny_list: HashSet<String>,
    /// When false, a candidate spelled like the anchor counts as a full rhyme.
    pub exclude_identical: bool,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig {
            k: 200,
            mode: EnhanceMode::FirstImprovement,
            deny_list: HashSet::new(),
            exclude_identical: true,
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<(), EnhanceError> {
        if self.k == 0 {
            return Err(EnhanceError::ZeroK);
        }
        Ok(())
    }
}

/// Reads a deny list: one lowercase word per line.
pub fn load_deny_list(path: impl AsRef<Path>) -> Result<HashSet<String>, EnhanceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| EnhanceError::Io { path: path.display().to_string(), source })?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Position of a line's final word in the flattened token stream.
fn final_word_position(verse: &Verse, line: usize) -> Result<(usize, usize), EnhanceError> {
    let len = verse.lines.len();
    let target = verse.lines.get(line).ok_or(EnhanceError::LineOutOfRange { line, len })?;
    let word = target.last_word_index().ok_or(EnhanceError::EmptyLine { line })?;
    let offset: usize = verse.lines[..line].iter().map(|l| l.len() + 1).sum();
    Ok((word, offset + word))
}

/// Flattens the verse with `<nl>` between lines and masks line `line`'s final word.
pub fn mask_text(verse: &Verse, line: usize, k: usize) -> Result<PredictorQuery, EnhanceError> {
    let (_, mask_index) = final_word_position(verse, line)?;
    let mut tokens = Vec::with_capacity(verse.num_tokens() + verse.lines.len());
    for (i, l) in verse.lines.iter().enumerate() {
        if i > 0 {
            tokens.push(LINE_BREAK.to_string());
        }
        tokens.extend(l.tokens.iter().cloned());
    }
    tokens[mask_index] = MASK.to_string();
    Ok(PredictorQuery { tokens, mask_index, k })
}

fn last_word(verse: &Verse, line: usize) -> Result<&str, EnhanceError> {
    let (word, _) = final_word_position(verse, line)?;
    Ok(&verse.lines[line].tokens[word])
}

fn acceptable(candidate: &str, original: &str, cfg: &EnhanceConfig) -> bool {
    !candidate.is_empty()
        && candidate.chars().all(char::is_alphabetic)
        && candidate != original
        && !cfg.deny_list.contains(candidate)
}

/// Best replacement for the final word of line `tgt_idx` given the final word
/// of line `src_idx` as the rhyme anchor. Returns the original word and its
/// rhyme length when no candidate improves on it.
pub fn get_rhyming_replacement<P: MaskedPredictor + ?Sized>(
    verse: &Verse,
    src_idx: usize,
    tgt_idx: usize,
    query: &PredictorQuery,
    predictor: &P,
    cfg: &EnhanceConfig,
    lex: &Lexicon,
) -> Result<(String, usize), EnhanceError> {
    let src = last_word(verse, src_idx)?;
    let tgt = last_word(verse, tgt_idx)?;
    let rl = |w: &str| rhyme_length_with(w, src, lex, cfg.exclude_identical);
    let rl_orig = rl(tgt);

    let mut query = query.clone();
    query.k = cfg.k;
    let predictions = predictor
        .predict(&query)
        .map_err(|source| EnhanceError::Predictor { mask_index: query.mask_index, source })?;

    let candidates = predictions
        .candidates
        .iter()
        .take(cfg.k)
        .map(|c| c.token.to_lowercase())
        .filter(|c| acceptable(c, tgt, cfg));

    let mut best: Option<(String, usize)> = None;
    for cand in candidates {
        let len = rl(&cand);
        if len <= rl_orig {
            continue;
        }
        match cfg.mode {
            EnhanceMode::FirstImprovement => return Ok((cand, len)),
            EnhanceMode::BestOfK => {
                if best.as_ref().is_none_or(|(_, b)| len > *b) {
                    best = Some((cand, len));
                }
            }
        }
    }
    Ok(best.unwrap_or_else(|| (tgt.to_string(), rl_orig)))
}

/// A substitution made at a line-final position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Replacement {
    pub line: usize,
    pub token: usize,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhanceOutcome {
    pub verse: Verse,
    pub replacements: Vec<Replacement>,
}

/// Runs rhyme enhancement over the verse and reports every substitution.
/// Pairs in which either line has no word are left alone.
pub fn enhance_verse_report<P: MaskedPredictor + ?Sized>(
    verse: &Verse,
    predictor: &P,
    cfg: &EnhanceConfig,
    lex: &Lexicon,
) -> Result<EnhanceOutcome, EnhanceError> {
    cfg.validate()?;
    let mut current = verse.clone();
    let mut replacements = Vec::new();
    for i in (0..current.lines.len().saturating_sub(1)).step_by(2) {
        if current.lines[i].last_word_index().is_none() || current.lines[i + 1].last_word_index().is_none() {
            continue;
        }
        let mask_1 = mask_text(&current, i, cfg.k)?;
        let mask_2 = mask_text(&current, i + 1, cfg.k)?;
        let (cand_1, rl_1) = get_rhyming_replacement(&current, i + 1, i, &mask_1, predictor, cfg, lex)?;
        let (cand_2, rl_2) = get_rhyming_replacement(&current, i, i + 1, &mask_2, predictor, cfg, lex)?;
        let (line, cand) = if rl_2 >= rl_1 { (i + 1, cand_2) } else { (i, cand_1) };
        let (token, _) = final_word_position(&current, line)?;
        let slot = &mut current.lines[line].tokens[token];
        if *slot != cand {
            replacements.push(Replacement { line, token, from: slot.clone(), to: cand.clone() });
            *slot = cand;
        }
    }
    Ok(EnhanceOutcome { verse: current, replacements })
}

pub fn enhance_verse<P: MaskedPredictor + ?Sized>(
    verse: &Verse,
    predictor: &P,
    cfg: &EnhanceConfig,
    lex: &Lexicon,
) -> Result<Verse, EnhanceError> {
    enhance_verse_report(verse, predictor, cfg, lex).map(|o| o.verse)
}
