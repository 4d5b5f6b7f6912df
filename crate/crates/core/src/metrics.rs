//! Rhyme, repetition, overlap and BLEU measures.
//!
//! Rhyme density works on the verse's word stream: every word's vowels are
//! appended to a single vowel sequence, so a match that starts inside one word
//! and ends in the next (a multisyllabic rhyme) is found naturally. For every
//! word, the longest vowel run ending at its last vowel that also ends at the
//! last vowel of one of the preceding `window` words is that word's rhyme
//! length; the density is the mean over words.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_punctuation, is_word, Verse};
use crate::phonetics::Lexicon;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("candidate/reference count mismatch: {candidates} vs {references}")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("BLEU needs at least one candidate/reference pair")]
    EmptyCorpus,
    #[error("rhyme window must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RhymeConfig {
    /// Number of preceding words searched for a rhyme partner.
    pub window: usize,
    /// Ignore partners spelled identically to the word itself.
    pub exclude_identical: bool,
}

impl Default for RhymeConfig {
    fn default() -> Self {
        RhymeConfig { window: 15, exclude_identical: true }
    }
}

impl RhymeConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.window == 0 {
            return Err(MetricsError::ZeroWindow);
        }
        Ok(())
    }
}

fn common_suffix_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count()
}

/// Length of the longest common suffix of the two words' vowel sequences.
/// Identical tokens never rhyme.
pub fn rhyme_length(w1: &str, w2: &str, lex: &Lexicon) -> usize {
    rhyme_length_with(w1, w2, lex, true)
}

pub fn rhyme_length_with(w1: &str, w2: &str, lex: &Lexicon, exclude_identical: bool) -> usize {
    if exclude_identical && w1 == w2 {
        return 0;
    }
    common_suffix_len(&lex.vowels_of(w1), &lex.vowels_of(w2))
}

/// Rhyme length of every word in the verse, in reading order. Punctuation
/// tokens are not words and are skipped.
pub fn word_rhyme_lengths(verse: &Verse, lex: &Lexicon, cfg: &RhymeConfig) -> Vec<usize> {
    let words: Vec<&str> = verse.tokens().filter(|t| is_word(t)).collect();
    stream_rhyme_lengths(&words, lex, cfg)
}

fn stream_rhyme_lengths(words: &[&str], lex: &Lexicon, cfg: &RhymeConfig) -> Vec<usize> {
    let window = cfg.window.max(1);
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut stream: Vec<u32> = Vec::new();
    // ends[j] = stream position of word j's last vowel, if it has any.
    let mut ends: Vec<Option<usize>> = Vec::with_capacity(words.len());
    // row[b] = length of the common run ending at the newest vowel and at b.
    let mut row: Vec<u32> = Vec::new();
    let mut out = Vec::with_capacity(words.len());

    for (i, word) in words.iter().enumerate() {
        let before = stream.len();
        for v in lex.vowels_of(word) {
            let next_id = ids.len() as u32;
            let id = *ids.entry(v).or_insert(next_id);
            let a = stream.len();
            let mut next = vec![0u32; a];
            for b in 0..a {
                if stream[b] == id {
                    next[b] = if b == 0 { 1 } else { row[b - 1] + 1 };
                }
            }
            stream.push(id);
            row = next;
        }
        let here = (stream.len() > before).then(|| stream.len() - 1);
        let mut best = 0;
        if here.is_some() {
            for j in i.saturating_sub(window)..i {
                if cfg.exclude_identical && words[j] == *word {
                    continue;
                }
                if let Some(end) = ends[j] {
                    best = best.max(row[end] as usize);
                }
            }
        }
        ends.push(here);
        out.push(best);
    }
    out
}

/// Mean per-word rhyme length of the verse; 0 for a verse without words.
pub fn rhyme_density(verse: &Verse, lex: &Lexicon, cfg: &RhymeConfig) -> f64 {
    let lengths = word_rhyme_lengths(verse, lex, cfg);
    if lengths.is_empty() {
        return 0.0;
    }
    lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
}

fn content_set<'a, S: AsRef<str> + 'a>(tokens: impl IntoIterator<Item = &'a S>) -> HashSet<&'a str> {
    tokens
        .into_iter()
        .map(AsRef::as_ref)
        .filter(|t| !is_punctuation(t))
        .collect()
}

/// Fraction of `y`'s unique non-punctuation unigrams that also occur in `x`.
pub fn unigram_overlap<S: AsRef<str>, T: AsRef<str>>(x: &[S], y: &[T]) -> f64 {
    let ys = content_set(y);
    if ys.is_empty() {
        return 0.0;
    }
    let xs = content_set(x);
    ys.iter().filter(|t| xs.contains(*t)).count() as f64 / ys.len() as f64
}

/// Average overlap of each line with the rest of the verse.
pub fn repetition_score(verse: &Verse) -> f64 {
    let n = verse.lines.len();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|i| {
            let rest: Vec<&str> = verse
                .lines
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, l)| l.tokens.iter().map(String::as_str))
                .collect();
            unigram_overlap(&rest, &verse.lines[i].tokens)
        })
        .sum();
    total / n as f64
}

/// A verse with its rhyme density, repetition score and their difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredVerse {
    pub verse: Verse,
    pub rd: f64,
    pub rep: f64,
    pub score: f64,
}

impl ScoredVerse {
    pub fn new(verse: Verse, lex: &Lexicon, cfg: &RhymeConfig) -> Self {
        let rd = rhyme_density(&verse, lex, cfg);
        let rep = repetition_score(&verse);
        ScoredVerse { verse, rd, rep, score: rd - rep }
    }
}

pub const BLEU_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    /// BLEU on a 0-100 scale.
    pub score: f64,
    pub precisions: [f64; BLEU_ORDER],
    pub matches: [usize; BLEU_ORDER],
    pub totals: [usize; BLEU_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    let toks: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    for gram in toks.windows(n) {
        *counts.entry(gram.to_vec()).or_insert(0) += 1;
    }
    counts
}

/// Corpus-level BLEU-4 with clipped n-gram counts pooled over all pairs and no
/// smoothing.
pub fn corpus_bleu<S: AsRef<str>, T: AsRef<str>>(
    candidates: &[Vec<S>],
    references: &[Vec<T>],
) -> Result<BleuScore, MetricsError> {
    if candidates.len() != references.len() {
        return Err(MetricsError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut matches = [0usize; BLEU_ORDER];
    let mut totals = [0usize; BLEU_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (cand, refr) in candidates.iter().zip(references) {
        hyp_len += cand.len();
        ref_len += refr.len();
        for n in 1..=BLEU_ORDER {
            let ref_counts = ngram_counts(refr, n);
            for (gram, count) in ngram_counts(cand, n) {
                matches[n - 1] += count.min(ref_counts.get(&gram).copied().unwrap_or(0));
                totals[n - 1] += count;
            }
        }
    }
    let mut precisions = [0.0; BLEU_ORDER];
    for n in 0..BLEU_ORDER {
        if totals[n] > 0 {
            precisions[n] = matches[n] as f64 / totals[n] as f64;
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let score = if precisions.contains(&0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / BLEU_ORDER as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuScore { score, precisions, matches, totals, brevity_penalty, hyp_len, ref_len })
}

/// BLEU of a single candidate verse against a single reference verse.
pub fn verse_bleu(candidate: &Verse, reference: &Verse) -> f64 {
    let c: Vec<&str> = candidate.tokens().collect();
    let r: Vec<&str> = reference.tokens().collect();
    corpus_bleu(&[c], &[r]).map(|b| b.score).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> Lexicon {
        Lexicon::parse(
            "YOU  Y UW1\nFOOD  F UW1 D\nBEGINNERS  B IH0 G IH1 N ER0 Z\nBAT  B AE1 T\nCAT  K AE1 T\n\
             PROPANE  P R OW1 P EY2 N\nNO  N OW1\nSHAME  SH EY1 M\nGAME  G EY1 M\n",
        )
        .unwrap()
    }

    fn verse(text: &str) -> Verse {
        Verse::from_text(text)
    }

    #[test]
    fn rhyme_length_examples() {
        let lex = lex();
        assert_eq!(rhyme_length("you", "beginners", &lex), 0);
        assert_eq!(rhyme_length("you", "food", &lex), 1);
        assert_eq!(rhyme_length("propane", "propane", &lex), 0);
        assert_eq!(rhyme_length_with("propane", "propane", &lex, false), 2);
        assert_eq!(rhyme_length("no shame", "no shame", &lex), 0);
    }

    #[test]
    fn density_examples() {
        let lex = lex();
        let cfg = RhymeConfig::default();
        assert_eq!(rhyme_density(&verse("bat"), &lex, &cfg), 0.0);
        assert_eq!(rhyme_density(&verse("bat cat"), &lex, &cfg), 0.5);
        assert_eq!(rhyme_density(&verse(""), &lex, &cfg), 0.0);
        // no/shame vs no/game: OW EY ... OW EY, so "game" matches two vowels back.
        assert_eq!(word_rhyme_lengths(&verse("no shame\nno game"), &lex, &cfg), [0, 0, 0, 2]);
    }

    #[test]
    fn density_ignores_punctuation_and_line_breaks() {
        let lex = lex();
        let cfg = RhymeConfig::default();
        let a = rhyme_density(&verse("no shame , no game ."), &lex, &cfg);
        let b = rhyme_density(&verse("no\nshame no\ngame"), &lex, &cfg);
        assert_eq!(a, b);
        assert_eq!(a, 0.5);
    }

    #[test]
    fn density_window_limits_partners() {
        let lex = lex();
        let narrow = RhymeConfig { window: 1, exclude_identical: true };
        assert_eq!(word_rhyme_lengths(&verse("bat no cat"), &lex, &narrow), [0, 0, 0]);
        assert_eq!(word_rhyme_lengths(&verse("bat no cat"), &lex, &RhymeConfig::default()), [0, 0, 1]);
        assert!(RhymeConfig { window: 0, exclude_identical: true }.validate().is_err());
    }

    #[test]
    fn identical_tokens_excluded_unless_disabled() {
        let lex = lex();
        let v = verse("bat bat");
        assert_eq!(rhyme_density(&v, &lex, &RhymeConfig::default()), 0.0);
        let cfg = RhymeConfig { window: 15, exclude_identical: false };
        assert_eq!(rhyme_density(&v, &lex, &cfg), 0.5);
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(unigram_overlap(&["a", "b"], &["a", "b"]), 1.0);
        assert!((unigram_overlap(&["a", "b", "c"], &["b", "c", "d"]) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(unigram_overlap::<&str, &str>(&["a"], &[]), 0.0);
        assert_eq!(unigram_overlap(&["a"], &["a", "?"]), 1.0);
        assert_eq!(unigram_overlap(&["a"], &["!"]), 0.0);
    }

    #[test]
    fn repetition_examples() {
        assert_eq!(repetition_score(&verse("a b\na b")), 1.0);
        assert_eq!(repetition_score(&verse("a b\nc d")), 0.0);
        assert_eq!(repetition_score(&verse("a b\nb c")), 0.5);
        assert_eq!(repetition_score(&verse("a b c")), 0.0);
        assert_eq!(repetition_score(&verse("")), 0.0);
    }

    #[test]
    fn scored_verse_difference() {
        let s = ScoredVerse::new(verse("bat cat\nbat"), &lex(), &RhymeConfig::default());
        assert_eq!(s.score, s.rd - s.rep);
    }

    fn split(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        let c = vec![split("the cat sat on the mat"), split("a b c d e")];
        assert!((corpus_bleu(&c, &c).unwrap().score - 100.0).abs() < 1e-9);
        let b = corpus_bleu(&[vec!["x"]], &[split("a b c d")]).unwrap();
        assert_eq!(b.score, 0.0);
    }

    #[test]
    fn bleu_clipping() {
        let cand = vec!["the"; 7];
        let refr = split("the cat is on the mat");
        let b = corpus_bleu(&[cand], &[refr]).unwrap();
        assert_eq!((b.matches[0], b.totals[0]), (2, 7));
        assert!((b.precisions[0] - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_brevity_penalty() {
        let b = corpus_bleu(&[split("a b c d")], &[split("a b c d e f g h")]).unwrap();
        assert!((b.brevity_penalty - (1.0f64 - 2.0).exp()).abs() < 1e-12);
        assert!((b.score - 100.0 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn bleu_errors() {
        let c = vec![split("a")];
        assert_eq!(
            corpus_bleu::<&str, &str>(&c, &[]).unwrap_err(),
            MetricsError::LengthMismatch { candidates: 1, references: 0 }
        );
        assert_eq!(corpus_bleu::<&str, &str>(&[], &[]).unwrap_err(), MetricsError::EmptyCorpus);
    }
}
