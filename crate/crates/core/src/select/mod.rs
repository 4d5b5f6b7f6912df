//! Choosing among generator outputs, and nearest-neighbour retrieval baselines.

mod dense;
mod index;

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Verse;
use crate::metrics::{RhymeConfig, ScoredVerse};
use crate::phonetics::Lexicon;

pub use dense::{DenseIndex, WordVectors};
pub use index::{build_index, IndexedDoc, RetrievalIndex, Retrieved};

/// Beam size the reranker was designed around; batches of any size are accepted.
pub const DEFAULT_BATCH_SIZE: usize = 24;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("no hypotheses to rerank")]
    NoHypotheses,
    #[error("duplicate generator rank {0}")]
    DuplicateRank(usize),
    #[error("hypotheses line {line}: {reason}")]
    BadHypothesis { line: usize, reason: String },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("index file {file}, line {line}: {reason}")]
    BadIndex { file: String, line: usize, reason: String },
    #[error("word vectors line {line}: {reason}")]
    BadVectors { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One line of a hypothesis batch file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub rank: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub generator_rank: usize,
    pub scored: ScoredVerse,
}

impl Hypothesis {
    pub fn new(generator_rank: usize, verse: Verse, lex: &Lexicon, cfg: &RhymeConfig) -> Self {
        Hypothesis { generator_rank, scored: ScoredVerse::new(verse, lex, cfg) }
    }

    pub fn verse(&self) -> &Verse {
        &self.scored.verse
    }
}

/// Reads `{"rank": int, "text": str}` JSON lines; blank lines are skipped.
pub fn read_hypotheses(reader: impl BufRead) -> Result<Vec<(usize, Verse)>, SelectError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let bad = |reason: String| SelectError::BadHypothesis { line: idx + 1, reason };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: HypothesisRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        out.push((rec.rank, Verse::from_flat(&rec.text)));
    }
    Ok(out)
}

/// Picks the hypothesis with the highest `rd - rep`, preferring the lower
/// generator rank on ties.
pub fn select_best(hyps: &[Hypothesis]) -> Result<&Hypothesis, SelectError> {
    let mut seen = HashSet::new();
    for h in hyps {
        if !seen.insert(h.generator_rank) {
            return Err(SelectError::DuplicateRank(h.generator_rank));
        }
    }
    hyps.iter()
        .reduce(|best, h| {
            let better = h.scored.score > best.scored.score
                || (h.scored.score == best.scored.score && h.generator_rank < best.generator_rank);
            if better { h } else { best }
        })
        .ok_or(SelectError::NoHypotheses)
}

/// Scores every `(rank, verse)` hypothesis and returns the best one.
pub fn rerank(
    hyps: Vec<(usize, Verse)>,
    lex: &Lexicon,
    cfg: &RhymeConfig,
) -> Result<Hypothesis, SelectError> {
    let scored: Vec<Hypothesis> = hyps
        .into_iter()
        .map(|(rank, verse)| Hypothesis::new(rank, verse, lex, cfg))
        .collect();
    select_best(&scored).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ScoredVerse;

    fn fake(rank: usize, rd: f64, rep: f64) -> Hypothesis {
        Hypothesis {
            generator_rank: rank,
            scored: ScoredVerse { verse: Verse::from_text("x"), rd, rep, score: rd - rep },
        }
    }

    #[test]
    fn single_hypothesis() {
        let lex = Lexicon::empty();
        let best = rerank(vec![(3, Verse::from_text("a b"))], &lex, &RhymeConfig::default()).unwrap();
        assert_eq!(best.generator_rank, 3);
    }

    #[test]
    fn arithmetic_winner() {
        let hyps = [fake(0, 1.0, 0.2), fake(1, 0.9, 0.0)];
        assert_eq!(select_best(&hyps).unwrap().generator_rank, 1);
    }

    #[test]
    fn ties_prefer_lower_rank() {
        let lex = Lexicon::empty();
        let v = Verse::from_text("same words\nhere");
        let best = rerank(vec![(5, v.clone()), (2, v.clone()), (9, v)], &lex, &RhymeConfig::default()).unwrap();
        assert_eq!(best.generator_rank, 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(rerank(vec![], &Lexicon::empty(), &RhymeConfig::default()), Err(SelectError::NoHypotheses)));
        let hyps = [fake(1, 0.0, 0.0), fake(1, 1.0, 0.0)];
        assert!(matches!(select_best(&hyps), Err(SelectError::DuplicateRank(1))));
    }

    #[test]
    fn parses_batch() {
        let input = "{\"rank\": 0, \"text\": \"a b <nl> c d\"}\n\n{\"rank\": 1, \"text\": \"e\"}\n";
        let hyps = read_hypotheses(input.as_bytes()).unwrap();
        assert_eq!(hyps.len(), 2);
        assert_eq!(hyps[0].1.num_lines(), 2);
        let err = read_hypotheses("{\"rank\": \"x\"}".as_bytes()).unwrap_err();
        assert!(matches!(err, SelectError::BadHypothesis { line: 1, .. }));
    }
}
