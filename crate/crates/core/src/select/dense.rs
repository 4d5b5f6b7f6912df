//! Retrieval over averaged pretrained word vectors.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{IndexedDoc, Retrieved, SelectError};

/// Word embeddings from a text file with lines `word v1 v2 ... vd`.
#[derive(Debug, Clone, Default)]
pub struct WordVectors {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn parse(text: &str) -> Result<Self, SelectError> {
        let mut wv = WordVectors::default();
        for (i, line) in text.lines().enumerate() {
            let bad = |reason: String| SelectError::BadVectors { line: i + 1, reason };
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values = fields
                .map(|f| f.parse::<f64>().map_err(|e| bad(format!("`{f}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if values.is_empty() {
                return Err(bad(format!("no values for `{word}`")));
            }
            if wv.dim == 0 {
                wv.dim = values.len();
            } else if values.len() != wv.dim {
                return Err(bad(format!("expected {} values, got {}", wv.dim, values.len())));
            }
            wv.vectors.entry(word.to_lowercase()).or_insert(values);
        }
        Ok(wv)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SelectError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| SelectError::Io { path: path.display().to_string(), source })?;
        WordVectors::parse(&text)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Mean of the known tokens' vectors, L2-normalized; all zeros if none are known.
    pub fn embed<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim];
        for v in tokens.iter().filter_map(|t| self.vectors.get(t.as_ref())) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
        // averaging is a positive rescale, normalization absorbs it
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            sum.iter_mut().for_each(|x| *x /= norm);
        }
        sum
    }
}

#[derive(Debug, Clone)]
pub struct DenseIndex {
    pub documents: Vec<IndexedDoc>,
    embeddings: Vec<Vec<f64>>,
    vectors: WordVectors,
}

impl DenseIndex {
    pub fn build(docs: Vec<IndexedDoc>, vectors: WordVectors) -> Result<Self, SelectError> {
        if docs.is_empty() {
            return Err(SelectError::EmptyCorpus);
        }
        let embeddings = docs.iter().map(|d| vectors.embed(&d.tokens)).collect();
        Ok(DenseIndex { documents: docs, embeddings, vectors })
    }

    pub fn retrieve<S: AsRef<str>>(&self, query: &[S], k: usize) -> Vec<Retrieved> {
        let q = self.vectors.embed(query);
        let mut scored: Vec<Retrieved> = self
            .embeddings
            .iter()
            .enumerate()
            .map(|(i, e)| Retrieved {
                index: i,
                id: self.documents[i].id.clone(),
                similarity: q.iter().zip(e).map(|(a, b)| a * b).sum(),
            })
            .collect();
        scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(a.index.cmp(&b.index)));
        scored.truncate(k);
        scored
    }
}
