//! TF-IDF retrieval index.
//!
//! Term weight is `tf * ln(N / df)`; document vectors are L2-normalized, so a
//! dot product is the cosine similarity. Stopwords and punctuation are not
//! indexed.
//!
//! On disk an index is a directory holding
//! - `vocab.tsv`: `term<TAB>dim<TAB>df`, one term per line, in dimension order;
//! - `vectors.tsv`: `doc_id<TAB>dim:weight dim:weight ...`, one document per line;
//! - `documents.jsonl`: `{"id": ..., "text": ...}` per document (optional on load).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SelectError;
use crate::corpus::{is_punctuation, tokenize, Document, Verse};
use crate::stripping::StopWords;

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const VECTORS_FILE: &str = "vectors.tsv";
pub const DOCUMENTS_FILE: &str = "documents.jsonl";

/// A document as seen by the index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedDoc {
    pub id: String,
    pub text: String,
    #[serde(skip)]
    pub tokens: Vec<String>,
}

impl From<&Document> for IndexedDoc {
    fn from(d: &Document) -> Self {
        IndexedDoc { id: d.id.clone(), text: d.raw.clone(), tokens: d.tokens().map(String::from).collect() }
    }
}

impl IndexedDoc {
    pub fn from_verse(id: impl Into<String>, v: &Verse) -> Self {
        IndexedDoc { id: id.into(), text: v.to_text(), tokens: v.tokens().map(String::from).collect() }
    }
}

pub type SparseVec = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    pub documents: Vec<IndexedDoc>,
    pub vectors: Vec<SparseVec>,
    /// term -> (dimension, document frequency)
    pub vocabulary: BTreeMap<String, (u32, usize)>,
    pub n_docs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Retrieved {
    pub index: usize,
    pub id: String,
    pub similarity: f64,
}

fn normalize(mut v: SparseVec) -> SparseVec {
    let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Vec::new();
    }
    v.retain(|(_, w)| *w != 0.0);
    for (_, w) in &mut v {
        *w /= norm;
    }
    v
}

fn dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                sum += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

/// Builds the index; terms occurring in fewer than `min_df` documents are dropped.
pub fn build_index(
    docs: Vec<IndexedDoc>,
    stopwords: &StopWords,
    min_df: usize,
) -> Result<RetrievalIndex, SelectError> {
    if docs.is_empty() {
        return Err(SelectError::EmptyCorpus);
    }
    let indexable = |t: &str| !is_punctuation(t) && !stopwords.contains(t);
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for d in &docs {
        let mut seen: Vec<&str> = d.tokens.iter().map(String::as_str).filter(|t| indexable(t)).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t.to_string()).or_insert(0) += 1;
        }
    }
    let vocabulary: BTreeMap<String, (u32, usize)> = df
        .into_iter()
        .filter(|(_, n)| *n >= min_df.max(1))
        .enumerate()
        .map(|(dim, (term, n))| (term, (dim as u32, n)))
        .collect();
    let mut index = RetrievalIndex { documents: Vec::new(), vectors: Vec::new(), vocabulary, n_docs: docs.len() };
    index.vectors = docs.iter().map(|d| index.vectorize(&d.tokens)).collect();
    index.documents = docs;
    Ok(index)
}

impl RetrievalIndex {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        let n = self.n_docs as f64;
        self.vocabulary.get(term).map(|&(_, df)| (n / df as f64).ln())
    }

    /// L2-normalized TF-IDF vector of `tokens`; unknown terms are ignored.
    pub fn vectorize<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVec {
        let n = self.n_docs as f64;
        let mut tf: HashMap<u32, (usize, usize)> = HashMap::new();
        for t in tokens {
            if let Some(&(dim, df)) = self.vocabulary.get(t.as_ref()) {
                tf.entry(dim).or_insert((0, df)).0 += 1;
            }
        }
        let mut v: SparseVec = tf
            .into_iter()
            .map(|(dim, (count, df))| (dim, count as f64 * (n / df as f64).ln()))
            .collect();
        v.sort_by_key(|(d, _)| *d);
        normalize(v)
    }

    /// Top `k` documents by cosine similarity; ties keep insertion order.
    pub fn retrieve<S: AsRef<str>>(&self, query: &[S], k: usize) -> Vec<Retrieved> {
        let q = self.vectorize(query);
        let mut scored: Vec<Retrieved> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| Retrieved { index: i, id: self.documents[i].id.clone(), similarity: dot(&q, v) })
            .collect();
        scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(a.index.cmp(&b.index)));
        scored.truncate(k);
        scored
    }

    pub fn save(&self, dir: &Path) -> Result<(), SelectError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| SelectError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;

        let mut by_dim: Vec<(&String, &(u32, usize))> = self.vocabulary.iter().collect();
        by_dim.sort_by_key(|(_, (dim, _))| *dim);
        let mut vocab = String::new();
        for (term, (dim, df)) in by_dim {
            writeln!(vocab, "{term}\t{dim}\t{df}").unwrap();
        }
        let path = dir.join(VOCAB_FILE);
        fs::write(&path, vocab).map_err(io(&path))?;

        let mut vectors = String::new();
        let mut documents = String::new();
        for (doc, vec) in self.documents.iter().zip(&self.vectors) {
            let pairs: Vec<String> = vec.iter().map(|(d, w)| format!("{d}:{w}")).collect();
            writeln!(vectors, "{}\t{}", doc.id.replace(['\t', '\n'], " "), pairs.join(" ")).unwrap();
            documents.push_str(&serde_json::to_string(doc).expect("serializable"));
            documents.push('\n');
        }
        let path = dir.join(VECTORS_FILE);
        fs::write(&path, vectors).map_err(io(&path))?;
        let path = dir.join(DOCUMENTS_FILE);
        fs::write(&path, documents).map_err(io(&path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, SelectError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|source| SelectError::Io { path: path.display().to_string(), source })
        };
        let bad = |file: &str, line: usize, reason: String| SelectError::BadIndex { file: file.into(), line, reason };

        let mut vocabulary = BTreeMap::new();
        for (i, line) in read(VOCAB_FILE)?.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            let [term, dim, df] = f[..] else {
                return Err(bad(VOCAB_FILE, i + 1, "expected 3 tab-separated fields".into()));
            };
            let dim: u32 = dim.parse().map_err(|e| bad(VOCAB_FILE, i + 1, format!("dim: {e}")))?;
            let df: usize = df.parse().map_err(|e| bad(VOCAB_FILE, i + 1, format!("df: {e}")))?;
            vocabulary.insert(term.to_string(), (dim, df));
        }

        let mut ids = Vec::new();
        let mut vectors = Vec::new();
        for (i, line) in read(VECTORS_FILE)?.lines().enumerate() {
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| bad(VECTORS_FILE, i + 1, "missing tab after document id".into()))?;
            let mut v = SparseVec::new();
            for pair in rest.split_whitespace() {
                let parsed = pair
                    .split_once(':')
                    .and_then(|(d, w)| Some((d.parse::<u32>().ok()?, w.parse::<f64>().ok()?)));
                v.push(parsed.ok_or_else(|| bad(VECTORS_FILE, i + 1, format!("bad pair `{pair}`")))?);
            }
            ids.push(id.to_string());
            vectors.push(v);
        }

        let documents = match read(DOCUMENTS_FILE) {
            Ok(text) => {
                let mut docs = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let mut d: IndexedDoc =
                        serde_json::from_str(line).map_err(|e| bad(DOCUMENTS_FILE, i + 1, e.to_string()))?;
                    if ids.get(i) != Some(&d.id) {
                        return Err(bad(DOCUMENTS_FILE, i + 1, format!("id `{}` does not match vectors", d.id)));
                    }
                    d.tokens = tokenize(&d.text).into_iter().flat_map(|l| l.tokens).collect();
                    docs.push(d);
                }
                if docs.len() != ids.len() {
                    return Err(bad(DOCUMENTS_FILE, docs.len(), "document count differs from vectors".into()));
                }
                docs
            }
            Err(_) => ids
                .into_iter()
                .map(|id| IndexedDoc { id, text: String::new(), tokens: Vec::new() })
                .collect(),
        };
        Ok(RetrievalIndex { n_docs: vectors.len(), documents, vectors, vocabulary })
    }
}
