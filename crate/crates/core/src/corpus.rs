//! Corpus ingestion: tokenization, verse segmentation, length filtering and
//! dataset statistics.
//!
//! Every downstream stage works on lowercase tokens. Punctuation characters at
//! the edges of a whitespace-delimited chunk are split off into their own
//! single-character tokens, while interior punctuation (apostrophes, hyphens,
//! digit separators) stays inside the token.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters detached from token edges.
///
/// `<` and `>` are included so that the flat line separator `<nl>` can never
/// be produced by tokenizing ordinary text.
pub const EDGE_PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')', '[', ']', '<', '>'];

/// Line separator used in every flat (single-string) serialization of a verse.
pub const LINE_BREAK: &str = "<nl>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("document `{id}` is {kind}, expected lyrics")]
    NotLyrics { id: String, kind: DocumentKind },
    #[error("invalid length bounds: min {min} > max {max}")]
    InvalidBounds { min: usize, max: usize },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentKind {
    Lyrics,
    News,
    Movies,
}

impl fmt::Display for DocumentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DocumentKind::Lyrics => "lyrics",
            DocumentKind::News => "news",
            DocumentKind::Movies => "movies",
        })
    }
}

impl std::str::FromStr for DocumentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lyrics" => Ok(DocumentKind::Lyrics),
            "news" => Ok(DocumentKind::News),
            "movies" => Ok(DocumentKind::Movies),
            other => Err(format!("unknown document kind `{other}`")),
        }
    }
}

/// One tokenized line (a sentence, for prose).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Line {
    pub tokens: Vec<String>,
}

impl Line {
    pub fn new(tokens: Vec<String>) -> Self {
        Line { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of the last token that is a word rather than punctuation.
    pub fn last_word_index(&self) -> Option<usize> {
        self.tokens.iter().rposition(|t| is_word(t))
    }

    pub fn last_word(&self) -> Option<&str> {
        self.last_word_index().map(|i| self.tokens[i].as_str())
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

impl<S: Into<String>> FromIterator<S> for Line {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Line::new(iter.into_iter().map(Into::into).collect())
    }
}

/// A contiguous block of lyric lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verse {
    pub lines: Vec<Line>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_doc: Option<String>,
}

impl Verse {
    pub fn new(lines: Vec<Line>) -> Self {
        Verse { lines, source_doc: None }
    }

    /// Tokenizes `text` (newline-separated lines) into a verse.
    pub fn from_text(text: &str) -> Self {
        Verse::new(tokenize(text))
    }

    /// Parses a flat serialization that uses `<nl>` between lines.
    pub fn from_flat(text: &str) -> Self {
        Verse::from_text(&text.replace(LINE_BREAK, "\n"))
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// All tokens in reading order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flat_map(|l| l.tokens.iter().map(String::as_str))
    }

    pub fn num_tokens(&self) -> usize {
        self.lines.iter().map(Line::len).sum()
    }

    /// Lines joined by ` <nl> `.
    pub fn to_flat(&self) -> String {
        self.lines
            .iter()
            .map(Line::text)
            .collect::<Vec<_>>()
            .join(&format!(" {LINE_BREAK} "))
    }

    /// Lines joined by newlines.
    pub fn to_text(&self) -> String {
        self.lines.iter().map(Line::text).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub kind: DocumentKind,
    pub lines: Vec<Line>,
    pub raw: String,
}

impl Document {
    /// Builds a document whose lines are the newline-separated lines of `raw`.
    pub fn new(id: impl Into<String>, kind: DocumentKind, raw: impl Into<String>) -> Self {
        let raw = raw.into();
        Document { id: id.into(), kind, lines: tokenize(&raw), raw }
    }

    /// Builds a prose document, where a line is a sentence: the token stream is
    /// cut after every `.`, `!` or `?` token and at newlines.
    pub fn prose(id: impl Into<String>, kind: DocumentKind, raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let lines = split_sentences(tokenize(&raw));
        Document { id: id.into(), kind, lines, raw }
    }

    pub fn num_tokens(&self) -> usize {
        self.lines.iter().map(Line::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flat_map(|l| l.tokens.iter().map(String::as_str))
    }
}

/// True when the token has at least one alphanumeric character.
pub fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}

pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && !is_word(token)
}

/// Splits `text` into lowercase token lines. Blank lines produce no output.
pub fn tokenize(text: &str) -> Vec<Line> {
    text.lines()
        .map(tokenize_line)
        .filter(|l| !l.is_empty())
        .collect()
}

fn tokenize_line(line: &str) -> Line {
    let lower = line.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lower.split_whitespace() {
        let start = chunk.trim_start_matches(EDGE_PUNCTUATION);
        let leading = &chunk[..chunk.len() - start.len()];
        let core = start.trim_end_matches(EDGE_PUNCTUATION);
        let trailing = &start[core.len()..];
        tokens.extend(leading.chars().map(String::from));
        if !core.is_empty() {
            tokens.push(core.to_string());
        }
        tokens.extend(trailing.chars().map(String::from));
    }
    Line::new(tokens)
}

fn split_sentences(lines: Vec<Line>) -> Vec<Line> {
    let mut out = Vec::new();
    for line in lines {
        let mut current = Vec::new();
        for tok in line.tokens {
            let terminal = matches!(tok.as_str(), "." | "!" | "?");
            current.push(tok);
            if terminal {
                out.push(Line::new(std::mem::take(&mut current)));
            }
        }
        if !current.is_empty() {
            out.push(Line::new(current));
        }
    }
    out
}

/// Groups consecutive non-blank lines of a lyric into verses, dropping verses
/// with fewer than `min_lines` lines.
pub fn split_verses(lyric: &Document, min_lines: usize) -> Result<Vec<Verse>, CorpusError> {
    if lyric.kind != DocumentKind::Lyrics {
        return Err(CorpusError::NotLyrics { id: lyric.id.clone(), kind: lyric.kind });
    }
    let mut verses = Vec::new();
    let mut block: Vec<Line> = Vec::new();
    let mut flush = |block: &mut Vec<Line>| {
        if !block.is_empty() && block.len() >= min_lines {
            verses.push(Verse { lines: std::mem::take(block), source_doc: Some(lyric.id.clone()) });
        }
        block.clear();
    };
    for raw_line in lyric.raw.lines() {
        if raw_line.trim().is_empty() {
            flush(&mut block);
        } else {
            block.push(tokenize_line(raw_line));
        }
    }
    flush(&mut block);
    Ok(verses)
}

/// Keeps documents whose token count lies in `[min_tok, max_tok]`.
pub fn filter_by_length(
    docs: Vec<Document>,
    min_tok: usize,
    max_tok: usize,
) -> Result<Vec<Document>, CorpusError> {
    if min_tok > max_tok {
        return Err(CorpusError::InvalidBounds { min: min_tok, max: max_tok });
    }
    Ok(docs
        .into_iter()
        .filter(|d| (min_tok..=max_tok).contains(&d.num_tokens()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population mean and standard deviation. Returns `None` for no samples.
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prec = f.precision().unwrap_or(2);
        write!(f, "{:.prec$} ± {:.prec$}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub sentences_per_doc: MeanStd,
    pub tokens_per_doc: MeanStd,
    /// Pooled over every sentence of every document.
    pub tokens_per_sentence: MeanStd,
}

pub fn corpus_stats(docs: &[Document]) -> Result<CorpusStats, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let sentences: Vec<f64> = docs.iter().map(|d| d.lines.len() as f64).collect();
    let tokens: Vec<f64> = docs.iter().map(|d| d.num_tokens() as f64).collect();
    let per_sentence: Vec<f64> = docs
        .iter()
        .flat_map(|d| d.lines.iter().map(|l| l.len() as f64))
        .collect();
    let zero = MeanStd { mean: 0.0, std: 0.0 };
    Ok(CorpusStats {
        n_docs: docs.len(),
        sentences_per_doc: MeanStd::of(&sentences).unwrap_or(zero),
        tokens_per_doc: MeanStd::of(&tokens).unwrap_or(zero),
        tokens_per_sentence: MeanStd::of(&per_sentence).unwrap_or(zero),
    })
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Expands a path into its files: the path itself, or the sorted regular files
/// of a directory.
pub fn list_files(path: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    if path.is_dir() {
        let mut files = Vec::new();
        for entry in fs::read_dir(path).map_err(io_err)? {
            let p = entry.map_err(io_err)?.path();
            if p.is_file() {
                files.push(p);
            }
        }
        files.sort();
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn file_id(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads lyrics: one song per file, `path` being a file or a directory.
pub fn load_lyrics(path: &Path) -> Result<Vec<Document>, CorpusError> {
    list_files(path)?
        .into_iter()
        .map(|f| Ok(Document::new(file_id(&f), DocumentKind::Lyrics, read(&f)?)))
        .collect()
}

/// Loads prose. A directory holds one document per file; a single file holds
/// one document per non-blank line.
pub fn load_prose(path: &Path, kind: DocumentKind) -> Result<Vec<Document>, CorpusError> {
    if path.is_dir() {
        return list_files(path)?
            .into_iter()
            .map(|f| Ok(Document::prose(file_id(&f), kind, read(&f)?.replace('\n', " "))))
            .collect();
    }
    let stem = file_id(path);
    Ok(read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| Document::prose(format!("{stem}:{}", i + 1), kind, l))
        .collect())
}

/// Loads documents of any kind: lyrics via [`load_lyrics`], prose via [`load_prose`].
pub fn load_documents(path: &Path, kind: DocumentKind) -> Result<Vec<Document>, CorpusError> {
    match kind {
        DocumentKind::Lyrics => load_lyrics(path),
        _ => load_prose(path, kind),
    }
}

/// Reads a file of verses separated by blank lines, with no minimum length.
pub fn load_verses(path: &Path) -> Result<Vec<Verse>, CorpusError> {
    let text = read(path)?;
    let doc = Document::new(file_id(path), DocumentKind::Lyrics, text);
    split_verses(&doc, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(line: &Line) -> Vec<&str> {
        line.tokens.iter().map(String::as_str).collect()
    }

    fn block(n: usize, tag: &str) -> String {
        (0..n).map(|i| format!("{tag} line {i}")).collect::<Vec<_>>().join("\n")
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("\n  \n").is_empty());
    }

    #[test]
    fn tokenize_detaches_punctuation() {
        let lines = tokenize("Where were you?");
        assert_eq!(lines.len(), 1);
        assert_eq!(toks(&lines[0]), ["where", "were", "you", "?"]);
    }

    #[test]
    fn tokenize_keeps_apostrophes() {
        let lines = tokenize("can't claim no fame");
        assert_eq!(toks(&lines[0]), ["can't", "claim", "no", "fame"]);
    }

    #[test]
    fn tokenize_edge_runs_and_interior() {
        let lines = tokenize("(\"Hello,\" she said...) luc-up! 1,000 <nl>");
        assert_eq!(
            toks(&lines[0]),
            ["(", "\"", "hello", ",", "\"", "she", "said", ".", ".", ".", ")", "luc-up", "!", "1,000", "<", "nl", ">"]
        );
    }

    #[test]
    fn prose_sentences() {
        let d = Document::prose("n", DocumentKind::News, "Man lay in woods. Mom told police! Found friday");
        assert_eq!(d.lines.len(), 3);
        assert_eq!(toks(&d.lines[1]), ["mom", "told", "police", "!"]);
    }

    #[test]
    fn split_single_block() {
        let doc = Document::new("s", DocumentKind::Lyrics, block(8, "a"));
        let v = split_verses(&doc, 4).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].num_lines(), 8);
        assert_eq!(v[0].source_doc.as_deref(), Some("s"));
    }

    #[test]
    fn split_drops_short_blocks() {
        let raw = format!("{}\n\n{}\n\n\n{}\n", block(8, "a"), block(3, "b"), block(5, "c"));
        let doc = Document::new("s", DocumentKind::Lyrics, raw);
        let sizes: Vec<_> = split_verses(&doc, 4).unwrap().iter().map(Verse::num_lines).collect();
        assert_eq!(sizes, [8, 5]);

        let raw = format!("{}\n\n{}", block(3, "a"), block(2, "b"));
        let doc = Document::new("s", DocumentKind::Lyrics, raw);
        assert!(split_verses(&doc, 4).unwrap().is_empty());
    }

    #[test]
    fn split_whitespace_only_separator_and_blank_input() {
        let raw = format!("{}\n   \t\n{}", block(4, "a"), block(4, "b"));
        let doc = Document::new("s", DocumentKind::Lyrics, raw);
        assert_eq!(split_verses(&doc, 4).unwrap().len(), 2);
        let doc = Document::new("s", DocumentKind::Lyrics, "\n\n \n");
        assert!(split_verses(&doc, 4).unwrap().is_empty());
    }

    #[test]
    fn split_rejects_prose() {
        let doc = Document::new("n", DocumentKind::News, "x");
        assert!(matches!(split_verses(&doc, 4), Err(CorpusError::NotLyrics { .. })));
    }

    fn doc_with_tokens(n: usize) -> Document {
        let raw = (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        Document::prose("m", DocumentKind::Movies, raw)
    }

    #[test]
    fn length_filter_inclusive() {
        let docs = vec![doc_with_tokens(90), doc_with_tokens(141), doc_with_tokens(40), doc_with_tokens(39)];
        let kept: Vec<_> = filter_by_length(docs, 40, 140).unwrap().iter().map(Document::num_tokens).collect();
        assert_eq!(kept, [90, 40]);
        assert!(filter_by_length(vec![], 5, 4).is_err());
    }

    #[test]
    fn stats_hand_computed() {
        let a = Document::new("a", DocumentKind::Lyrics, "x\ny");
        let b = Document::new("b", DocumentKind::Lyrics, "x\ny\nz\nw");
        let s = corpus_stats(&[a, b]).unwrap();
        assert_eq!(s.n_docs, 2);
        assert_eq!(s.sentences_per_doc, MeanStd { mean: 3.0, std: 1.0 });

        let one = Document::new("c", DocumentKind::News, "a b c d e\nf g h i j");
        let s = corpus_stats(&[one]).unwrap();
        assert_eq!(s.tokens_per_doc, MeanStd { mean: 10.0, std: 0.0 });
        assert_eq!(s.tokens_per_sentence, MeanStd { mean: 5.0, std: 0.0 });
    }

    #[test]
    fn stats_empty_corpus() {
        let err = corpus_stats(&[]).unwrap_err();
        assert_eq!(err.to_string(), "empty corpus");
    }

    #[test]
    fn flat_round_trip() {
        let v = Verse::from_text("where were you?\nno beginners");
        assert_eq!(v.to_flat(), "where were you ? <nl> no beginners");
        assert_eq!(Verse::from_flat(&v.to_flat()), v);
    }
}
