use std::fmt;
use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};
use verseforge::corpus::{self, Document, DocumentKind, Verse};
use verseforge::enhance::enhance_verse_report;
use verseforge::metrics::{repetition_score, rhyme_density, unigram_overlap, verse_bleu};
use verseforge::pipeline::{self, Pipeline, PipelineConfig, Report};
use verseforge::select::{self, build_index, DenseIndex, IndexedDoc, RetrievalIndex, WordVectors};
use verseforge::stripping::{StopWords, TrainingPair};
use verseforge::Lexicon;

#[derive(Debug)]
pub struct CliError {
    stage: Option<String>,
    message: String,
}

impl CliError {
    pub fn new(message: impl Into<String>) -> Self {
        CliError { stage: None, message: message.into() }
    }

    fn at(stage: &str, e: impl fmt::Display) -> Self {
        CliError { stage: Some(stage.into()), message: e.to_string() }
    }

    pub fn to_json(&self) -> String {
        match &self.stage {
            Some(stage) => json!({"error": self.message, "stage": stage}),
            None => json!({"error": self.message}),
        }
        .to_string()
    }
}

macro_rules! from_error {
    ($($t:ty),*) => {
        $( impl From<$t> for CliError {
            fn from(e: $t) -> Self { CliError::new(e.to_string()) }
        } )*
    };
}

from_error!(
    io::Error,
    serde_json::Error,
    corpus::CorpusError,
    verseforge::phonetics::LexiconError,
    verseforge::stripping::StripError,
    verseforge::enhance::EnhanceError,
    select::SelectError,
    pipeline::ConfigError
);

impl From<pipeline::PipelineError> for CliError {
    fn from(e: pipeline::PipelineError) -> Self {
        CliError::at(&e.stage.to_string(), e.message)
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Writes one JSON value per line to stdout.
fn emit<T: serde::Serialize>(records: impl IntoIterator<Item = T>) -> Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for r in records {
        serde_json::to_writer(&mut out, &r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn lexicon(cfg: &PipelineConfig) -> Result<Lexicon> {
    let path = cfg
        .lexicon_path
        .as_deref()
        .ok_or_else(|| CliError::new("a pronunciation lexicon is required (--lexicon or lexicon_path)"))?;
    Ok(Lexicon::load(path)?)
}

fn verses_of(docs: &[Document], min_lines: usize) -> Result<Vec<(String, Verse)>> {
    let mut out = Vec::new();
    for doc in docs {
        for (i, v) in corpus::split_verses(doc, min_lines)?.into_iter().enumerate() {
            out.push((format!("{}#{}", doc.id, i), v));
        }
    }
    Ok(out)
}

fn aligned(path: Option<&Path>, n: usize, what: &str) -> Result<Option<Vec<Verse>>> {
    let Some(path) = path else { return Ok(None) };
    let verses = corpus::load_verses(path)?;
    if verses.len() != n {
        return Err(CliError::new(format!("{what}: expected {n} blocks, found {}", verses.len())));
    }
    Ok(Some(verses))
}

pub fn corpus_stats(
    input: &Path,
    kind: DocumentKind,
    min_tokens: Option<usize>,
    max_tokens: Option<usize>,
    verses: Option<usize>,
) -> Result<()> {
    let mut docs = corpus::load_documents(input, kind)?;
    if min_tokens.is_some() || max_tokens.is_some() {
        docs = corpus::filter_by_length(docs, min_tokens.unwrap_or(0), max_tokens.unwrap_or(usize::MAX))?;
    }
    if let Some(min_lines) = verses {
        docs = verses_of(&docs, min_lines)?
            .into_iter()
            .map(|(id, v)| Document::new(id, DocumentKind::Lyrics, v.to_text()))
            .collect();
    }
    emit([corpus::corpus_stats(&docs)?])
}

pub fn corpus_split(input: &Path, min_lines: usize) -> Result<()> {
    let docs = corpus::load_lyrics(input)?;
    let records = verses_of(&docs, min_lines)?
        .into_iter()
        .map(|(id, v)| json!({"id": id, "lines": v.num_lines(), "text": v.to_flat()}));
    emit(records)
}

pub fn strip(input: &Path, kind: DocumentKind, cfg: PipelineConfig) -> Result<()> {
    cfg.noise_config().validate()?;
    let stripper = pipeline::make_stripper(&cfg)?;
    let docs = corpus::load_documents(input, kind)?;
    let stripped = stripper.strip_batch(&docs)?;
    emit(stripped.iter().map(|cw| {
        json!({"id": cw.provenance, "noise": cw.noise, "seed": cw.seed, "source": cw.to_flat()})
    }))
}

pub fn pair(input: &Path, min_lines: usize, cfg: PipelineConfig) -> Result<()> {
    cfg.noise_config().validate()?;
    let stripper = pipeline::make_stripper(&cfg)?;
    let docs = corpus::load_lyrics(input)?;
    let verses = verses_of(&docs, min_lines)?;
    let pairs = verses
        .par_iter()
        .map(|(id, v)| Ok(TrainingPair::new(&stripper.strip_lines(&v.lines, id)?, v)))
        .collect::<Result<Vec<_>>>()?;
    emit(pairs)
}

pub fn analyze(input: &Path, sources: Option<&Path>, references: Option<&Path>, cfg: PipelineConfig) -> Result<()> {
    cfg.rhyme.validate().map_err(|e| CliError::new(e.to_string()))?;
    let lex = lexicon(&cfg)?;
    let verses = corpus::load_verses(input)?;
    let sources = aligned(sources, verses.len(), "sources")?;
    let references = aligned(references, verses.len(), "references")?;
    let records: Vec<Value> = verses
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let tokens: Vec<&str> = v.tokens().collect();
            let overlap = sources.as_ref().map(|s| {
                let x: Vec<&str> = s[i].tokens().collect();
                unigram_overlap(&x, &tokens)
            });
            let bleu = references.as_ref().map(|r| verse_bleu(v, &r[i]));
            json!({
                "rd": rhyme_density(v, &lex, &cfg.rhyme),
                "rep": repetition_score(v),
                "overlap": overlap,
                "bleu": bleu,
            })
        })
        .collect();
    emit(records)
}

pub fn enhance(input: &Path, cfg: PipelineConfig) -> Result<()> {
    let lex = lexicon(&cfg)?;
    let enhance_cfg = pipeline::enhance_config(&cfg)?;
    enhance_cfg.validate()?;
    let predictor = pipeline::make_predictor(&cfg)?;
    let verses = corpus::load_verses(input)?;
    let records = verses
        .par_iter()
        .map(|v| {
            let out = enhance_verse_report(v, &predictor, &enhance_cfg, &lex).map_err(|e| CliError::at("enhance", e))?;
            Ok(json!({
                "text": out.verse.to_flat(),
                "rd_before": rhyme_density(v, &lex, &cfg.rhyme),
                "rd_after": rhyme_density(&out.verse, &lex, &cfg.rhyme),
                "replacements": out.replacements,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    emit(records)
}

pub fn rerank(hypotheses: &Path, cfg: PipelineConfig) -> Result<()> {
    let lex = lexicon(&cfg)?;
    let file = fs::File::open(hypotheses).map_err(|e| CliError::new(format!("{}: {e}", hypotheses.display())))?;
    let hyps = select::read_hypotheses(BufReader::new(file))?;
    let best = select::rerank(hyps, &lex, &cfg.rhyme)?;
    emit([json!({
        "rank": best.generator_rank,
        "text": best.verse().to_flat(),
        "rd": best.scored.rd,
        "rep": best.scored.rep,
        "score": best.scored.score,
    })])
}

pub fn index(
    input: &Path,
    kind: DocumentKind,
    dir: &Path,
    verses: Option<usize>,
    min_df: usize,
    cfg: PipelineConfig,
) -> Result<()> {
    let stopwords = match &cfg.stopwords_path {
        Some(p) => StopWords::load(p)?,
        None => StopWords::english(),
    };
    let docs = corpus::load_documents(input, kind)?;
    let indexed: Vec<IndexedDoc> = match verses {
        Some(min_lines) => verses_of(&docs, min_lines)?
            .iter()
            .map(|(id, v)| IndexedDoc::from_verse(id.clone(), v))
            .collect(),
        None => docs.iter().map(IndexedDoc::from).collect(),
    };
    let idx = build_index(indexed, &stopwords, min_df)?;
    idx.save(dir)?;
    emit([json!({"documents": idx.len(), "terms": idx.vocabulary.len(), "index_dir": dir})])
}

pub fn retrieve(dir: &Path, query: &Path, k: usize, vectors: Option<&Path>) -> Result<()> {
    let idx = RetrievalIndex::load(dir)?;
    let text = fs::read_to_string(query).map_err(|e| CliError::new(format!("{}: {e}", query.display())))?;
    let queries: Vec<(usize, Vec<String>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, corpus::tokenize(l).into_iter().flat_map(|l| l.tokens).collect()))
        .collect();
    let dense = match vectors {
        Some(p) => Some(DenseIndex::build(idx.documents.clone(), WordVectors::load(p)?)?),
        None => None,
    };
    let records: Vec<Value> = queries
        .par_iter()
        .map(|(line, tokens)| {
            let hits = match &dense {
                Some(d) => d.retrieve(tokens, k),
                None => idx.retrieve(tokens, k),
            };
            let hits: Vec<Value> = hits
                .iter()
                .map(|h| json!({"id": h.id, "similarity": h.similarity, "text": idx.documents[h.index].text}))
                .collect();
            json!({"query": line, "hits": hits})
        })
        .collect();
    emit(records)
}

pub fn pipeline(input: &Path, kind: DocumentKind, hypotheses: Option<&Path>, cfg: PipelineConfig) -> Result<()> {
    let docs = corpus::load_documents(input, kind).map_err(|e| CliError::at("load", e))?;
    let hyps = match hypotheses {
        Some(p) => {
            if docs.len() != 1 {
                return Err(CliError::at("load", format!("--hypotheses needs exactly one input document, found {}", docs.len())));
            }
            let file = fs::File::open(p).map_err(|e| CliError::at("load", format!("{}: {e}", p.display())))?;
            Some(select::read_hypotheses(BufReader::new(file)).map_err(|e| CliError::at("load", e))?)
        }
        None => None,
    };
    if docs.is_empty() {
        return Err(CliError::at("strip", "empty input"));
    }
    let pipe = Pipeline::from_config(cfg)?;
    let records = docs
        .par_iter()
        .map(|doc| {
            let out = pipe.run(doc, hyps.clone())?;
            Ok(json!({
                "id": doc.id,
                "content": out.content.to_flat(),
                "verse": out.verse.to_flat(),
                "selected_rank": out.selected_rank,
                "report": out.report,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    emit(records)
}

pub fn summary(input: &Path, label: &str, as_json: bool) -> Result<()> {
    let text = fs::read_to_string(input).map_err(|e| CliError::new(format!("{}: {e}", input.display())))?;
    let mut reports = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut v: Value = serde_json::from_str(line).map_err(|e| CliError::new(format!("line {}: {e}", i + 1)))?;
        let v = v.get_mut("report").map(Value::take).unwrap_or(v);
        let r: Report = serde_json::from_value(v).map_err(|e| CliError::new(format!("line {}: {e}", i + 1)))?;
        reports.push(r);
    }
    let summary = pipeline::serve_report(&reports).ok_or_else(|| CliError::new("no reports to summarize"))?;
    if as_json {
        emit([summary])
    } else {
        print!("{}", summary.render_table(label));
        Ok(())
    }
}
