//! End-to-end orchestration: strip, noise, select, enhance, report.
//!
//! Configuration is a JSON object. Every key is optional in the file; command
//! line values override file values and missing values take the defaults
//! below.
//!
//! ```json
//! {
//!   "lexicon_path": "cmudict.dict",
//!   "stopwords_path": "stopwords.txt",
//!   "synonyms_path": null,
//!   "deny_path": null,
//!   "noise": "shuffle",
//!   "seed": 0,
//!   "drop_rate": 0.2,
//!   "synonym_rate": 0.2,
//!   "rhyme": {"window": 15, "exclude_identical": true},
//!   "enhance": {"k": 200, "mode": "first", "exclude_identical": true, "enabled": true},
//!   "predictor": "corpus",
//!   "predictor_corpus": "lyrics/",
//!   "endpoint": null
//! }
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Document, MeanStd, Verse};
use crate::enhance::{
    enhance_verse_report, load_deny_list, CorpusPredictor, EnhanceConfig, EnhanceMode, MaskedPredictor,
    RemotePredictor,
};
use crate::metrics::{repetition_score, rhyme_density, unigram_overlap, RhymeConfig};
use crate::phonetics::Lexicon;
use crate::select::rerank;
use crate::stripping::{ContentWords, NoiseConfig, NoiseKind, StopWords, StripError, Stripper, SynonymLexicon};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("{0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    #[default]
    Corpus,
    Remote,
}

impl std::str::FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corpus" => Ok(PredictorKind::Corpus),
            "remote" => Ok(PredictorKind::Remote),
            other => Err(format!("unknown predictor `{other}` (expected corpus or remote)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhymeOverrides {
    pub window: Option<usize>,
    pub exclude_identical: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnhanceOverrides {
    pub k: Option<usize>,
    pub mode: Option<EnhanceMode>,
    pub exclude_identical: Option<bool>,
    pub enabled: Option<bool>,
}

/// The configuration file as written, every field optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub lexicon_path: Option<PathBuf>,
    pub stopwords_path: Option<PathBuf>,
    pub synonyms_path: Option<PathBuf>,
    pub deny_path: Option<PathBuf>,
    pub noise: Option<NoiseKind>,
    pub seed: Option<u64>,
    pub drop_rate: Option<f64>,
    pub synonym_rate: Option<f64>,
    pub rhyme: Option<RhymeOverrides>,
    pub enhance: Option<EnhanceOverrides>,
    pub predictor: Option<PredictorKind>,
    pub predictor_corpus: Option<PathBuf>,
    pub endpoint: Option<String>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::Invalid { key, message: e.into_inner().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        ConfigFile::parse(&text)
    }

    /// Values set in `top` replace values in `self`.
    pub fn overlay(mut self, top: ConfigFile) -> ConfigFile {
        overlay!(
            self, top, lexicon_path, stopwords_path, synonyms_path, deny_path, noise, seed, drop_rate,
            synonym_rate, predictor, predictor_corpus, endpoint
        );
        if let Some(r) = top.rhyme {
            let mut base = self.rhyme.unwrap_or_default();
            overlay!(base, r, window, exclude_identical);
            self.rhyme = Some(base);
        }
        if let Some(e) = top.enhance {
            let mut base = self.enhance.unwrap_or_default();
            overlay!(base, e, k, mode, exclude_identical, enabled);
            self.enhance = Some(base);
        }
        self
    }

    pub fn resolve(self) -> Result<PipelineConfig, ConfigError> {
        let cfg = self.with_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills in defaults without validating; subcommands that need only part
    /// of the configuration check what they use.
    pub fn with_defaults(self) -> PipelineConfig {
        let defaults = PipelineConfig::default();
        let rhyme = self.rhyme.unwrap_or_default();
        let enhance = self.enhance.unwrap_or_default();
        PipelineConfig {
            lexicon_path: self.lexicon_path,
            stopwords_path: self.stopwords_path,
            synonyms_path: self.synonyms_path,
            deny_path: self.deny_path,
            noise: self.noise.unwrap_or(defaults.noise),
            seed: self.seed.unwrap_or(defaults.seed),
            drop_rate: self.drop_rate.unwrap_or(defaults.drop_rate),
            synonym_rate: self.synonym_rate.unwrap_or(defaults.synonym_rate),
            rhyme: RhymeConfig {
                window: rhyme.window.unwrap_or(defaults.rhyme.window),
                exclude_identical: rhyme.exclude_identical.unwrap_or(defaults.rhyme.exclude_identical),
            },
            k: enhance.k.unwrap_or(defaults.k),
            mode: enhance.mode.unwrap_or(defaults.mode),
            enhance_exclude_identical: enhance.exclude_identical.unwrap_or(defaults.enhance_exclude_identical),
            enhance_enabled: enhance.enabled.unwrap_or(defaults.enhance_enabled),
            predictor: self.predictor.unwrap_or(defaults.predictor),
            predictor_corpus: self.predictor_corpus,
            endpoint: self.endpoint,
        }
    }
}

/// Reads the config file at `path` (if any), applies `overrides` on top and
/// fills in defaults.
pub fn load_config(path: Option<&Path>, overrides: ConfigFile) -> Result<PipelineConfig, ConfigError> {
    let file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    file.overlay(overrides).resolve()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lexicon_path: Option<PathBuf>,
    /// Falls back to the bundled English list.
    pub stopwords_path: Option<PathBuf>,
    pub synonyms_path: Option<PathBuf>,
    pub deny_path: Option<PathBuf>,
    pub noise: NoiseKind,
    pub seed: u64,
    pub drop_rate: f64,
    pub synonym_rate: f64,
    pub rhyme: RhymeConfig,
    pub k: usize,
    pub mode: EnhanceMode,
    pub enhance_exclude_identical: bool,
    pub enhance_enabled: bool,
    pub predictor: PredictorKind,
    pub predictor_corpus: Option<PathBuf>,
    pub endpoint: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lexicon_path: None,
            stopwords_path: None,
            synonyms_path: None,
            deny_path: None,
            noise: NoiseKind::Shuffle,
            seed: 0,
            drop_rate: 0.20,
            synonym_rate: 0.20,
            rhyme: RhymeConfig::default(),
            k: 200,
            mode: EnhanceMode::FirstImprovement,
            enhance_exclude_identical: true,
            enhance_enabled: true,
            predictor: PredictorKind::Corpus,
            predictor_corpus: None,
            endpoint: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Validation(msg));
        for (key, path) in [
            ("lexicon_path", &self.lexicon_path),
            ("stopwords_path", &self.stopwords_path),
            ("synonyms_path", &self.synonyms_path),
            ("deny_path", &self.deny_path),
            ("predictor_corpus", &self.predictor_corpus),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return invalid(format!("{key}: {} does not exist", p.display()));
                }
            }
        }
        if self.lexicon_path.is_none() {
            return invalid("lexicon_path is required".into());
        }
        if self.noise == NoiseKind::Synonym && self.synonyms_path.is_none() {
            return invalid("noise `synonym` requires synonyms_path".into());
        }
        if self.rhyme.window == 0 {
            return invalid("rhyme.window must be at least 1".into());
        }
        if self.k == 0 {
            return invalid("enhance.k must be at least 1".into());
        }
        self.noise_config().validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
        if self.enhance_enabled {
            match self.predictor {
                PredictorKind::Remote if self.endpoint.is_none() => {
                    return invalid("predictor `remote` requires endpoint".into());
                }
                PredictorKind::Corpus if self.predictor_corpus.is_none() => {
                    return invalid("predictor `corpus` requires predictor_corpus".into());
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig { drop_rate: self.drop_rate, synonym_rate: self.synonym_rate, seed: self.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Strip,
    Rerank,
    Enhance,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::Strip => "strip",
            Stage::Rerank => "rerank",
            Stage::Enhance => "enhance",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    fn at(stage: Stage) -> impl Fn(&dyn fmt::Display) -> PipelineError {
        move |e| PipelineError { stage, message: e.to_string() }
    }
}

/// Loaded resources, shared by every document of a run.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub lexicon: Lexicon,
    pub stripper: Stripper,
    pub enhance: EnhanceConfig,
    pub predictor: Option<Box<dyn MaskedPredictor>>,
}

impl Pipeline {
    pub fn from_config(config: PipelineConfig) -> Result<Self, PipelineError> {
        let load = PipelineError::at(Stage::Load);
        config.validate().map_err(|e| load(&e))?;
        let lexicon_path = config.lexicon_path.as_deref().expect("validated");
        let lexicon = Lexicon::load(lexicon_path).map_err(|e| load(&e))?;
        let stripper = make_stripper(&config).map_err(|e| load(&e))?;
        let enhance = enhance_config(&config).map_err(|e| load(&e))?;
        let predictor = if config.enhance_enabled {
            Some(make_predictor(&config).map_err(|e| load(&e))?)
        } else {
            None
        };
        Ok(Pipeline { config, lexicon, stripper, enhance, predictor })
    }

    /// Runs every stage on one input document.
    pub fn run(
        &self,
        input: &Document,
        hypotheses: Option<Vec<(usize, Verse)>>,
    ) -> Result<PipelineOutput, PipelineError> {
        let strip = PipelineError::at(Stage::Strip);
        if input.lines.is_empty() {
            return Err(strip(&"empty input"));
        }
        let content = self.stripper.strip(input).map_err(|e| strip(&e))?;

        let (selected, selected_rank) = match hypotheses {
            Some(hyps) => {
                let best = rerank(hyps, &self.lexicon, &self.config.rhyme)
                    .map_err(|e| PipelineError::at(Stage::Rerank)(&e))?;
                (best.scored.verse, Some(best.generator_rank))
            }
            None => {
                let verse = content.to_verse();
                if verse.is_empty() {
                    return Err(strip(&"no content words in input"));
                }
                (verse, None)
            }
        };

        let rd_before = rhyme_density(&selected, &self.lexicon, &self.config.rhyme);
        let (verse, replaced_positions) = match &self.predictor {
            Some(p) => {
                let out = enhance_verse_report(&selected, p, &self.enhance, &self.lexicon)
                    .map_err(|e| PipelineError::at(Stage::Enhance)(&e))?;
                let positions = out.replacements.iter().map(|r| (r.line, r.token)).collect();
                (out.verse, positions)
            }
            None => (selected, Vec::new()),
        };
        let input_tokens: Vec<&str> = input.tokens().collect();
        let output_tokens: Vec<&str> = verse.tokens().collect();
        let report = Report {
            rd_before,
            rd_after: rhyme_density(&verse, &self.lexicon, &self.config.rhyme),
            rep: repetition_score(&verse),
            overlap_vs_input: Some(unigram_overlap(&input_tokens, &output_tokens)),
            replaced_positions,
        };
        Ok(PipelineOutput { content, verse, selected_rank, report })
    }
}

/// Stopwords (bundled English list unless configured), synonyms and noise settings.
pub fn make_stripper(config: &PipelineConfig) -> Result<Stripper, StripError> {
    let stopwords = match &config.stopwords_path {
        Some(p) => StopWords::load(p)?,
        None => StopWords::english(),
    };
    let mut stripper = Stripper::new(stopwords, config.noise, config.noise_config());
    if let Some(p) = &config.synonyms_path {
        stripper = stripper.with_synonyms(SynonymLexicon::load(p)?);
    }
    Ok(stripper)
}

/// Enhancement settings with the deny list loaded.
pub fn enhance_config(config: &PipelineConfig) -> Result<EnhanceConfig, ConfigError> {
    let deny_list = match &config.deny_path {
        Some(p) => load_deny_list(p).map_err(|e| ConfigError::Validation(e.to_string()))?,
        None => HashSet::new(),
    };
    Ok(EnhanceConfig { k: config.k, mode: config.mode, deny_list, exclude_identical: config.enhance_exclude_identical })
}

/// The configured masked predictor.
pub fn make_predictor(config: &PipelineConfig) -> Result<Box<dyn MaskedPredictor>, ConfigError> {
    match config.predictor {
        PredictorKind::Remote => {
            let endpoint = config
                .endpoint
                .as_deref()
                .ok_or_else(|| ConfigError::Validation("predictor `remote` requires endpoint".into()))?;
            Ok(Box::new(RemotePredictor::new(endpoint)))
        }
        PredictorKind::Corpus => {
            let path = config
                .predictor_corpus
                .as_deref()
                .ok_or_else(|| ConfigError::Validation("predictor `corpus` requires predictor_corpus".into()))?;
            let predictor = build_corpus_predictor(path).map_err(|e| ConfigError::Validation(e.to_string()))?;
            Ok(Box::new(predictor))
        }
    }
}

/// Builds the frequency predictor from a lyrics file or directory.
pub fn build_corpus_predictor(path: &Path) -> Result<CorpusPredictor, Box<dyn std::error::Error>> {
    let mut verses = Vec::new();
    for doc in corpus::load_lyrics(path)? {
        verses.extend(corpus::split_verses(&doc, 1)?);
    }
    Ok(CorpusPredictor::build(&verses)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub content: ContentWords,
    pub verse: Verse,
    pub selected_rank: Option<usize>,
    pub report: Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rd_before: f64,
    pub rd_after: f64,
    pub rep: f64,
    pub overlap_vs_input: Option<f64>,
    /// `(line, token)` of every substituted word.
    pub replaced_positions: Vec<(usize, usize)>,
}

/// Mean ± std of the reported quantities over a set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub overlap: Option<MeanStd>,
    pub rd: MeanStd,
    pub rd_before: MeanStd,
    pub rep: MeanStd,
}

pub fn serve_report(reports: &[Report]) -> Option<Summary> {
    let col = |f: fn(&Report) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    let overlaps: Vec<f64> = reports.iter().filter_map(|r| r.overlap_vs_input).collect();
    Some(Summary {
        n: reports.len(),
        overlap: MeanStd::of(&overlaps),
        rd: col(|r| r.rd_after)?,
        rd_before: col(|r| r.rd_before)?,
        rep: col(|r| r.rep)?,
    })
}

impl Summary {
    /// A two-column `Overlap | RD` table row, `-` for a missing column.
    pub fn render_table(&self, label: &str) -> String {
        let overlap = self.overlap.map_or_else(|| "-".to_string(), |m| format!("{m:.2}"));
        let rd = format!("{:.2}", self.rd);
        let width = label.len().max(5);
        format!(
            "{:<width$}  {:>14}  {:>14}\n{:<width$}  {:>14}  {:>14}\n",
            "Model", "Overlap", "RD", label, overlap, rd
        )
    }
}
