//! Pronunciation lookup and vowel projection.
//!
//! Words are transcribed through a CMUdict-style lexicon. Words missing from
//! the lexicon get an orthographic approximation in which every run of vowel
//! letters becomes one synthetic vowel `V:<run>`. Synthetic vowels only ever
//! equal each other, never an ARPABET vowel.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use thiserror::Error;

/// ARPABET vowel symbols, stress digits removed.
pub const ARPABET_VOWELS: [&str; 15] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW",
];

const FALLBACK_PREFIX: &str = "V:";

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub fn is_vowel(symbol: &str) -> bool {
    symbol.starts_with(FALLBACK_PREFIX) || ARPABET_VOWELS.contains(&symbol)
}

/// Removes trailing stress digits from an ARPABET symbol (`UW1` -> `UW`).
pub fn strip_stress(symbol: &str) -> &str {
    symbol.trim_end_matches(|c: char| c.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Pronunciation {
    pub phonemes: Vec<String>,
}

impl Pronunciation {
    pub fn vowels(&self) -> impl Iterator<Item = &str> {
        self.phonemes.iter().map(String::as_str).filter(|p| is_vowel(p))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Pronunciation>,
    inventory: BTreeSet<String>,
    source: Option<PathBuf>,
}

impl Lexicon {
    pub fn empty() -> Self {
        Lexicon::default()
    }

    /// Reads a CMUdict-format file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let io_err = |source| LexiconError::Io { path: path.to_path_buf(), source };
        let file = fs::File::open(path).map_err(io_err)?;
        let mut lex = Lexicon::from_reader(io::BufReader::new(file))?;
        lex.source = Some(path.to_path_buf());
        Ok(lex)
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| LexiconError::Malformed { line: line_no, reason: e.to_string() })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap_or_default();
            let phonemes: Vec<&str> = fields.collect();
            if phonemes.is_empty() {
                return Err(LexiconError::Malformed {
                    line: line_no,
                    reason: format!("entry `{word}` has no phonemes"),
                });
            }
            if is_variant(word) {
                continue;
            }
            let mut pron = Vec::with_capacity(phonemes.len());
            for p in phonemes {
                let sym = strip_stress(p);
                if sym.is_empty() || !sym.chars().all(|c| c.is_ascii_uppercase()) {
                    return Err(LexiconError::Malformed {
                        line: line_no,
                        reason: format!("invalid phoneme `{p}` for `{word}`"),
                    });
                }
                pron.push(sym.to_string());
            }
            let key = word.to_lowercase();
            if lex.entries.contains_key(&key) {
                continue;
            }
            lex.inventory.extend(pron.iter().cloned());
            lex.entries.insert(key, Pronunciation { phonemes: pron });
        }
        Ok(lex)
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        Lexicon::from_reader(text.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Phoneme symbols declared by the loaded entries.
    pub fn inventory(&self) -> &BTreeSet<String> {
        &self.inventory
    }

    pub fn get(&self, word: &str) -> Option<&Pronunciation> {
        self.entries.get(word)
    }

    /// Pronunciation of `word`, falling back to the orthographic approximation.
    pub fn transcribe(&self, word: &str) -> Pronunciation {
        match self.entries.get(word) {
            Some(p) => p.clone(),
            None => fallback_pronunciation(word),
        }
    }

    /// Vowel symbols of `word` in order.
    pub fn vowels_of(&self, word: &str) -> Vec<String> {
        match self.entries.get(word) {
            Some(p) => p.vowels().map(str::to_string).collect(),
            None => fallback_pronunciation(word).phonemes,
        }
    }

    /// Concatenated vowel stream of `words` with per-word end marks.
    pub fn vowel_sequence<S: AsRef<str>>(&self, words: &[S]) -> VowelSeq {
        let mut seq = VowelSeq::default();
        for w in words {
            seq.vowels.extend(self.vowels_of(w.as_ref()));
            seq.word_end_marks.push(seq.vowels.len());
        }
        seq
    }
}

/// `WORD(2)` style alternate pronunciations.
fn is_variant(word: &str) -> bool {
    word.ends_with(')') && word.contains('(')
}

/// One `V:<run>` per maximal run of vowel letters; `y` counts as a vowel
/// except in first position.
pub fn fallback_pronunciation(word: &str) -> Pronunciation {
    let mut phonemes = Vec::new();
    let mut run = String::new();
    for (i, c) in word.chars().flat_map(char::to_lowercase).enumerate() {
        let vowel = matches!(c, 'a' | 'e' | 'i' | 'o' | 'u') || (c == 'y' && i > 0);
        if vowel {
            run.push(c);
        } else if !run.is_empty() {
            phonemes.push(format!("{FALLBACK_PREFIX}{run}"));
            run.clear();
        }
    }
    if !run.is_empty() {
        phonemes.push(format!("{FALLBACK_PREFIX}{run}"));
    }
    Pronunciation { phonemes }
}

/// Vowel stream of a word sequence. `word_end_marks[i]` is the stream length
/// after word `i`, so word `i`'s last vowel sits at `word_end_marks[i] - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VowelSeq {
    pub vowels: Vec<String>,
    pub word_end_marks: Vec<usize>,
}

impl VowelSeq {
    pub fn word_vowel_count(&self, i: usize) -> usize {
        let start = if i == 0 { 0 } else { self.word_end_marks[i - 1] };
        self.word_end_marks[i] - start
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = ";;; toy lexicon\nFOOD  F UW1 D\nYOU  Y UW1\nNO  N OW1\nSHAME  SH EY1 M\nYOU(2)  Y AH0\n";

    fn strs(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }

    #[test]
    fn parses_cmudict_lines() {
        let lex = Lexicon::parse(TOY).unwrap();
        assert_eq!(lex.len(), 4);
        assert_eq!(strs(&lex.get("food").unwrap().phonemes), ["F", "UW", "D"]);
        assert_eq!(strs(&lex.get("you").unwrap().phonemes), ["Y", "UW"]);
        assert!(lex.inventory().contains("SH"));
    }

    #[test]
    fn first_listed_wins() {
        let lex = Lexicon::parse("READ  R IY1 D\nREAD  R EH1 D\n").unwrap();
        assert_eq!(strs(&lex.get("read").unwrap().phonemes), ["R", "IY", "D"]);
    }

    #[test]
    fn empty_file() {
        assert!(Lexicon::parse("").unwrap().is_empty());
    }

    #[test]
    fn malformed_reports_line() {
        let err = Lexicon::parse("FOOD  F UW1 D\nBROKEN\n").unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 2, .. }), "{err}");
        let err = Lexicon::parse(";;; c\nX  a1\n").unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(Lexicon::load("/nonexistent/lexicon.txt"), Err(LexiconError::Io { .. })));
    }

    #[test]
    fn transcribe_hit_and_fallback() {
        let lex = Lexicon::parse(TOY).unwrap();
        assert_eq!(strs(&lex.transcribe("food").phonemes), ["F", "UW", "D"]);
        let empty = Lexicon::empty();
        assert_eq!(strs(&empty.transcribe("zyzzx").phonemes), ["V:y"]);
        assert!(empty.transcribe("hmm").phonemes.is_empty());
        assert_eq!(strs(&empty.transcribe("yeah").phonemes), ["V:ea"]);
        assert_eq!(strs(&empty.transcribe("rogaine").phonemes), ["V:o", "V:ai", "V:e"]);
    }

    #[test]
    fn fallback_never_matches_arpabet() {
        for v in fallback_pronunciation("aeiou").phonemes {
            assert!(is_vowel(&v));
            assert!(!ARPABET_VOWELS.contains(&v.as_str()));
        }
    }

    #[test]
    fn vowel_sequences() {
        let lex = Lexicon::parse(TOY).unwrap();
        let s = lex.vowel_sequence(&["you"]);
        assert_eq!((strs(&s.vowels), s.word_end_marks.clone()), (vec!["UW"], vec![1]));
        let s = lex.vowel_sequence::<&str>(&[]);
        assert!(s.vowels.is_empty() && s.word_end_marks.is_empty());
        let s = lex.vowel_sequence(&["no", "shame"]);
        assert_eq!((strs(&s.vowels), s.word_end_marks.clone()), (vec!["OW", "EY"], vec![1, 2]));
        let s = lex.vowel_sequence(&["no", "hmm", "shame"]);
        assert_eq!(s.word_end_marks, [1, 1, 2]);
        assert_eq!(s.word_vowel_count(1), 0);
    }

    #[test]
    fn stress_strip_idempotent() {
        for p in ["UW1", "AH0", "EY2", "SH"] {
            assert_eq!(strip_stress(strip_stress(p)), strip_stress(p));
        }
    }
}
