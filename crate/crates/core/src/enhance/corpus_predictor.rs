use std::collections::HashMap;

use crate::corpus::{is_word, Verse};

use super::{CandidateList, EnhanceError, MaskedPredictor, PredictError, PredictorQuery};

/// Frequency-based stand-in for a masked language model.
///
/// Every word is scored `line_final_count + 0.1 * total_count`; the query
/// context is ignored, so every mask receives the same top-k list.
#[derive(Debug, Clone)]
pub struct CorpusPredictor {
    ranked: Vec<(String, f64)>,
}

impl CorpusPredictor {
    pub fn build(verses: &[Verse]) -> Result<Self, EnhanceError> {
        // score * 10, kept integral so ties are exact
        let mut tenths: HashMap<&str, u64> = HashMap::new();
        for verse in verses {
            for line in &verse.lines {
                for tok in line.tokens.iter().filter(|t| is_word(t)) {
                    *tenths.entry(tok).or_insert(0) += 1;
                }
                if let Some(last) = line.last_word() {
                    *tenths.entry(last).or_insert(0) += 10;
                }
            }
        }
        if tenths.is_empty() {
            return Err(EnhanceError::EmptyCorpus);
        }
        let mut ranked: Vec<(&str, u64)> = tenths.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(CorpusPredictor {
            ranked: ranked.into_iter().map(|(w, t)| (w.to_string(), t as f64 / 10.0)).collect(),
        })
    }

    pub fn vocabulary_size(&self) -> usize {
        self.ranked.len()
    }
}

impl MaskedPredictor for CorpusPredictor {
    fn predict(&self, query: &PredictorQuery) -> Result<CandidateList, PredictError> {
        Ok(self
            .ranked
            .iter()
            .take(query.k)
            .map(|(w, s)| (w.as_str(), *s))
            .collect())
    }
}
