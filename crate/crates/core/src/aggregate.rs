//! Per-term aggregation: predicts a sentence label from the mean of its
//! token vectors, directly and as a difference to a baseline mean.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::emotion::{argmax, Emotion, EMOTION_COUNT, RESOLUTION};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::transform::{to_lov, LoVMatrix, Sentence, TfIdfTable};

/// Recorded in reports: the row mean is the only normalization applied
/// before differencing.
pub const NORMALIZATION_NOTE: &str =
    "simple scores are the mean over all token rows (zero rows included); no further scaling before differencing";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub sentence_id: String,
    pub simple_scores: [f64; EMOTION_COUNT],
    pub diff_scores: [f64; EMOTION_COUNT],
    pub predicted_simple: Emotion,
    pub predicted_diff: Emotion,
    pub top3_simple: Vec<(Emotion, f64)>,
    /// Argmax of the difference to the mean of the sentence's source, when
    /// computed over a corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_diff_source: Option<Emotion>,
}

/// Highest three scores, ties in emotion order.
pub fn top3(scores: &[f64; EMOTION_COUNT]) -> Vec<(Emotion, f64)> {
    let mut ranked: Vec<(Emotion, f64)> = Emotion::ALL.iter().map(|&e| (e, scores[e.index()])).collect();
    // stable sort keeps emotion order among equal scores
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked.truncate(3);
    ranked
}

fn diff(a: &[f64; EMOTION_COUNT], b: &[f64; EMOTION_COUNT]) -> [f64; EMOTION_COUNT] {
    std::array::from_fn(|k| a[k] - b[k])
}

pub fn aggregate_sentence(lov: &LoVMatrix, lexicon_mean: &[f64; EMOTION_COUNT]) -> Result<AggregationResult> {
    if lov.rows.is_empty() {
        return Err(Error::domain(format!("sentence {} has no rows to aggregate", lov.sentence_id)));
    }
    // Integer column sums keep the mean independent of row order.
    let mut sums = [0u64; EMOTION_COUNT];
    for row in &lov.rows {
        for (s, h) in sums.iter_mut().zip(row.hundredths()) {
            *s += u64::from(h);
        }
    }
    let denom = lov.rows.len() as f64 * f64::from(RESOLUTION);
    let simple_scores = sums.map(|s| s as f64 / denom);
    let diff_scores = diff(&simple_scores, lexicon_mean);
    Ok(AggregationResult {
        sentence_id: lov.sentence_id.clone(),
        predicted_simple: argmax(&simple_scores),
        predicted_diff: argmax(&diff_scores),
        top3_simple: top3(&simple_scores),
        simple_scores,
        diff_scores,
        predicted_diff_source: None,
    })
}

/// Aggregates every sentence with at least one token, against the lexicon
/// mean and against the mean simple score of the sentence's source.
pub fn aggregate_corpus(
    corpus: &[Sentence],
    lexicon: &Lexicon,
    weights: Option<&TfIdfTable>,
) -> Result<Vec<AggregationResult>> {
    let mean = lexicon.mean_vector();
    let mut results = Vec::new();
    let mut sources = Vec::new();
    for sentence in corpus.iter().filter(|s| !s.tokens.is_empty()) {
        results.push(aggregate_sentence(&to_lov(sentence, lexicon, weights)?, &mean)?);
        sources.push(sentence.source.as_str());
    }

    let mut source_sums: BTreeMap<&str, ([f64; EMOTION_COUNT], usize)> = BTreeMap::new();
    for (result, source) in results.iter().zip(&sources) {
        let slot = source_sums.entry(source).or_insert(([0.0; EMOTION_COUNT], 0));
        for k in 0..EMOTION_COUNT {
            slot.0[k] += result.simple_scores[k];
        }
        slot.1 += 1;
    }
    for (result, source) in results.iter_mut().zip(&sources) {
        let (sum, n) = source_sums[source];
        let source_mean = sum.map(|s| s / n as f64);
        result.predicted_diff_source = Some(argmax(&diff(&result.simple_scores, &source_mean)));
    }
    Ok(results)
}

/// Crowd label of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrowdLabel {
    pub sentence_id: String,
    pub source: String,
    pub emotion: Emotion,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchTally {
    pub sentences: usize,
    pub diff_matches: usize,
    pub top3_matches: usize,
    pub source_diff_matches: usize,
}

impl MatchTally {
    fn add(&mut self, diff: bool, top3: bool, source_diff: bool) {
        self.sentences += 1;
        self.diff_matches += usize::from(diff);
        self.top3_matches += usize::from(top3);
        self.source_diff_matches += usize::from(source_diff);
    }

    fn fraction(&self, count: usize) -> Option<f64> {
        (self.sentences > 0).then(|| count as f64 / self.sentences as f64)
    }

    /// Share of sentences whose difference argmax equals the crowd label.
    pub fn diff_fraction(&self) -> Option<f64> {
        self.fraction(self.diff_matches)
    }

    /// Share of sentences whose crowd label is in the simple top three.
    pub fn top3_fraction(&self) -> Option<f64> {
        self.fraction(self.top3_matches)
    }

    pub fn source_diff_fraction(&self) -> Option<f64> {
        self.fraction(self.source_diff_matches)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub overall: MatchTally,
    pub by_emotion: BTreeMap<Emotion, MatchTally>,
    pub by_source: BTreeMap<String, MatchTally>,
}

pub fn validate_labels(results: &[AggregationResult], labels: &[CrowdLabel]) -> Result<ValidationSummary> {
    let by_id: BTreeMap<&str, &AggregationResult> =
        results.iter().map(|r| (r.sentence_id.as_str(), r)).collect();
    let mut summary = ValidationSummary::default();
    for label in labels {
        let result = by_id.get(label.sentence_id.as_str()).ok_or_else(|| {
            Error::Consistency(format!("no aggregation result for labelled sentence {}", label.sentence_id))
        })?;
        let diff = result.predicted_diff == label.emotion;
        let top3 = result.top3_simple.iter().any(|(e, _)| *e == label.emotion);
        let source_diff = result.predicted_diff_source == Some(label.emotion);
        summary.overall.add(diff, top3, source_diff);
        summary.by_emotion.entry(label.emotion).or_default().add(diff, top3, source_diff);
        summary
            .by_source
            .entry(label.source.clone())
            .or_default()
            .add(diff, top3, source_diff);
    }
    Ok(summary)
}
