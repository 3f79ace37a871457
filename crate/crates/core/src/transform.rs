//! Sentence renderings at the four privacy levels, plus TF-IDF weighting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::emotion::{Emotion, EmotionVector};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::privacy::PrivacyLevel;
use crate::render::{self, IVImage, Palette, DEFAULT_CELL_SIZE, DEFAULT_GAMMA_BASE};
use crate::text;

pub use crate::text::preprocess;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub source: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, source: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Sentence {
            id: id.into(),
            source: source.into(),
            tokens: preprocess(&text),
            text,
        }
    }
}

/// One line of a corpus file. Gold files add `gold_answer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub source: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<Emotion>,
}

/// Sentence with a known objective answer, injected to score contributors.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldSentence {
    pub sentence: Sentence,
    pub answer: Emotion,
}

fn read_records(source: impl Read) -> Result<Vec<SentenceRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SentenceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("duplicate sentence id {:?}", record.id),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_corpus(source: impl Read) -> Result<Vec<Sentence>> {
    Ok(read_records(source)?
        .into_iter()
        .map(|r| Sentence::new(r.id, r.source, r.text))
        .collect())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    read_corpus(File::open(path)?)
}

pub fn read_gold(source: impl Read) -> Result<Vec<GoldSentence>> {
    read_records(source)?
        .into_iter()
        .map(|r| {
            let answer = r
                .gold_answer
                .ok_or_else(|| Error::Consistency(format!("gold sentence {} has no gold_answer", r.id)))?;
            Ok(GoldSentence {
                sentence: Sentence::new(r.id, r.source, r.text),
                answer,
            })
        })
        .collect()
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<GoldSentence>> {
    read_gold(File::open(path)?)
}

/// Seeded permutation of the sentence's tokens.
pub fn shuffle(sentence: &Sentence, seed: u64) -> Result<Vec<String>> {
    if sentence.tokens.is_empty() {
        return Err(Error::domain(format!("sentence {} has no tokens to shuffle", sentence.id)));
    }
    let mut tokens = sentence.tokens.clone();
    tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(tokens)
}

/// Stable per-item seed derived from a run seed and an identifier (FNV-1a).
pub fn derive_seed(seed: u64, id: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for byte in id.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// One emotion vector per token, in token order. Tokens outside the
/// lexicon get the zero row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoVMatrix {
    pub sentence_id: String,
    pub rows: Vec<EmotionVector>,
    pub weighted: bool,
}

impl LoVMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Numeric CSV, one row per token, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let cells: Vec<String> = row.values().iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Maximum TF-IDF per stem over a corpus, scaled so the largest weight is 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TfIdfTable {
    pub weights: BTreeMap<String, f64>,
}

impl TfIdfTable {
    /// Weight of a surface token; tokens outside the corpus weigh 0.
    pub fn weight(&self, token: &str) -> f64 {
        self.weights.get(&text::stem(token)).copied().unwrap_or(0.0)
    }
}

pub fn compute_tfidf(corpus: &[Sentence]) -> Result<TfIdfTable> {
    if corpus.is_empty() {
        return Err(Error::domain("cannot compute TF-IDF over an empty corpus"));
    }
    let n = corpus.len() as f64;
    let stemmed: Vec<Vec<String>> = corpus
        .iter()
        .map(|s| s.tokens.iter().map(|t| text::stem(t)).collect())
        .collect();

    let mut df: HashMap<&str, usize> = HashMap::new();
    for stems in &stemmed {
        let unique: HashSet<&str> = stems.iter().map(String::as_str).collect();
        for s in unique {
            *df.entry(s).or_insert(0) += 1;
        }
    }

    let mut raw: BTreeMap<String, f64> = BTreeMap::new();
    for stems in &stemmed {
        if stems.is_empty() {
            continue;
        }
        let len = stems.len() as f64;
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in stems {
            *counts.entry(s.as_str()).or_insert(0) += 1;
        }
        for (stem, count) in counts {
            let idf = (n / df[stem] as f64).ln();
            let score = count as f64 / len * idf;
            let slot = raw.entry(stem.to_string()).or_insert(0.0);
            if score > *slot {
                *slot = score;
            }
        }
    }

    let max = raw.values().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for w in raw.values_mut() {
            *w /= max;
        }
    }
    Ok(TfIdfTable { weights: raw })
}

pub fn to_lov(sentence: &Sentence, lexicon: &Lexicon, weights: Option<&TfIdfTable>) -> Result<LoVMatrix> {
    let rows = sentence
        .tokens
        .iter()
        .map(|token| {
            let row = lexicon.lookup(token).unwrap_or(EmotionVector::ZERO);
            match weights {
                Some(table) => row.scaled(table.weight(token)),
                None => Ok(row),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoVMatrix {
        sentence_id: sentence.id.clone(),
        rows,
        weighted: weights.is_some(),
    })
}

#[derive(Debug, Clone)]
pub struct TransformOptions {
    pub palette: Palette,
    pub gamma_base: f64,
    pub cell_size: u32,
    pub weights: Option<TfIdfTable>,
    pub seed: u64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            palette: Palette::default(),
            gamma_base: DEFAULT_GAMMA_BASE,
            cell_size: DEFAULT_CELL_SIZE,
            weights: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rendering {
    Text(String),
    Shuffled { tokens: Vec<String>, seed: u64 },
    Vectors(LoVMatrix),
    Image(IVImage),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedItem {
    pub sentence_id: String,
    pub level: PrivacyLevel,
    pub rendering: Rendering,
}

/// On-disk form of a payload; images are referenced by file name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ItemPayload {
    Text { text: String },
    Tokens { tokens: Vec<String> },
    Matrix { rows: Vec<EmotionVector> },
    Image { file: String },
}

impl TransformedItem {
    pub fn payload_kind(&self) -> &'static str {
        match self.rendering {
            Rendering::Text(_) => "text",
            Rendering::Shuffled { .. } => "tokens",
            Rendering::Vectors(_) => "matrix",
            Rendering::Image(_) => "image",
        }
    }

    /// Text shown to annotators for the two text levels.
    pub fn display_text(&self) -> Option<String> {
        match &self.rendering {
            Rendering::Text(t) => Some(t.clone()),
            Rendering::Shuffled { tokens, .. } => Some(tokens.join(" ")),
            _ => None,
        }
    }

    /// Exactly what an annotator receives: content type and body bytes.
    pub fn payload_body(&self) -> Result<(&'static str, Vec<u8>)> {
        Ok(match &self.rendering {
            Rendering::Text(t) => ("text/plain; charset=utf-8", t.clone().into_bytes()),
            Rendering::Shuffled { tokens, .. } => ("application/json", serde_json::to_vec(tokens)?),
            Rendering::Vectors(lov) => ("text/csv", lov.to_csv().into_bytes()),
            Rendering::Image(img) => ("image/png", img.to_png()?),
        })
    }

    /// Payload record for the item, with `image_file` standing in for pixels.
    pub fn payload(&self, image_file: &str) -> ItemPayload {
        match &self.rendering {
            Rendering::Text(t) => ItemPayload::Text { text: t.clone() },
            Rendering::Shuffled { tokens, .. } => ItemPayload::Tokens {
                tokens: tokens.clone(),
            },
            Rendering::Vectors(lov) => ItemPayload::Matrix {
                rows: lov.rows.clone(),
            },
            Rendering::Image(_) => ItemPayload::Image {
                file: image_file.to_string(),
            },
        }
    }
}

pub fn transform_at_level(
    sentence: &Sentence,
    level: PrivacyLevel,
    lexicon: &Lexicon,
    options: &TransformOptions,
) -> Result<TransformedItem> {
    let rendering = match level {
        PrivacyLevel::NoPrivacy => Rendering::Text(sentence.text.clone()),
        PrivacyLevel::Low => Rendering::Shuffled {
            tokens: shuffle(sentence, options.seed)?,
            seed: options.seed,
        },
        PrivacyLevel::Medium => Rendering::Vectors(to_lov(sentence, lexicon, options.weights.as_ref())?),
        PrivacyLevel::High => {
            let lov = to_lov(sentence, lexicon, options.weights.as_ref())?;
            Rendering::Image(render::to_iv(&lov, &options.palette, options.gamma_base, options.cell_size)?)
        }
    };
    Ok(TransformedItem {
        sentence_id: sentence.id.clone(),
        level,
        rendering,
    })
}
