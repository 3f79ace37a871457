//! Emotion lexicons: stem-indexed emotion vectors plus summary statistics.
//!
//! File format, one entry per line:
//!
//! ```text
//! # comment
//! term c1 c2 c3 c4 c5 c6 c7 c8
//! ```
//!
//! `c1..c8` are non-negative integer annotation counts in the fixed emotion
//! order. A row whose values contain a decimal point is read as an already
//! normalized vector instead (each value in `[0, 1]`); its raw counts are
//! synthesized as hundredths.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::emotion::{EmotionVector, EMOTION_COUNT, RESOLUTION};
use crate::error::{Error, Result};
use crate::text;

/// Divides counts by their maximum and rounds half-up to two decimals.
/// All-zero counts give the zero vector.
pub fn normalize_counts(raw_counts: &[u64]) -> Result<EmotionVector> {
    if raw_counts.len() != EMOTION_COUNT {
        return Err(Error::Dimension {
            expected: EMOTION_COUNT,
            got: raw_counts.len(),
        });
    }
    let max = raw_counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Ok(EmotionVector::ZERO);
    }
    let max = u128::from(max);
    let res = u128::from(RESOLUTION);
    let mut steps = [0u8; EMOTION_COUNT];
    for (slot, &c) in steps.iter_mut().zip(raw_counts) {
        // floor(res * c / max + 1/2), in integers
        *slot = ((2 * res * u128::from(c) + max) / (2 * max)) as u8;
    }
    EmotionVector::from_hundredths(steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub stem: String,
    pub raw_counts: [u64; EMOTION_COUNT],
    pub vector: EmotionVector,
    pub source_terms: Vec<String>,
}

impl LexiconEntry {
    pub fn from_counts(stem: &str, raw_counts: [u64; EMOTION_COUNT]) -> Result<Self> {
        Ok(LexiconEntry {
            stem: checked_stem(stem)?,
            raw_counts,
            vector: normalize_counts(&raw_counts)?,
            source_terms: vec![stem.to_string()],
        })
    }

    /// Entry for a vector that is already normalized; counts are the
    /// vector's hundredths.
    pub fn from_vector(stem: &str, vector: EmotionVector) -> Result<Self> {
        Ok(LexiconEntry {
            stem: checked_stem(stem)?,
            raw_counts: vector.hundredths().map(u64::from),
            vector,
            source_terms: vec![stem.to_string()],
        })
    }
}

fn checked_stem(stem: &str) -> Result<String> {
    let stem = stem.trim().to_lowercase();
    if stem.is_empty() {
        return Err(Error::domain("empty stem"));
    }
    Ok(stem)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LexiconStats {
    pub stem_count: usize,
    pub term_count: usize,
    pub distinct_vector_count: usize,
    /// Share of total annotation mass per emotion.
    pub emotion_distribution: [f64; EMOTION_COUNT],
    /// Per-emotion mean of the entry vectors.
    pub mean_vector: [f64; EMOTION_COUNT],
}

/// Recomputes every statistic from the entries.
pub fn compute_stats(lexicon: &Lexicon) -> LexiconStats {
    stats_of(lexicon.entries.values())
}

fn stats_of<'a>(entries: impl Iterator<Item = &'a LexiconEntry> + Clone) -> LexiconStats {
    let stem_count = entries.clone().count();
    if stem_count == 0 {
        return LexiconStats::default();
    }
    let term_count = entries.clone().map(|e| e.source_terms.len()).sum();
    let distinct_vector_count = entries
        .clone()
        .map(|e| e.vector)
        .collect::<HashSet<_>>()
        .len();

    let mut mass = [0u128; EMOTION_COUNT];
    let mut steps = [0u64; EMOTION_COUNT];
    for entry in entries {
        for k in 0..EMOTION_COUNT {
            mass[k] += u128::from(entry.raw_counts[k]);
            steps[k] += u64::from(entry.vector.hundredths()[k]);
        }
    }
    let total: u128 = mass.iter().sum();
    let emotion_distribution = if total == 0 {
        [0.0; EMOTION_COUNT]
    } else {
        mass.map(|m| m as f64 / total as f64)
    };
    let denom = stem_count as f64 * f64::from(RESOLUTION);
    let mean_vector = steps.map(|s| s as f64 / denom);

    LexiconStats {
        stem_count,
        term_count,
        distinct_vector_count,
        emotion_distribution,
        mean_vector,
    }
}

/// A named stem → vector mapping. Immutable after construction except
/// through [`Lexicon::insert`], which keeps the statistics current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    name: String,
    entries: BTreeMap<String, LexiconEntry>,
    stats: LexiconStats,
}

impl Lexicon {
    pub fn new(name: impl Into<String>) -> Self {
        Lexicon {
            name: name.into(),
            entries: BTreeMap::new(),
            stats: LexiconStats::default(),
        }
    }

    pub fn from_entries(
        name: impl Into<String>,
        entries: impl IntoIterator<Item = LexiconEntry>,
    ) -> Self {
        let mut lexicon = Lexicon::new(name);
        for entry in entries {
            lexicon.entries.insert(entry.stem.clone(), entry);
        }
        lexicon.stats = compute_stats(&lexicon);
        lexicon
    }

    /// Builds a lexicon from `(term, vector)` pairs, stemming each term.
    pub fn from_vectors<'a>(
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (&'a str, EmotionVector)>,
    ) -> Result<Self> {
        let rows = terms
            .into_iter()
            .map(|(t, v)| (t.to_lowercase(), Row::Vector(v)))
            .collect();
        Ok(Lexicon::from_entries(name, fold_rows(rows)?))
    }

    pub fn load(path: impl AsRef<Path>, name: impl Into<String>) -> Result<Self> {
        let file = File::open(path)?;
        Lexicon::parse(file, name)
    }

    pub fn parse(source: impl Read, name: impl Into<String>) -> Result<Self> {
        let mut rows: BTreeMap<String, Row> = BTreeMap::new();
        for (idx, line) in BufReader::new(source).lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (term, row) = parse_row(trimmed, line_no)?;
            if rows.insert(term.clone(), row).is_some() {
                warn!("line {line_no}: duplicate term {term:?}, keeping the last row");
            }
        }
        Ok(Lexicon::from_entries(name, fold_rows(rows)?))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stats(&self) -> &LexiconStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    pub fn entry(&self, stem: &str) -> Option<&LexiconEntry> {
        self.entries.get(stem)
    }

    /// Replaces (or adds) the entry for its stem and refreshes the stats.
    pub fn insert(&mut self, entry: LexiconEntry) -> Option<LexiconEntry> {
        let previous = self.entries.insert(entry.stem.clone(), entry);
        self.stats = compute_stats(self);
        previous
    }

    /// Vector for a surface token, stemmed the same way as at load time.
    pub fn lookup(&self, token: &str) -> Option<EmotionVector> {
        if token.trim().is_empty() {
            return None;
        }
        self.entries.get(&text::stem(token)).map(|e| e.vector)
    }

    pub fn mean_vector(&self) -> [f64; EMOTION_COUNT] {
        self.stats.mean_vector
    }
}

#[derive(Debug, Clone)]
enum Row {
    Counts([u64; EMOTION_COUNT]),
    Vector(EmotionVector),
}

fn parse_row(line: &str, line_no: usize) -> Result<(String, Row)> {
    let parse_err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != EMOTION_COUNT + 1 {
        return Err(parse_err(format!(
            "expected a term and {EMOTION_COUNT} values, found {} fields",
            fields.len()
        )));
    }
    let term = fields[0].to_lowercase();
    let values = &fields[1..];
    if values.iter().any(|v| v.contains('.')) {
        let mut parsed = [0.0; EMOTION_COUNT];
        for (slot, v) in parsed.iter_mut().zip(values) {
            *slot = v
                .parse::<f64>()
                .map_err(|_| parse_err(format!("bad value {v:?}")))?;
        }
        let vector =
            EmotionVector::from_values(&parsed).map_err(|e| parse_err(e.to_string()))?;
        Ok((term, Row::Vector(vector)))
    } else {
        let mut counts = [0u64; EMOTION_COUNT];
        for (slot, v) in counts.iter_mut().zip(values) {
            *slot = v
                .parse::<u64>()
                .map_err(|_| parse_err(format!("bad count {v:?}")))?;
        }
        Ok((term, Row::Counts(counts)))
    }
}

// Terms sharing a stem sum their counts. If any of them came in as a
// normalized vector, the stem gets the rounded mean of the member vectors.
fn fold_rows(rows: BTreeMap<String, Row>) -> Result<Vec<LexiconEntry>> {
    let mut groups: BTreeMap<String, Vec<(String, Row)>> = BTreeMap::new();
    for (term, row) in rows {
        let stem = text::stem(&term);
        if stem.is_empty() {
            continue;
        }
        groups.entry(stem).or_default().push((term, row));
    }

    let mut entries = Vec::with_capacity(groups.len());
    for (stem, members) in groups {
        let source_terms: Vec<String> = members
            .iter()
            .map(|(t, _)| t.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let all_counts = members.iter().all(|(_, r)| matches!(r, Row::Counts(_)));
        let mut entry = if all_counts {
            let mut sum = [0u64; EMOTION_COUNT];
            for (_, row) in &members {
                if let Row::Counts(c) = row {
                    for k in 0..EMOTION_COUNT {
                        sum[k] = sum[k].saturating_add(c[k]);
                    }
                }
            }
            LexiconEntry::from_counts(&stem, sum)?
        } else {
            let n = members.len() as u32;
            let mut sum = [0u32; EMOTION_COUNT];
            for (_, row) in &members {
                let v = match row {
                    Row::Counts(c) => normalize_counts(c)?,
                    Row::Vector(v) => *v,
                };
                for (s, h) in sum.iter_mut().zip(v.hundredths()) {
                    *s += u32::from(h);
                }
            }
            let mean = sum.map(|s| ((2 * s + n) / (2 * n)) as u8);
            LexiconEntry::from_vector(&stem, EmotionVector::from_hundredths(mean)?)?
        };
        entry.source_terms = source_terms;
        entries.push(entry);
    }
    Ok(entries)
}
