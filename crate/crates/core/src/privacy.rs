//! Privacy levels and combinatorial counts of what a rendering could hide.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::emotion::{EMOTION_COUNT, RESOLUTION};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

/// Rough key-space size of 256-bit encryption, printed alongside the counts.
pub const ENCRYPTION_256_LOG10: f64 = 77.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrivacyLevel {
    #[serde(rename = "none")]
    NoPrivacy,
    #[serde(rename = "low")]
    Low,
    #[serde(rename = "medium")]
    Medium,
    #[serde(rename = "high")]
    High,
}

impl PrivacyLevel {
    pub const ALL: [PrivacyLevel; 4] = [
        PrivacyLevel::NoPrivacy,
        PrivacyLevel::Low,
        PrivacyLevel::Medium,
        PrivacyLevel::High,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PrivacyLevel::NoPrivacy => "none",
            PrivacyLevel::Low => "low",
            PrivacyLevel::Medium => "medium",
            PrivacyLevel::High => "high",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PrivacyLevel::NoPrivacy => "No Privacy",
            PrivacyLevel::Low => "Low Privacy",
            PrivacyLevel::Medium => "Medium Privacy",
            PrivacyLevel::High => "High Privacy",
        }
    }

    pub fn transformation(self) -> &'static str {
        match self {
            PrivacyLevel::NoPrivacy => "Text",
            PrivacyLevel::Low => "Shuffled",
            PrivacyLevel::Medium => "List of Vectors (LoV)",
            PrivacyLevel::High => "Image Vectors (IV)",
        }
    }

    /// Levels whose payload must never carry source text.
    pub fn hides_text(self) -> bool {
        matches!(self, PrivacyLevel::Medium | PrivacyLevel::High)
    }
}

impl fmt::Display for PrivacyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrivacyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "none" | "no" | "text" => Ok(PrivacyLevel::NoPrivacy),
            "low" | "shuffled" => Ok(PrivacyLevel::Low),
            "medium" | "lov" => Ok(PrivacyLevel::Medium),
            "high" | "iv" => Ok(PrivacyLevel::High),
            other => Err(Error::domain(format!("unknown privacy level {other:?}"))),
        }
    }
}

fn exponent(n_words: i64) -> Result<u32> {
    u32::try_from(n_words)
        .map_err(|_| Error::domain(format!("word count must be a non-negative u32, got {n_words}")))
}

/// `(101^8)^n`: every element of every word vector free over its 101 values.
pub fn theoretical_permutations(n_words: i64) -> Result<BigUint> {
    let n = exponent(n_words)?;
    let per_word = BigUint::from(RESOLUTION + 1).pow(EMOTION_COUNT as u32);
    Ok(per_word.pow(n))
}

/// `d^n` where `d` is the number of distinct vectors in the lexicon.
pub fn lexicon_permutations(n_words: i64, lexicon: &Lexicon) -> Result<BigUint> {
    if lexicon.is_empty() {
        return Err(Error::domain("lexicon is empty"));
    }
    distinct_permutations(n_words, lexicon.stats().distinct_vector_count)
}

pub fn distinct_permutations(n_words: i64, distinct_vectors: usize) -> Result<BigUint> {
    let n = exponent(n_words)?;
    Ok(BigUint::from(distinct_vectors).pow(n))
}

/// `log10` of a big integer; exact head digits, so it stays accurate far
/// beyond `f64` range.
pub fn log10(value: &BigUint) -> f64 {
    if value.is_one() || value.bits() == 0 {
        return 0.0;
    }
    let digits = value.to_string();
    let head_len = digits.len().min(17);
    let head: f64 = digits[..head_len].parse().unwrap_or(1.0);
    head.log10() + (digits.len() - head_len) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub n_words: u32,
    #[serde(with = "biguint_string")]
    pub theoretical_count: BigUint,
    #[serde(with = "biguint_string")]
    pub lexicon_count: BigUint,
    pub distinct_vectors: usize,
    pub level: PrivacyLevel,
    pub theoretical_log10: f64,
    pub lexicon_log10: f64,
}

impl PrivacyReport {
    pub fn new(n_words: i64, lexicon: &Lexicon, level: PrivacyLevel) -> Result<Self> {
        let theoretical_count = theoretical_permutations(n_words)?;
        let lexicon_count = lexicon_permutations(n_words, lexicon)?;
        Ok(PrivacyReport {
            n_words: exponent(n_words)?,
            theoretical_log10: log10(&theoretical_count),
            lexicon_log10: log10(&lexicon_count),
            theoretical_count,
            lexicon_count,
            distinct_vectors: lexicon.stats().distinct_vector_count,
            level,
        })
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<28} {}\n", "words", self.n_words));
        out.push_str(&format!(
            "{:<28} {} ({})\n",
            "level",
            self.level.label(),
            self.level.transformation()
        ));
        out.push_str(&format!("{:<28} {}\n", "distinct lexicon vectors", self.distinct_vectors));
        out.push_str(&format!(
            "{:<28} {} (10^{:.2})\n",
            "theoretical permutations", self.theoretical_count, self.theoretical_log10
        ));
        out.push_str(&format!(
            "{:<28} {} (10^{:.2})\n",
            "lexicon permutations", self.lexicon_count, self.lexicon_log10
        ));
        out.push_str(&format!(
            "{:<28} 10^{:.0}\n",
            "256-bit key space (approx)", ENCRYPTION_256_LOG10
        ));
        out
    }

    pub fn lexicon_count_u64(&self) -> Option<u64> {
        self.lexicon_count.to_u64()
    }
}

mod biguint_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
