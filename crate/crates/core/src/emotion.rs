//! The eight basic emotions and the fixed-resolution vectors built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const EMOTION_COUNT: usize = 8;

/// Steps per unit. Vector elements carry two decimals, so each element takes
/// one of `RESOLUTION + 1` values.
pub const RESOLUTION: u32 = 100;

/// Plutchik basic emotion. Declaration order is the vector axis order and
/// the tie-break order used by every argmax in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anticipation,
    Joy,
    Trust,
    Fear,
    Sadness,
    Disgust,
    Anger,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; EMOTION_COUNT] = [
        Emotion::Anticipation,
        Emotion::Joy,
        Emotion::Trust,
        Emotion::Fear,
        Emotion::Sadness,
        Emotion::Disgust,
        Emotion::Anger,
        Emotion::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Emotion> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anticipation => "anticipation",
            Emotion::Joy => "joy",
            Emotion::Trust => "trust",
            Emotion::Fear => "fear",
            Emotion::Sadness => "sadness",
            Emotion::Disgust => "disgust",
            Emotion::Anger => "anger",
            Emotion::Surprise => "surprise",
        }
    }

    /// Column header used in vector tables.
    pub fn short_name(self) -> &'static str {
        match self {
            Emotion::Anticipation => "ant",
            Emotion::Joy => "joy",
            Emotion::Trust => "tru",
            Emotion::Fear => "fear",
            Emotion::Sadness => "sad",
            Emotion::Disgust => "dis",
            Emotion::Anger => "ang",
            Emotion::Surprise => "sur",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_lowercase();
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| Error::UnknownAnswer(s.to_string()))
    }
}

/// Index of the largest score; ties go to the earliest emotion.
pub fn argmax(scores: &[f64; EMOTION_COUNT]) -> Emotion {
    let mut best = 0;
    for k in 1..EMOTION_COUNT {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    Emotion::ALL[best]
}

/// Eight emotion intensities in `[0, 1]` stored in hundredths.
///
/// Storing the integer steps keeps equality, hashing and distinct-vector
/// counting exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct EmotionVector([u8; EMOTION_COUNT]);

impl EmotionVector {
    pub const ZERO: EmotionVector = EmotionVector([0; EMOTION_COUNT]);

    pub fn from_hundredths(steps: [u8; EMOTION_COUNT]) -> Result<Self> {
        if let Some(bad) = steps.iter().find(|&&s| u32::from(s) > RESOLUTION) {
            return Err(Error::domain(format!(
                "vector element {bad}/100 exceeds 1"
            )));
        }
        Ok(EmotionVector(steps))
    }

    /// Builds a vector from real values, rounding half-up to two decimals.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() != EMOTION_COUNT {
            return Err(Error::Dimension {
                expected: EMOTION_COUNT,
                got: values.len(),
            });
        }
        let mut steps = [0u8; EMOTION_COUNT];
        for (slot, &v) in steps.iter_mut().zip(values) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("vector element {v} outside [0, 1]")));
            }
            *slot = round_half_up(v * f64::from(RESOLUTION)) as u8;
        }
        Ok(EmotionVector(steps))
    }

    pub fn hundredths(&self) -> [u8; EMOTION_COUNT] {
        self.0
    }

    pub fn get(&self, emotion: Emotion) -> f64 {
        f64::from(self.0[emotion.index()]) / f64::from(RESOLUTION)
    }

    pub fn values(&self) -> [f64; EMOTION_COUNT] {
        self.0.map(|s| f64::from(s) / f64::from(RESOLUTION))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&s| s == 0)
    }

    /// Multiplies every element by `weight` and re-rounds to two decimals.
    pub fn scaled(&self, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::domain(format!("weight {weight} outside [0, 1]")));
        }
        Ok(EmotionVector(
            self.0
                .map(|s| round_half_up(f64::from(s) * weight).min(f64::from(s)) as u8),
        ))
    }
}

impl fmt::Display for EmotionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, v) in self.values().iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

impl Serialize for EmotionVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.values().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EmotionVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        EmotionVector::from_values(&values).map_err(serde::de::Error::custom)
    }
}

// Products like 100 * 0.48 land a hair below the integer in binary, so a
// small tolerance is applied before flooring.
pub(crate) fn round_half_up(x: f64) -> f64 {
    (x + 0.5 + 1e-9).floor()
}
