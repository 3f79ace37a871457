//! Privacy-preserving emotion labelling primitives.
//!
//! Sentences are rendered at one of four privacy levels (plain text,
//! shuffled tokens, a list of per-token emotion vectors, or an image of
//! those vectors). The crate also counts how many sentences a rendering
//! could stand for, predicts sentence labels from term vectors, and
//! analyses crowd annotations collected over the renderings.

pub mod aggregate;
pub mod analyze;
pub mod emotion;
pub mod error;
pub mod lexicon;
pub mod privacy;
pub mod record;
pub mod render;
pub mod text;
pub mod transform;

pub use emotion::{Emotion, EmotionVector, EMOTION_COUNT};
pub use error::{Error, Result};
pub use lexicon::{Lexicon, LexiconEntry, LexiconStats};
pub use privacy::PrivacyLevel;
pub use record::AnnotationRecord;
