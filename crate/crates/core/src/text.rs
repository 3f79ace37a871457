//! Tokenization and stemming shared by lexicon loading, lookup and TF-IDF.

use std::sync::LazyLock;

use rust_stemmers::{Algorithm, Stemmer};

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// Lowercases, turns every non-alphanumeric character into a separator and
/// splits on whitespace. Token order follows the text.
pub fn preprocess(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Lowercased English (Porter family) stem of a single token.
pub fn stem(token: &str) -> String {
    let lower = token.trim().to_lowercase();
    STEMMER.stem(&lower).into_owned()
}
