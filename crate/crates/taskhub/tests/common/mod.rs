#![allow(dead_code)]

use privlabel_core::transform::{GoldSentence, Sentence};
use privlabel_core::{Emotion, EmotionVector, Lexicon};

pub fn lexicon() -> Lexicon {
    let v = |vals: [f64; 8]| EmotionVector::from_values(&vals).unwrap();
    Lexicon::from_vectors(
        "fixture",
        [
            ("happy", v([0.2, 1., 0.3, 0., 0., 0., 0., 0.1])),
            ("storm", v([0., 0., 0., 1., 0.4, 0., 0.2, 0.3])),
            ("corruption", v([0., 0., 0., 0.33, 0.33, 0.33, 0., 0.])),
            ("betrayal", v([0., 0., 0., 0.1, 0.6, 0.5, 1., 0.2])),
            ("gift", v([0.8, 0.9, 0.4, 0., 0., 0., 0., 1.])),
        ],
    )
    .unwrap()
}

pub fn corpus(n: usize) -> Vec<Sentence> {
    let words = ["happy", "storm", "corruption", "betrayal", "gift"];
    (0..n)
        .map(|i| {
            let text = format!(
                "The {} arrived near the {} village, quietly",
                words[i % 5],
                words[(i / 5) % 5]
            );
            Sentence::new(format!("book-{i:03}"), "book", text)
        })
        .collect()
}

pub fn gold(n: usize) -> Vec<GoldSentence> {
    (0..n)
        .map(|i| GoldSentence {
            sentence: Sentence::new(format!("gold-{i}"), "book", "a happy happy gift"),
            answer: Emotion::Joy,
        })
        .collect()
}
