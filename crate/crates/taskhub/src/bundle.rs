//! Task bundles: one privacy level of one source's corpus, with injected
//! gold items, in a seeded random order.
//!
//! On disk a bundle is a directory holding `index.json` and one payload
//! file per item under `items/`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use privlabel_core::render::Palette;
use privlabel_core::transform::{
    derive_seed, transform_at_level, GoldSentence, ItemPayload, LoVMatrix, Sentence, TransformOptions,
};
use privlabel_core::{Emotion, Error as CoreError, Lexicon, PrivacyLevel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HubError, Result};

pub const DEFAULT_TARGET_ANNOTATIONS: usize = 10;
pub const DEFAULT_GOLD_FRACTION: f64 = 0.10;
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: String,
    /// `#rrggbb` swatch for colour answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swatch: Option<String>,
}

/// The eight emotions, or the eight palette colours for image tasks.
pub fn answer_set(level: PrivacyLevel, palette: &Palette) -> Vec<AnswerOption> {
    if level == PrivacyLevel::High {
        palette
            .colours()
            .iter()
            .map(|c| AnswerOption {
                label: c.name.clone(),
                swatch: Some(c.hex()),
            })
            .collect()
    } else {
        Emotion::ALL
            .iter()
            .map(|e| AnswerOption {
                label: e.name().to_string(),
                swatch: None,
            })
            .collect()
    }
}

pub fn question_for(level: PrivacyLevel) -> &'static str {
    if level == PrivacyLevel::High {
        "What is the dominant colour?"
    } else {
        "What is the dominant emotion?"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleItem {
    pub item_id: String,
    pub sentence_id: String,
    pub is_gold: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<Emotion>,
    pub payload: ItemPayload,
    /// Per-item payload file, relative to the bundle directory.
    pub file: String,
    /// Body served to annotators.
    #[serde(skip)]
    pub body: Vec<u8>,
    #[serde(skip)]
    pub content_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBundle {
    pub task_id: String,
    pub source: String,
    pub level: PrivacyLevel,
    pub question: String,
    pub answers: Vec<AnswerOption>,
    pub target_annotations: usize,
    pub seed: u64,
    pub gold_count: usize,
    /// Gold items over corpus items.
    pub gold_fraction: f64,
    /// Sentences left out because they had nothing to draw.
    pub excluded_sentences: Vec<String>,
    pub palette: Palette,
    pub items: Vec<BundleItem>,
}

#[derive(Debug, Clone)]
pub struct BundleOptions {
    pub task_id: Option<String>,
    /// Restrict the corpus to one source; required when it mixes sources.
    pub source: Option<String>,
    pub target_annotations: usize,
    pub gold_fraction: f64,
    pub transform: TransformOptions,
}

impl Default for BundleOptions {
    fn default() -> Self {
        BundleOptions {
            task_id: None,
            source: None,
            target_annotations: DEFAULT_TARGET_ANNOTATIONS,
            gold_fraction: DEFAULT_GOLD_FRACTION,
            transform: TransformOptions::default(),
        }
    }
}

fn pick_source(corpus: &[Sentence], wanted: Option<&str>) -> Result<String> {
    if let Some(s) = wanted {
        return Ok(s.to_string());
    }
    let sources: BTreeSet<&str> = corpus.iter().map(|s| s.source.as_str()).collect();
    match sources.len() {
        1 => Ok(sources.into_iter().next().unwrap_or_default().to_string()),
        _ => Err(HubError::Bundle(format!(
            "corpus mixes sources {sources:?}; choose one"
        ))),
    }
}

fn extension(payload: &ItemPayload) -> &'static str {
    match payload {
        ItemPayload::Text { .. } => "txt",
        ItemPayload::Tokens { .. } => "json",
        ItemPayload::Matrix { .. } => "csv",
        ItemPayload::Image { .. } => "png",
    }
}

struct Draft {
    sentence_id: String,
    gold_answer: Option<Emotion>,
    payload: ItemPayload,
    content_type: &'static str,
    body: Vec<u8>,
}

pub fn build_bundle(
    corpus: &[Sentence],
    lexicon: &Lexicon,
    level: PrivacyLevel,
    gold_items: &[GoldSentence],
    seed: u64,
    options: &BundleOptions,
) -> Result<TaskBundle> {
    let source = pick_source(corpus, options.source.as_deref())?;
    let sentences: Vec<&Sentence> = corpus.iter().filter(|s| s.source == source).collect();
    if sentences.is_empty() {
        return Err(HubError::Bundle(format!("no sentences for source {source:?}")));
    }
    if options.target_annotations == 0 {
        return Err(HubError::Validation("target annotations must be positive".into()));
    }
    if !(0.0..=1.0).contains(&options.gold_fraction) {
        return Err(HubError::Validation("gold fraction must lie in [0, 1]".into()));
    }
    let task_id = options
        .task_id
        .clone()
        .unwrap_or_else(|| format!("{source}-{level}"));

    let wanted_gold = (options.gold_fraction * sentences.len() as f64).round() as usize;
    let gold: Vec<(&Sentence, Option<Emotion>)> = gold_items
        .iter()
        .take(wanted_gold)
        .map(|g| (&g.sentence, Some(g.answer)))
        .collect();

    let mut excluded = Vec::new();
    let mut drafts = Vec::new();
    let mut corpus_items = 0;
    for (sentence, gold_answer) in sentences.iter().map(|s| (*s, None)).chain(gold) {
        let transform = TransformOptions {
            seed: derive_seed(seed, &sentence.id),
            ..options.transform.clone()
        };
        let item = match transform_at_level(sentence, level, lexicon, &transform) {
            Ok(item) => item,
            Err(CoreError::EmptyImage { sentence_id }) => {
                warn!("{task_id}: sentence {sentence_id} has no emotional token, left out of the image task");
                excluded.push(sentence_id);
                continue;
            }
            Err(CoreError::Domain(msg)) if level == PrivacyLevel::Low => {
                warn!("{task_id}: {msg}, left out");
                excluded.push(sentence.id.clone());
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (content_type, body) = item.payload_body()?;
        corpus_items += usize::from(gold_answer.is_none());
        drafts.push(Draft {
            sentence_id: sentence.id.clone(),
            gold_answer,
            payload: item.payload(""),
            content_type,
            body,
        });
    }
    if corpus_items == 0 {
        return Err(HubError::Bundle(format!(
            "{task_id}: every sentence was excluded, nothing to annotate"
        )));
    }

    drafts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let gold_count = drafts.iter().filter(|d| d.gold_answer.is_some()).count();
    let items = drafts
        .into_iter()
        .enumerate()
        .map(|(pos, d)| {
            // ids are assigned after shuffling so they say nothing about gold status
            let item_id = format!("{task_id}-{pos:04}");
            let file = format!("items/{item_id}.{}", extension(&d.payload));
            let payload = match d.payload {
                ItemPayload::Image { .. } => ItemPayload::Image { file: file.clone() },
                other => other,
            };
            BundleItem {
                item_id,
                sentence_id: d.sentence_id,
                is_gold: d.gold_answer.is_some(),
                gold_answer: d.gold_answer,
                payload,
                file,
                body: d.body,
                content_type: d.content_type.to_string(),
            }
        })
        .collect();

    info!("{task_id}: {corpus_items} corpus items, {gold_count} gold, {} excluded", excluded.len());
    Ok(TaskBundle {
        task_id,
        source,
        level,
        question: question_for(level).to_string(),
        answers: answer_set(level, &options.transform.palette),
        target_annotations: options.target_annotations,
        seed,
        gold_count,
        gold_fraction: gold_count as f64 / corpus_items as f64,
        excluded_sentences: excluded,
        palette: options.transform.palette.clone(),
        items,
    })
}

impl TaskBundle {
    pub fn item(&self, item_id: &str) -> Option<(usize, &BundleItem)> {
        self.items.iter().enumerate().find(|(_, i)| i.item_id == item_id)
    }

    /// Canonical label for an answer, if it belongs to this task's set.
    pub fn canonical_answer(&self, answer: &str) -> Option<&str> {
        let answer = answer.trim();
        self.answers
            .iter()
            .find(|a| a.label.eq_ignore_ascii_case(answer))
            .map(|a| a.label.as_str())
    }

    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("items"))?;
        for item in &self.items {
            fs::write(dir.join(&item.file), &item.body)?;
        }
        fs::write(dir.join(INDEX_FILE), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut bundle: TaskBundle = serde_json::from_slice(&fs::read(dir.join(INDEX_FILE))?)?;
        for item in &mut bundle.items {
            let (content_type, body) = match &item.payload {
                ItemPayload::Text { text } => ("text/plain; charset=utf-8", text.clone().into_bytes()),
                ItemPayload::Tokens { tokens } => ("application/json", serde_json::to_vec(tokens)?),
                ItemPayload::Matrix { rows } => {
                    let lov = LoVMatrix {
                        sentence_id: item.sentence_id.clone(),
                        rows: rows.clone(),
                        weighted: false,
                    };
                    ("text/csv", lov.to_csv().into_bytes())
                }
                ItemPayload::Image { file } => ("image/png", fs::read(dir.join(file))?),
            };
            item.content_type = content_type.to_string();
            item.body = body;
        }
        Ok(bundle)
    }
}

/// Bundles in `dir`: the directory itself if it holds an index, otherwise
/// every immediate subdirectory that does, in name order.
pub fn load_bundles(dir: impl AsRef<Path>) -> Result<Vec<TaskBundle>> {
    let dir = dir.as_ref();
    if dir.join(INDEX_FILE).is_file() {
        return Ok(vec![TaskBundle::load(dir)?]);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(INDEX_FILE).is_file())
        .collect();
    subdirs.sort();
    subdirs.iter().map(TaskBundle::load).collect()
}
