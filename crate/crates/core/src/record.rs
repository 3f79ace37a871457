//! The persisted unit of crowd work.

use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;
use crate::privacy::PrivacyLevel;

/// One contributor's answer to one item. `answer` is an emotion name, or a
/// palette colour name for image tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub task_id: String,
    pub item_id: String,
    pub sentence_id: String,
    pub source: String,
    pub contributor_id: String,
    pub level: PrivacyLevel,
    pub answer: String,
    pub is_gold: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<Emotion>,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}
