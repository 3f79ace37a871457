//! Serving policy and submission rules over a set of task bundles.
//!
//! All state sits behind one mutex, so `next_item` and
//! `submit_annotation` are linearizable and the store has a single writer.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use privlabel_core::{AnnotationRecord, PrivacyLevel};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::bundle::{AnswerOption, TaskBundle};
use crate::error::{HubError, Result};
use crate::store::{AnnotationStore, JoinEvent};

/// How long a served item stays reserved for its contributor.
pub const DEFAULT_LEASE: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServedItem {
    pub item_id: String,
    pub kind: &'static str,
    pub content_type: String,
    pub body: Vec<u8>,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextItem {
    Item(ServedItem),
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ack {
    Recorded,
    /// Same answer submitted again; nothing appended.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub source: String,
    pub level: PrivacyLevel,
    pub question: String,
    pub answers: Vec<AnswerOption>,
    pub items: usize,
    pub target_annotations: usize,
}

struct TaskState {
    bundle: TaskBundle,
    counts: Vec<usize>,
    answers: HashMap<String, HashMap<usize, String>>,
    leases: HashMap<String, (usize, Instant)>,
}

impl TaskState {
    fn new(bundle: TaskBundle) -> Self {
        TaskState {
            counts: vec![0; bundle.items.len()],
            answers: HashMap::new(),
            leases: HashMap::new(),
            bundle,
        }
    }

    fn record(&mut self, idx: usize, contributor: &str, answer: &str) {
        self.counts[idx] += 1;
        self.answers
            .entry(contributor.to_string())
            .or_default()
            .insert(idx, answer.to_string());
    }

    fn answered_by(&self, contributor: &str) -> usize {
        self.answers.get(contributor).map_or(0, HashMap::len)
    }

    fn has_answered(&self, contributor: &str, idx: usize) -> bool {
        self.answers
            .get(contributor)
            .is_some_and(|a| a.contains_key(&idx))
    }

    fn live_leases(&self, now: Instant, ttl: Duration, except: &str) -> Vec<usize> {
        let mut held = vec![0; self.counts.len()];
        for (who, (idx, at)) in &self.leases {
            if who != except && now.duration_since(*at) < ttl {
                held[*idx] += 1;
            }
        }
        held
    }

    fn serve(&self, idx: usize, contributor: &str) -> ServedItem {
        let item = &self.bundle.items[idx];
        ServedItem {
            item_id: item.item_id.clone(),
            kind: match item.payload {
                privlabel_core::transform::ItemPayload::Text { .. } => "text",
                privlabel_core::transform::ItemPayload::Tokens { .. } => "tokens",
                privlabel_core::transform::ItemPayload::Matrix { .. } => "matrix",
                privlabel_core::transform::ItemPayload::Image { .. } => "image",
            },
            content_type: item.content_type.clone(),
            body: item.body.clone(),
            progress: Progress {
                answered: self.answered_by(contributor),
                total: self.bundle.items.len(),
            },
        }
    }
}

struct HubState {
    tasks: BTreeMap<String, TaskState>,
    store: AnnotationStore,
}

pub struct TaskHub {
    state: Mutex<HubState>,
    lease: Duration,
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl TaskHub {
    /// Loads bundles and replays the store's records into per-item counts.
    pub fn new(bundles: Vec<TaskBundle>, store: AnnotationStore) -> Result<Self> {
        let mut tasks = BTreeMap::new();
        for bundle in bundles {
            let id = bundle.task_id.clone();
            if tasks.insert(id.clone(), TaskState::new(bundle)).is_some() {
                return Err(HubError::Bundle(format!("duplicate task id {id:?}")));
            }
        }
        for r in store.records() {
            if let Some(task) = tasks.get_mut(&r.task_id) {
                if let Some((idx, _)) = task.bundle.item(&r.item_id) {
                    if !task.has_answered(&r.contributor_id, idx) {
                        task.record(idx, &r.contributor_id, &r.answer);
                    }
                }
            }
        }
        Ok(TaskHub {
            state: Mutex::new(HubState { tasks, store }),
            lease: DEFAULT_LEASE,
        })
    }

    pub fn with_lease(mut self, lease: Duration) -> Self {
        self.lease = lease;
        self
    }

    fn lock(&self) -> MutexGuard<'_, HubState> {
        // a panic mid-request leaves no partial write behind: state changes
        // follow the durable append
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn tasks(&self) -> Vec<TaskSummary> {
        self.lock()
            .tasks
            .values()
            .map(|t| TaskSummary {
                task_id: t.bundle.task_id.clone(),
                source: t.bundle.source.clone(),
                level: t.bundle.level,
                question: t.bundle.question.clone(),
                answers: t.bundle.answers.clone(),
                items: t.bundle.items.len(),
                target_annotations: t.bundle.target_annotations,
            })
            .collect()
    }

    fn register(state: &mut HubState, task_id: &str, contributor: &str) -> Result<()> {
        let source = state
            .tasks
            .get(task_id)
            .ok_or_else(|| HubError::not_found("task", task_id))?
            .bundle
            .source
            .clone();
        match state.store.joined_task(contributor, &source) {
            Some(t) if t == task_id => Ok(()),
            Some(other) => Err(HubError::Exclusivity {
                contributor: contributor.to_string(),
                joined_task: other.to_string(),
            }),
            None => state.store.append_join(JoinEvent {
                contributor_id: contributor.to_string(),
                task_id: task_id.to_string(),
                source,
                timestamp: now_millis(),
            }),
        }
    }

    /// Issues a fresh opaque contributor token bound to the task.
    pub fn join(&self, task_id: &str) -> Result<String> {
        let token = Uuid::new_v4().simple().to_string();
        Self::register(&mut self.lock(), task_id, &token)?;
        Ok(token)
    }

    /// Least-annotated item the contributor has not answered, reserving it
    /// so concurrent contributors cannot push it past the target.
    pub fn next_item(&self, task_id: &str, contributor: &str) -> Result<NextItem> {
        if contributor.trim().is_empty() {
            return Err(HubError::Validation("contributor token is empty".into()));
        }
        let mut state = self.lock();
        Self::register(&mut state, task_id, contributor)?;
        let task = state
            .tasks
            .get_mut(task_id)
            .ok_or_else(|| HubError::not_found("task", task_id))?;
        let now = Instant::now();
        let target = task.bundle.target_annotations;
        let held = task.live_leases(now, self.lease, contributor);

        if let Some(&(idx, _)) = task.leases.get(contributor) {
            if !task.has_answered(contributor, idx) && task.counts[idx] + held[idx] < target {
                task.leases.insert(contributor.to_string(), (idx, now));
                return Ok(NextItem::Item(task.serve(idx, contributor)));
            }
        }

        let pick = (0..task.counts.len())
            .filter(|&i| !task.has_answered(contributor, i))
            .map(|i| (task.counts[i] + held[i], i))
            .filter(|&(load, _)| load < target)
            .min();
        match pick {
            Some((_, idx)) => {
                task.leases.insert(contributor.to_string(), (idx, now));
                Ok(NextItem::Item(task.serve(idx, contributor)))
            }
            None => {
                task.leases.remove(contributor);
                Ok(NextItem::Done)
            }
        }
    }

    pub fn submit_annotation(&self, task_id: &str, contributor: &str, item_id: &str, answer: &str) -> Result<Ack> {
        let mut state = self.lock();
        let HubState { tasks, store } = &mut *state;
        let task = tasks
            .get_mut(task_id)
            .ok_or_else(|| HubError::not_found("task", task_id))?;
        let (idx, item) = task
            .bundle
            .item(item_id)
            .ok_or_else(|| HubError::not_found("item", item_id))?;
        if store.joined_task(contributor, &task.bundle.source) != Some(task_id) {
            return Err(HubError::not_found("contributor", contributor));
        }
        let answer = task
            .bundle
            .canonical_answer(answer)
            .ok_or_else(|| HubError::Validation(format!("answer {answer:?} is not in the task's answer set")))?
            .to_string();

        if let Some(previous) = task.answers.get(contributor).and_then(|a| a.get(&idx)) {
            return if *previous == answer {
                Ok(Ack::Duplicate)
            } else {
                Err(HubError::Conflict(format!(
                    "item {item_id} already answered with {previous:?}"
                )))
            };
        }
        if task.leases.get(contributor).map(|l| l.0) != Some(idx) {
            return Err(HubError::Conflict(format!(
                "item {item_id} was not served to this contributor"
            )));
        }
        if task.counts[idx] >= task.bundle.target_annotations {
            task.leases.remove(contributor);
            return Err(HubError::Conflict(format!("item {item_id} already has its annotations")));
        }

        let record = AnnotationRecord {
            task_id: task_id.to_string(),
            item_id: item_id.to_string(),
            sentence_id: item.sentence_id.clone(),
            source: task.bundle.source.clone(),
            contributor_id: contributor.to_string(),
            level: task.bundle.level,
            answer: answer.clone(),
            is_gold: item.is_gold,
            gold_answer: item.gold_answer,
            timestamp: now_millis(),
        };
        store.append_record(record)?;
        task.record(idx, contributor, &answer);
        task.leases.remove(contributor);
        Ok(Ack::Recorded)
    }

    /// Annotation counts per item id, for one task.
    pub fn item_counts(&self, task_id: &str) -> Result<BTreeMap<String, usize>> {
        let state = self.lock();
        let task = state
            .tasks
            .get(task_id)
            .ok_or_else(|| HubError::not_found("task", task_id))?;
        Ok(task
            .bundle
            .items
            .iter()
            .zip(&task.counts)
            .map(|(i, &c)| (i.item_id.clone(), c))
            .collect())
    }

    pub fn export_records(&self, task_id: Option<&str>) -> Vec<AnnotationRecord> {
        self.lock().store.export(task_id).cloned().collect()
    }

    pub fn write_export(&self, task_id: Option<&str>, out: impl std::io::Write) -> Result<usize> {
        self.lock().store.write_export(task_id, out)
    }
}
