//! Append-only annotation log.
//!
//! Each line is one JSON event: a contributor joining a task, or an
//! annotation record. An event is flushed and synced before the append
//! returns. On open the log is replayed; a torn final line (no trailing
//! newline) is an unacknowledged write and is cut off.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use log::warn;
use privlabel_core::AnnotationRecord;
use serde::{Deserialize, Serialize};

use crate::error::{HubError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinEvent {
    pub contributor_id: String,
    pub task_id: String,
    pub source: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum LogEntry {
    Join(JoinEvent),
    Annotation(AnnotationRecord),
}

#[derive(Debug)]
pub struct AnnotationStore {
    file: Option<File>,
    path: Option<PathBuf>,
    records: Vec<AnnotationRecord>,
    /// (contributor, source) → task first joined.
    registry: HashMap<(String, String), String>,
}

impl AnnotationStore {
    /// Store that lives only in memory.
    pub fn in_memory() -> Self {
        AnnotationStore {
            file: None,
            path: None,
            records: Vec::new(),
            registry: HashMap::new(),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut store = AnnotationStore {
            file: None,
            path: Some(path),
            ..AnnotationStore::in_memory()
        };

        let mut content = Vec::new();
        file.read_to_end(&mut content)?;
        let mut good_len = 0usize;
        let mut reader = BufReader::new(content.as_slice());
        let mut line = String::new();
        let mut line_no = 0;
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let complete = line.ends_with('\n');
            if line.trim().is_empty() {
                good_len += n;
                continue;
            }
            if !complete {
                warn!("store: dropping torn trailing write at line {line_no}");
                break;
            }
            let entry = serde_json::from_str::<LogEntry>(line.trim_end()).map_err(|e| HubError::Corrupt {
                line: line_no,
                message: e.to_string(),
            })?;
            store.apply(entry);
            good_len += n;
        }
        if good_len < content.len() {
            file.set_len(good_len as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        store.file = Some(file);
        Ok(store)
    }

    fn apply(&mut self, entry: LogEntry) {
        match entry {
            LogEntry::Join(j) => {
                self.registry
                    .entry((j.contributor_id, j.source))
                    .or_insert(j.task_id);
            }
            LogEntry::Annotation(r) => {
                self.registry
                    .entry((r.contributor_id.clone(), r.source.clone()))
                    .or_insert_with(|| r.task_id.clone());
                self.records.push(r);
            }
        }
    }

    fn append(&mut self, entry: LogEntry) -> Result<()> {
        if let Some(file) = &mut self.file {
            let mut line = serde_json::to_vec(&entry)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        self.apply(entry);
        Ok(())
    }

    pub fn append_join(&mut self, join: JoinEvent) -> Result<()> {
        self.append(LogEntry::Join(join))
    }

    /// Durably appends the record; returns once it is on disk.
    pub fn append_record(&mut self, record: AnnotationRecord) -> Result<()> {
        self.append(LogEntry::Annotation(record))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn joined_task(&self, contributor: &str, source: &str) -> Option<&str> {
        self.registry
            .get(&(contributor.to_string(), source.to_string()))
            .map(String::as_str)
    }

    /// Records in append order, optionally for one task.
    pub fn export<'a>(&'a self, task_id: Option<&'a str>) -> impl Iterator<Item = &'a AnnotationRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| task_id.is_none_or(|t| r.task_id == t))
    }

    /// Writes the export as line-delimited JSON records.
    pub fn write_export(&self, task_id: Option<&str>, mut out: impl Write) -> Result<usize> {
        let mut n = 0;
        for r in self.export(task_id) {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
            n += 1;
        }
        out.flush()?;
        Ok(n)
    }
}

/// Reads an exported record file or a raw store log; join events are skipped.
pub fn read_records(source: impl Read) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |e: serde_json::Error| HubError::Corrupt {
            line: i + 1,
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(corrupt)?;
        if value.get("event").is_some() {
            if let LogEntry::Annotation(r) = serde_json::from_value(value).map_err(corrupt)? {
                out.push(r);
            }
        } else {
            out.push(serde_json::from_value(value).map_err(corrupt)?);
        }
    }
    Ok(out)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    read_records(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use privlabel_core::PrivacyLevel;

    fn record(i: usize) -> AnnotationRecord {
        AnnotationRecord {
            task_id: if i.is_multiple_of(2) { "a" } else { "b" }.into(),
            item_id: format!("item{i}"),
            sentence_id: format!("s{i}"),
            source: "book".into(),
            contributor_id: format!("c{i}"),
            level: PrivacyLevel::Low,
            answer: "joy".into(),
            is_gold: false,
            gold_answer: None,
            timestamp: i as u64,
        }
    }

    #[test]
    fn raw_log_reads_as_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut store = AnnotationStore::open(&path).unwrap();
        store
            .append_join(JoinEvent {
                contributor_id: "c0".into(),
                task_id: "a".into(),
                source: "book".into(),
                timestamp: 0,
            })
            .unwrap();
        store.append_record(record(0)).unwrap();
        store.append_record(record(2)).unwrap();
        assert_eq!(load_records(&path).unwrap(), [record(0), record(2)]);
    }

    #[test]
    fn empty_store_exports_nothing() {
        let store = AnnotationStore::in_memory();
        let mut out = Vec::new();
        assert_eq!(store.write_export(None, &mut out).unwrap(), 0);
        assert!(out.is_empty());
    }

    #[test]
    fn export_keeps_submission_order() {
        let mut store = AnnotationStore::in_memory();
        for i in 0..3 {
            store.append_record(record(i)).unwrap();
        }
        let mut out = Vec::new();
        store.write_export(None, &mut out).unwrap();
        let back = read_records(out.as_slice()).unwrap();
        assert_eq!(back, (0..3).map(record).collect::<Vec<_>>());
        assert_eq!(store.export(Some("a")).count(), 2);
    }

    #[test]
    fn records_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        {
            let mut store = AnnotationStore::open(&path).unwrap();
            store
                .append_join(JoinEvent {
                    contributor_id: "c9".into(),
                    task_id: "a".into(),
                    source: "book".into(),
                    timestamp: 1,
                })
                .unwrap();
            store.append_record(record(0)).unwrap();
            store.append_record(record(1)).unwrap();
        }
        let store = AnnotationStore::open(&path).unwrap();
        assert_eq!(store.records().len(), 2);
        assert_eq!(store.joined_task("c9", "book"), Some("a"));
        assert_eq!(store.joined_task("c1", "book"), Some("b"));
        assert_eq!(store.joined_task("c1", "news"), None);
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        {
            let mut store = AnnotationStore::open(&path).unwrap();
            store.append_record(record(0)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"annotation\",\"task_").unwrap();
        drop(f);
        {
            let mut store = AnnotationStore::open(&path).unwrap();
            assert_eq!(store.records().len(), 1);
            store.append_record(record(1)).unwrap();
        }
        let store = AnnotationStore::open(&path).unwrap();
        assert_eq!(store.records().len(), 2);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        std::fs::write(&path, "garbage\n{}\n").unwrap();
        assert!(matches!(AnnotationStore::open(&path), Err(HubError::Corrupt { line: 1, .. })));
    }
}
