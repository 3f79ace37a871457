//! Quality filtering and the distribution / difference / dominance analysis
//! of collected annotations, with Spearman correlation against plain text.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::NORMALIZATION_NOTE;
use crate::emotion::{Emotion, EMOTION_COUNT};
use crate::error::{Error, Result};
use crate::privacy::PrivacyLevel;
use crate::record::AnnotationRecord;
use crate::render::Palette;

pub const DEFAULT_CONFIDENCE_MIN: f64 = 0.90;
pub const DEFAULT_SPAM_MAX: f64 = 0.30;

/// Maps an answer label (emotion name or palette colour) to its emotion.
pub fn resolve_answer(answer: &str, palette: &Palette) -> Result<Emotion> {
    answer
        .parse::<Emotion>()
        .ok()
        .or_else(|| palette.emotion_for_colour(answer))
        .ok_or_else(|| Error::UnknownAnswer(answer.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpamOverride {
    pub source: String,
    pub level: PrivacyLevel,
    pub spam_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Contributors at or below this gold accuracy are dropped.
    pub confidence_min: f64,
    /// Contributors whose most frequent answer reaches this share are dropped.
    pub spam_max: f64,
    #[serde(default)]
    pub spam_overrides: Vec<SpamOverride>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            confidence_min: DEFAULT_CONFIDENCE_MIN,
            spam_max: DEFAULT_SPAM_MAX,
            spam_overrides: Vec::new(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.confidence_min) || !in_unit(self.spam_max) || !self.spam_overrides.iter().all(|o| in_unit(o.spam_max)) {
            return Err(Error::domain("filter thresholds must lie in [0, 1]"));
        }
        Ok(())
    }

    fn spam_threshold(&self, source: &str, level: PrivacyLevel) -> f64 {
        self.spam_overrides
            .iter()
            .find(|o| o.source == source && o.level == level)
            .map_or(self.spam_max, |o| o.spam_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    LowConfidence,
    Spam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributorStats {
    pub contributor_id: String,
    pub gold_seen: usize,
    pub gold_correct: usize,
    pub confidence: f64,
    pub answers: usize,
    pub mode_answer_fraction: f64,
    pub excluded: bool,
    pub reasons: Vec<ExclusionReason>,
}

/// Gold accuracy and answer concentration per contributor, in order of
/// first appearance. Exclusion flags are left unset.
pub fn contributor_stats(records: &[AnnotationRecord], palette: &Palette) -> Result<Vec<ContributorStats>> {
    struct Acc {
        gold_seen: usize,
        gold_correct: usize,
        counts: [usize; EMOTION_COUNT],
    }
    let mut order = Vec::new();
    let mut acc: HashMap<&str, Acc> = HashMap::new();
    for r in records {
        let answer = resolve_answer(&r.answer, palette)?;
        let slot = acc.entry(&r.contributor_id).or_insert_with(|| {
            order.push(r.contributor_id.as_str());
            Acc {
                gold_seen: 0,
                gold_correct: 0,
                counts: [0; EMOTION_COUNT],
            }
        });
        if r.is_gold {
            slot.gold_seen += 1;
            if r.gold_answer == Some(answer) {
                slot.gold_correct += 1;
            }
        } else {
            slot.counts[answer.index()] += 1;
        }
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let a = &acc[id];
            let answers: usize = a.counts.iter().sum();
            let mode = a.counts.iter().copied().max().unwrap_or(0);
            ContributorStats {
                contributor_id: id.to_string(),
                gold_seen: a.gold_seen,
                gold_correct: a.gold_correct,
                confidence: if a.gold_seen == 0 { 0.0 } else { a.gold_correct as f64 / a.gold_seen as f64 },
                answers,
                mode_answer_fraction: if answers == 0 { 0.0 } else { mode as f64 / answers as f64 },
                excluded: false,
                reasons: Vec::new(),
            }
        })
        .collect())
}

fn first_task_of(records: &[AnnotationRecord]) -> HashMap<&str, (&str, PrivacyLevel)> {
    let mut first = HashMap::new();
    for r in records {
        first
            .entry(r.contributor_id.as_str())
            .or_insert((r.source.as_str(), r.level));
    }
    first
}

/// Contributors whose confidence is strictly above the threshold.
pub fn confidence_survivors(
    records: &[AnnotationRecord],
    confidence_min: f64,
    palette: &Palette,
) -> Result<BTreeSet<String>> {
    Ok(contributor_stats(records, palette)?
        .into_iter()
        .filter(|s| s.confidence > confidence_min)
        .map(|s| s.contributor_id)
        .collect())
}

/// Contributors whose most frequent non-gold answer stays below the
/// spam threshold of their task.
pub fn spam_survivors(records: &[AnnotationRecord], config: &FilterConfig, palette: &Palette) -> Result<BTreeSet<String>> {
    let first = first_task_of(records);
    Ok(contributor_stats(records, palette)?
        .into_iter()
        .filter(|s| {
            let (source, level) = first[s.contributor_id.as_str()];
            s.mode_answer_fraction < config.spam_threshold(source, level)
        })
        .map(|s| s.contributor_id)
        .collect())
}

/// Drops low-confidence contributors and spammers. Both tests run on the
/// unfiltered input, so their order does not matter. The kept records never
/// include gold items.
pub fn filter_contributors(
    records: &[AnnotationRecord],
    config: &FilterConfig,
    palette: &Palette,
) -> Result<(Vec<AnnotationRecord>, Vec<ContributorStats>)> {
    config.validate()?;
    let first = first_task_of(records);
    let mut stats = contributor_stats(records, palette)?;
    for s in &mut stats {
        if s.confidence <= config.confidence_min {
            s.reasons.push(ExclusionReason::LowConfidence);
        }
        let (source, level) = first[s.contributor_id.as_str()];
        if s.mode_answer_fraction >= config.spam_threshold(source, level) {
            s.reasons.push(ExclusionReason::Spam);
        }
        s.excluded = !s.reasons.is_empty();
    }
    let kept_ids: BTreeSet<&str> = stats
        .iter()
        .filter(|s| !s.excluded)
        .map(|s| s.contributor_id.as_str())
        .collect();
    let kept = records
        .iter()
        .filter(|r| !r.is_gold && kept_ids.contains(r.contributor_id.as_str()))
        .cloned()
        .collect();
    Ok((kept, stats))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusivityViolation {
    pub contributor_id: String,
    pub source: String,
    /// Tasks in order of first appearance; only the first is analysed.
    pub tasks: Vec<String>,
}

fn tasks_per_contributor(records: &[AnnotationRecord]) -> Vec<((&str, &str), Vec<&str>)> {
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut tasks: HashMap<(&str, &str), Vec<&str>> = HashMap::new();
    for r in records {
        let key = (r.contributor_id.as_str(), r.source.as_str());
        let list = tasks.entry(key).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        if !list.contains(&r.task_id.as_str()) {
            list.push(&r.task_id);
        }
    }
    order.into_iter().map(|k| (k, tasks.remove(&k).unwrap_or_default())).collect()
}

/// Contributors found in more than one task of the same source.
pub fn enforce_task_exclusivity(records: &[AnnotationRecord]) -> Vec<ExclusivityViolation> {
    tasks_per_contributor(records)
        .into_iter()
        .filter(|(_, tasks)| tasks.len() > 1)
        .map(|((contributor, source), tasks)| ExclusivityViolation {
            contributor_id: contributor.to_string(),
            source: source.to_string(),
            tasks: tasks.into_iter().map(String::from).collect(),
        })
        .collect()
}

/// Keeps, per contributor and source, only the records of the first task.
pub fn retain_first_tasks(records: &[AnnotationRecord]) -> Vec<AnnotationRecord> {
    let first: HashMap<(&str, &str), &str> = tasks_per_contributor(records)
        .into_iter()
        .map(|(k, tasks)| (k, tasks[0]))
        .collect();
    records
        .iter()
        .filter(|r| first[&(r.contributor_id.as_str(), r.source.as_str())] == r.task_id)
        .cloned()
        .collect()
}

fn counts(records: impl Iterator<Item = Result<Emotion>>) -> Result<[usize; EMOTION_COUNT]> {
    let mut counts = [0; EMOTION_COUNT];
    for e in records {
        counts[e?.index()] += 1;
    }
    Ok(counts)
}

fn fractions(counts: &[usize; EMOTION_COUNT]) -> Option<[f64; EMOTION_COUNT]> {
    let total: usize = counts.iter().sum();
    (total > 0).then(|| counts.map(|c| c as f64 / total as f64))
}

/// Share of non-gold annotations per emotion at `level`; `None` when the
/// level has no annotations.
pub fn distribution(records: &[AnnotationRecord], level: PrivacyLevel, palette: &Palette) -> Result<Option<[f64; EMOTION_COUNT]>> {
    let c = counts(
        records
            .iter()
            .filter(|r| !r.is_gold && r.level == level)
            .map(|r| resolve_answer(&r.answer, palette)),
    )?;
    Ok(fractions(&c))
}

fn levels_present(records: &[AnnotationRecord]) -> BTreeSet<PrivacyLevel> {
    records.iter().filter(|r| !r.is_gold).map(|r| r.level).collect()
}

/// `distribution(L) - distribution(Text)` for every level present,
/// Text included.
pub fn difference_to_text(
    records: &[AnnotationRecord],
    palette: &Palette,
) -> Result<BTreeMap<PrivacyLevel, [f64; EMOTION_COUNT]>> {
    let text = distribution(records, PrivacyLevel::NoPrivacy, palette)?
        .ok_or_else(|| Error::domain("no Text-level annotations to compare against"))?;
    let mut out = BTreeMap::new();
    for level in levels_present(records) {
        if let Some(d) = distribution(records, level, palette)? {
            out.insert(level, std::array::from_fn(|k| d[k] - text[k]));
        }
    }
    Ok(out)
}

fn counts_by_sentence(
    records: &[AnnotationRecord],
    palette: &Palette,
) -> Result<BTreeMap<(PrivacyLevel, String), [usize; EMOTION_COUNT]>> {
    let mut out: BTreeMap<(PrivacyLevel, String), [usize; EMOTION_COUNT]> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_gold) {
        let e = resolve_answer(&r.answer, palette)?;
        out.entry((r.level, r.sentence_id.clone())).or_insert([0; EMOTION_COUNT])[e.index()] += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceDominance {
    pub sentence_id: String,
    pub level: PrivacyLevel,
    pub dominant: Emotion,
    /// Count of the dominant answer over all answers for the sentence.
    pub strength: f64,
    pub annotations: usize,
    pub counts: [usize; EMOTION_COUNT],
}

/// Most frequent answer and its share; ties go to the earlier emotion.
pub fn dominant_of(counts: &[usize; EMOTION_COUNT]) -> Option<(Emotion, f64)> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let mut best = 0;
    for k in 1..EMOTION_COUNT {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    Some((Emotion::ALL[best], counts[best] as f64 / total as f64))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DominanceSummary {
    pub sentences: Vec<SentenceDominance>,
    /// Mean strength over sentences dominated by each emotion; `None` when
    /// no sentence at that level is dominated by it.
    pub agreement: BTreeMap<PrivacyLevel, [Option<f64>; EMOTION_COUNT]>,
}

pub fn dominant_agreement(records: &[AnnotationRecord], palette: &Palette) -> Result<DominanceSummary> {
    let mut sentences = Vec::new();
    let mut sums: BTreeMap<PrivacyLevel, [(f64, usize); EMOTION_COUNT]> = BTreeMap::new();
    for ((level, sentence_id), c) in counts_by_sentence(records, palette)? {
        let Some((dominant, strength)) = dominant_of(&c) else { continue };
        let slot = &mut sums.entry(level).or_insert([(0.0, 0); EMOTION_COUNT])[dominant.index()];
        slot.0 += strength;
        slot.1 += 1;
        sentences.push(SentenceDominance {
            sentence_id,
            level,
            dominant,
            strength,
            annotations: c.iter().sum(),
            counts: c,
        });
    }
    let agreement = sums
        .into_iter()
        .map(|(level, s)| (level, s.map(|(sum, n)| (n > 0).then(|| sum / n as f64))))
        .collect();
    Ok(DominanceSummary { sentences, agreement })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho with average ranks for ties. `None` when the inputs
/// differ in length, are shorter than two, or either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanSummary {
    pub mean_rho: Option<f64>,
    pub sentences_used: usize,
    pub sentences_skipped: usize,
}

/// Per-sentence rho between Text and each other level's answer counts,
/// averaged over sentences. Constant count vectors are skipped.
pub fn spearman_vs_text(records: &[AnnotationRecord], palette: &Palette) -> Result<BTreeMap<PrivacyLevel, SpearmanSummary>> {
    let by_sentence = counts_by_sentence(records, palette)?;
    let text: BTreeMap<&str, &[usize; EMOTION_COUNT]> = by_sentence
        .iter()
        .filter(|((l, _), _)| *l == PrivacyLevel::NoPrivacy)
        .map(|((_, s), c)| (s.as_str(), c))
        .collect();
    if text.is_empty() {
        return Err(Error::domain("no Text-level annotations to correlate against"));
    }
    let mut out = BTreeMap::new();
    for level in levels_present(records) {
        if level == PrivacyLevel::NoPrivacy {
            continue;
        }
        let (mut sum, mut used, mut skipped) = (0.0, 0, 0);
        for ((l, sentence), c) in &by_sentence {
            if *l != level {
                continue;
            }
            let Some(t) = text.get(sentence.as_str()) else { continue };
            let as_f64 = |v: &[usize; EMOTION_COUNT]| v.map(|x| x as f64);
            match spearman(&as_f64(t), &as_f64(c)) {
                Some(rho) => {
                    sum += rho;
                    used += 1;
                }
                None => skipped += 1,
            }
        }
        out.insert(
            level,
            SpearmanSummary {
                mean_rho: (used > 0).then(|| sum / used as f64),
                sentences_used: used,
                sentences_skipped: skipped,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub source: String,
    /// Kept annotations per level after filtering.
    pub effective_counts: BTreeMap<PrivacyLevel, usize>,
    pub distribution: BTreeMap<PrivacyLevel, [f64; EMOTION_COUNT]>,
    pub difference_to_text: Option<BTreeMap<PrivacyLevel, [f64; EMOTION_COUNT]>>,
    pub dominance: DominanceSummary,
    pub spearman: Option<BTreeMap<PrivacyLevel, SpearmanSummary>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub filter: FilterConfig,
    pub aggregation_note: String,
    pub total_records: usize,
    pub kept_records: usize,
    pub contributors: Vec<ContributorStats>,
    pub exclusivity_violations: Vec<ExclusivityViolation>,
    pub sources: BTreeMap<String, SourceReport>,
}

/// Exclusivity, contributor filtering, then the per-source triad.
pub fn analyze(records: &[AnnotationRecord], config: &FilterConfig, palette: &Palette) -> Result<AnalysisReport> {
    let exclusivity_violations = enforce_task_exclusivity(records);
    let exclusive = retain_first_tasks(records);
    let (kept, contributors) = filter_contributors(&exclusive, config, palette)?;

    let mut by_source: BTreeMap<String, Vec<AnnotationRecord>> = BTreeMap::new();
    for r in &kept {
        by_source.entry(r.source.clone()).or_default().push(r.clone());
    }

    let mut sources = BTreeMap::new();
    for (source, recs) in by_source {
        let mut effective_counts = BTreeMap::new();
        let mut dist = BTreeMap::new();
        for level in levels_present(&recs) {
            effective_counts.insert(level, recs.iter().filter(|r| r.level == level).count());
            if let Some(d) = distribution(&recs, level, palette)? {
                dist.insert(level, d);
            }
        }
        let has_text = dist.contains_key(&PrivacyLevel::NoPrivacy);
        let report = SourceReport {
            effective_counts,
            distribution: dist,
            difference_to_text: if has_text { Some(difference_to_text(&recs, palette)?) } else { None },
            dominance: dominant_agreement(&recs, palette)?,
            spearman: if has_text { Some(spearman_vs_text(&recs, palette)?) } else { None },
            source: source.clone(),
        };
        sources.insert(source, report);
    }

    Ok(AnalysisReport {
        filter: config.clone(),
        aggregation_note: NORMALIZATION_NOTE.to_string(),
        total_records: records.len(),
        kept_records: kept.len(),
        contributors,
        exclusivity_violations,
        sources,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

fn emotion_table(levels: &[PrivacyLevel], cell: impl Fn(PrivacyLevel, Emotion) -> Option<f64>) -> String {
    let mut out = String::from("emotion");
    for l in levels {
        out.push(',');
        out.push_str(l.as_str());
    }
    out.push('\n');
    for e in Emotion::ALL {
        out.push_str(e.name());
        for &l in levels {
            out.push(',');
            out.push_str(&fmt_opt(cell(l, e)));
        }
        out.push('\n');
    }
    out
}

impl AnalysisReport {
    /// Writes `report.json` and emotion × level chart tables per source.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_vec_pretty(self)?)?;
        for (source, report) in &self.sources {
            let levels: Vec<PrivacyLevel> = report.distribution.keys().copied().collect();
            fs::write(
                dir.join(format!("distribution_{source}.csv")),
                emotion_table(&levels, |l, e| report.distribution.get(&l).map(|d| d[e.index()])),
            )?;
            if let Some(diff) = &report.difference_to_text {
                let levels: Vec<PrivacyLevel> = diff.keys().copied().collect();
                fs::write(
                    dir.join(format!("difference_{source}.csv")),
                    emotion_table(&levels, |l, e| diff.get(&l).map(|d| d[e.index()])),
                )?;
            }
            let levels: Vec<PrivacyLevel> = report.dominance.agreement.keys().copied().collect();
            fs::write(
                dir.join(format!("dominance_{source}.csv")),
                emotion_table(&levels, |l, e| report.dominance.agreement.get(&l).and_then(|a| a[e.index()])),
            )?;
        }
        Ok(())
    }
}
