//! Accept/reject rules for submitted HITs and the repost queue.
//!
//! A HIT is rejected when any metric falls strictly below its threshold;
//! a metric equal to its threshold passes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hit::{Hit, BROWSING_PAGES, TAGGING_PAGES};
use crate::proxy::{extract_icon_positions, PlacementRule};
use crate::record::{CocoRecord, ImageNetRecord};
use crate::truth::{BrowsingTruth, TaggingTruth};

pub const MIN_RECALL: f64 = 1.0 / 3.0;
pub const MIN_SELECTIONS: usize = 30;
pub const MIN_BROWSING_PAGES: usize = 9;
pub const MIN_ICON_ACCURACY: f64 = 0.75;
pub const MIN_TAGGING_PAGES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QcError {
    #[error("no ground truth for image `{0}`")]
    MissingGroundTruth(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectReason {
    LowRecall,
    TooFewSelections,
    IncompletePages,
    MissingRecordBadCode,
    LowIconAccuracy,
}

/// Metrics of one browsing HIT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrowsingMetrics {
    /// Selected seeds over seeds shown in the HIT.
    pub recall: f64,
    pub selections: usize,
    pub pages_completed: usize,
    pub records_present: bool,
    pub code_valid: bool,
}

/// Metrics of one tagging HIT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggingMetrics {
    /// Per-page class recall, averaged over pages.
    pub recall: f64,
    /// Fraction of live icons that sit on a region of their class.
    pub icon_accuracy: f64,
    pub pages_completed: usize,
    pub records_present: bool,
    pub code_valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HitMetrics {
    Browsing(BrowsingMetrics),
    Tagging(TaggingMetrics),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitVerdict {
    pub assignment_id: String,
    pub decision: Decision,
    pub reasons: Vec<RejectReason>,
    pub metrics: HitMetrics,
}

impl HitVerdict {
    fn from_reasons(assignment_id: String, reasons: Vec<RejectReason>, metrics: HitMetrics) -> Self {
        let decision = if reasons.is_empty() {
            Decision::Accept
        } else {
            Decision::Reject
        };
        HitVerdict {
            assignment_id,
            decision,
            reasons,
            metrics,
        }
    }

    pub fn is_rejected(&self) -> bool {
        self.decision == Decision::Reject
    }
}

pub fn browsing_reasons(m: &BrowsingMetrics) -> Vec<RejectReason> {
    let mut r = Vec::new();
    if m.recall < MIN_RECALL {
        r.push(RejectReason::LowRecall);
    }
    if m.selections < MIN_SELECTIONS {
        r.push(RejectReason::TooFewSelections);
    }
    if m.pages_completed < MIN_BROWSING_PAGES {
        r.push(RejectReason::IncompletePages);
    }
    if !m.records_present && !m.code_valid {
        r.push(RejectReason::MissingRecordBadCode);
    }
    r
}

pub fn tagging_reasons(m: &TaggingMetrics) -> Vec<RejectReason> {
    let mut r = Vec::new();
    if m.recall < MIN_RECALL {
        r.push(RejectReason::LowRecall);
    }
    if m.icon_accuracy < MIN_ICON_ACCURACY {
        r.push(RejectReason::LowIconAccuracy);
    }
    if m.pages_completed < MIN_TAGGING_PAGES {
        r.push(RejectReason::IncompletePages);
    }
    if !m.records_present && !m.code_valid {
        r.push(RejectReason::MissingRecordBadCode);
    }
    r
}

pub fn browsing_verdict(assignment_id: impl Into<String>, m: BrowsingMetrics) -> HitVerdict {
    HitVerdict::from_reasons(assignment_id.into(), browsing_reasons(&m), HitMetrics::Browsing(m))
}

pub fn tagging_verdict(assignment_id: impl Into<String>, m: TaggingMetrics) -> HitVerdict {
    HitVerdict::from_reasons(assignment_id.into(), tagging_reasons(&m), HitMetrics::Tagging(m))
}

/// Computes the browsing metrics of one assignment's records.
///
/// Pages count as completed when they produced at least one record.
pub fn browsing_metrics(
    records: &[ImageNetRecord],
    gt: &BrowsingTruth,
    code_valid: bool,
) -> Result<BrowsingMetrics, QcError> {
    let mut selected = BTreeSet::new();
    let mut pages = BTreeSet::new();
    for r in records {
        if !gt.images.contains_key(&r.image_id) {
            return Err(QcError::MissingGroundTruth(r.image_id.clone()));
        }
        pages.insert(r.page_idx);
        if r.selected {
            selected.insert(r.image_id.as_str());
        }
    }
    let seeds = gt.seed_count();
    if seeds == 0 {
        return Err(QcError::MissingGroundTruth(format!(
            "seed subset of {}",
            gt.assignment_id
        )));
    }
    let selected_seeds = selected.iter().filter(|id| gt.images[**id]).count();
    Ok(BrowsingMetrics {
        recall: selected_seeds as f64 / seeds as f64,
        selections: selected.len(),
        pages_completed: pages.len().min(BROWSING_PAGES),
        records_present: !records.is_empty(),
        code_valid,
    })
}

pub fn evaluate_imagenet_hit(
    records: &[ImageNetRecord],
    gt: &BrowsingTruth,
    code_valid: bool,
) -> Result<HitVerdict, QcError> {
    let m = browsing_metrics(records, gt, code_valid)?;
    Ok(browsing_verdict(gt.assignment_id.clone(), m))
}

/// Computes the tagging metrics of one assignment's records (one record per page).
pub fn tagging_metrics(
    records: &[CocoRecord],
    gt: &HashMap<u64, TaggingTruth>,
    code_valid: bool,
) -> Result<TaggingMetrics, QcError> {
    let mut recall_sum = 0.0;
    let mut recall_pages = 0usize;
    let mut icons = 0usize;
    let mut correct = 0usize;
    let mut pages = BTreeSet::new();
    for r in records {
        let truth = gt
            .get(&r.image_id)
            .ok_or_else(|| QcError::MissingGroundTruth(r.image_id.to_string()))?;
        pages.insert(r.page_idx);
        let placed = extract_icon_positions(r, PlacementRule::LastLivePosition);
        let existing = truth.categories();
        if !existing.is_empty() {
            let hits = placed.keys().filter(|c| existing.contains(c.as_str())).count();
            recall_sum += hits as f64 / existing.len() as f64;
            recall_pages += 1;
        }
        for (cat, p) in &placed {
            icons += 1;
            if truth.on_region(cat, *p) {
                correct += 1;
            }
        }
    }
    Ok(TaggingMetrics {
        recall: if recall_pages == 0 {
            0.0
        } else {
            recall_sum / recall_pages as f64
        },
        // No placed icons: accuracy is vacuous; recall catches empty work.
        icon_accuracy: if icons == 0 {
            1.0
        } else {
            correct as f64 / icons as f64
        },
        pages_completed: pages.len().min(TAGGING_PAGES),
        records_present: !records.is_empty(),
        code_valid,
    })
}

pub fn evaluate_coco_hit(
    assignment_id: &str,
    records: &[CocoRecord],
    gt: &HashMap<u64, TaggingTruth>,
    code_valid: bool,
) -> Result<HitVerdict, QcError> {
    let m = tagging_metrics(records, gt, code_valid)?;
    Ok(tagging_verdict(assignment_id, m))
}

/// Re-packages every rejected assignment under a fresh id.
///
/// `abc` becomes `abc-r1`, `abc-r1` becomes `abc-r2`, and so on. Verdicts
/// whose HIT is unknown are skipped.
pub fn repost_rejected(verdicts: &[HitVerdict], hits: &[Hit]) -> Vec<Hit> {
    let by_id: BTreeMap<&str, &Hit> = hits.iter().map(|h| (h.assignment_id(), h)).collect();
    verdicts
        .iter()
        .filter(|v| v.is_rejected())
        .filter_map(|v| by_id.get(v.assignment_id.as_str()))
        .map(|h| h.with_assignment_id(next_repost_id(h.assignment_id())))
        .collect()
}

pub fn next_repost_id(id: &str) -> String {
    if let Some((base, gen)) = id.rsplit_once("-r") {
        if let Ok(n) = gen.parse::<u32>() {
            return format!("{base}-r{}", n + 1);
        }
    }
    format!("{id}-r1")
}

/// Counts for the summary table of a QC run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcSummary {
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejection_rate: f64,
    pub reasons: BTreeMap<String, usize>,
}

pub fn summarize(verdicts: &[HitVerdict]) -> QcSummary {
    let rejected = verdicts.iter().filter(|v| v.is_rejected()).count();
    let mut reasons = BTreeMap::new();
    for r in verdicts.iter().flat_map(|v| &v.reasons) {
        *reasons.entry(format!("{r:?}")).or_insert(0) += 1;
    }
    QcSummary {
        total: verdicts.len(),
        accepted: verdicts.len() - rejected,
        rejected,
        rejection_rate: if verdicts.is_empty() {
            0.0
        } else {
            rejected as f64 / verdicts.len() as f64
        },
        reasons,
    }
}
