use std::collections::BTreeMap;

use crate::record::{replay_icons, CocoRecord};

/// Counts action-type sequences (e.g. `add-move`) of icons that are live at
/// the end of their record.
pub fn action_sequence_histogram(records: &[CocoRecord]) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for r in records {
        let Ok(timelines) = replay_icons(&r.action_histories) else {
            continue;
        };
        for tl in timelines.values().filter(|tl| tl.live) {
            *out.entry(tl.sequence()).or_insert(0) += 1;
        }
    }
    out
}

/// Histogram counts as fractions of the total.
pub fn sequence_frequencies(hist: &BTreeMap<String, u64>) -> BTreeMap<String, f64> {
    let total: u64 = hist.values().sum();
    hist.iter()
        .map(|(k, &v)| (k.clone(), if total == 0 { 0.0 } else { v as f64 / total as f64 }))
        .collect()
}
