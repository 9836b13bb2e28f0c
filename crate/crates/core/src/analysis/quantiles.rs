//! Localization accuracy of mouse-trace points leading up to the click.
//!
//! A trace runs from the first tracked point over the image to the final
//! click. Each bin of a curve scores one point per trace:
//!
//! * `TraceQuantile`: the point at index `round(q * (n - 1))` with
//!   `q = (k + 1) / bins`;
//! * `TimeQuantile`: the last point at or before `t_entry + q * (t_click - t_entry)`;
//! * `LastN`: the point `k` steps before the click (`k = 0` is the click).
//!
//! The final quantile bin is therefore always the click itself.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geometry::ImageBoxes;
use crate::record::{ImageNetRecord, TracePoint};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum QuantileMode {
    LastN,
    TraceQuantile,
    TimeQuantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub mode: QuantileMode,
    pub bins: usize,
    /// Accuracy per bin; 0 where no trace contributes.
    pub accuracy: Vec<f64>,
    /// Number of traces scored in each bin.
    pub counts: Vec<usize>,
}

/// Trace points up to the final click, with the click appended.
pub fn click_trace(record: &ImageNetRecord) -> Option<Vec<TracePoint>> {
    if !record.selected {
        return None;
    }
    let click = *record.selected_record.last()?;
    let mut trace: Vec<TracePoint> = record
        .mouse_tracking
        .iter()
        .copied()
        .filter(|p| p.t <= click.t)
        .collect();
    trace.push(click);
    Some(trace)
}

fn pick(trace: &[TracePoint], mode: QuantileMode, bins: usize, k: usize) -> Option<TracePoint> {
    let n = trace.len();
    match mode {
        QuantileMode::LastN => (k < n).then(|| trace[n - 1 - k]),
        QuantileMode::TraceQuantile => {
            // round((k+1)/bins * (n-1)) in integer arithmetic
            let idx = ((k + 1) * (n - 1) * 2 + bins) / (2 * bins);
            Some(trace[idx])
        }
        QuantileMode::TimeQuantile => {
            let t0 = trace[0].t;
            let span = trace[n - 1].t - t0;
            let cutoff = t0 + span * (k as u64 + 1) / bins as u64;
            trace.iter().rev().find(|p| p.t <= cutoff).copied()
        }
    }
}

pub fn trace_quantile_accuracy(
    records: &[ImageNetRecord],
    boxes: &HashMap<String, ImageBoxes>,
    mode: QuantileMode,
    bins: usize,
) -> Result<QuantileCurve, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::InvalidConfig("bins must be > 0".into()));
    }
    let mut inside = vec![0usize; bins];
    let mut counts = vec![0usize; bins];
    let mut used = 0usize;
    for r in records {
        let (Some(trace), Some(b)) = (click_trace(r), boxes.get(&r.image_id)) else {
            continue;
        };
        used += 1;
        for k in 0..bins {
            if let Some(p) = pick(&trace, mode, bins, k) {
                counts[k] += 1;
                if b.boxes.iter().any(|bx| bx.contains_xy(p.x, p.y)) {
                    inside[k] += 1;
                }
            }
        }
    }
    if used == 0 {
        return Err(AnalysisError::EmptyInput);
    }
    let accuracy = inside
        .iter()
        .zip(&counts)
        .map(|(&i, &c)| if c == 0 { 0.0 } else { i as f64 / c as f64 })
        .collect();
    Ok(QuantileCurve {
        mode,
        bins,
        accuracy,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::record::PagePosition;
    use serde_json::Map;

    fn record(trace: &[(f64, f64, u64)], click: (f64, f64, u64)) -> ImageNetRecord {
        ImageNetRecord {
            image_id: "i".into(),
            class_id: "c".into(),
            selected: true,
            selected_record: vec![TracePoint::new(click.0, click.1, click.2)],
            mouse_tracking: trace.iter().map(|&(x, y, t)| TracePoint::new(x, y, t)).collect(),
            image_position: PagePosition { x: 0.0, y: 0.0 },
            image_width: 10.0,
            image_height: 10.0,
            worker_id: "w".into(),
            assignment_id: "a".into(),
            page_idx: 0,
            extra: Map::new(),
        }
    }

    fn boxes() -> HashMap<String, ImageBoxes> {
        let b = ImageBoxes::square("i", vec![BBox::new(0.4, 0.4, 0.6, 0.6).unwrap()]);
        HashMap::from([("i".to_string(), b)])
    }

    #[test]
    fn trace_inside_box_is_all_ones() {
        let r = record(&[(0.45, 0.45, 0), (0.5, 0.5, 10), (0.55, 0.5, 20)], (0.5, 0.5, 30));
        for mode in [QuantileMode::TraceQuantile, QuantileMode::TimeQuantile, QuantileMode::LastN] {
            let c = trace_quantile_accuracy(&[r.clone()], &boxes(), mode, 4).unwrap();
            assert!(c
                .accuracy
                .iter()
                .zip(&c.counts)
                .all(|(&a, &n)| n == 0 || a == 1.0));
        }
    }

    #[test]
    fn approach_from_outside() {
        let r = record(
            &[(0.0, 0.0, 0), (0.1, 0.1, 10), (0.2, 0.2, 20), (0.3, 0.3, 30), (0.45, 0.45, 40)],
            (0.5, 0.5, 50),
        );
        let c = trace_quantile_accuracy(&[r], &boxes(), QuantileMode::TraceQuantile, 5).unwrap();
        assert!(c.accuracy[0] < c.accuracy[4]);
        assert_eq!(c.accuracy[4], 1.0);
    }

    #[test]
    fn last_bin_is_the_click() {
        let trace = vec![
            TracePoint::new(0.0, 0.0, 0),
            TracePoint::new(0.2, 0.2, 7),
            TracePoint::new(0.9, 0.9, 13),
        ];
        for bins in 1..6 {
            for mode in [QuantileMode::TraceQuantile, QuantileMode::TimeQuantile] {
                assert_eq!(pick(&trace, mode, bins, bins - 1), Some(trace[2]));
            }
        }
        assert_eq!(pick(&trace, QuantileMode::LastN, 5, 3), None);
    }

    #[test]
    fn trace_after_click_is_ignored() {
        let r = record(&[(0.1, 0.1, 0), (0.9, 0.9, 99)], (0.5, 0.5, 50));
        assert_eq!(click_trace(&r).unwrap().len(), 2);
    }
}
