//! Weak object locations extracted from byproduct records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::RecordError;
use crate::record::{replay_icons, CocoRecord, ImageNetRecord, PagePosition};

/// A normalized object-location proxy in `[0, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyPoint {
    pub x: f64,
    pub y: f64,
}

impl ProxyPoint {
    pub fn new(x: f64, y: f64) -> Option<Self> {
        ((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)).then_some(ProxyPoint { x, y })
    }

    pub fn clamped(x: f64, y: f64) -> Self {
        ProxyPoint {
            x: x.clamp(0.0, 1.0),
            y: y.clamp(0.0, 1.0),
        }
    }
}

/// The last toggle click of a selected image; `None` when the image ended
/// up deselected (even-length click list).
pub fn extract_final_click(record: &ImageNetRecord) -> Option<ProxyPoint> {
    if !record.selected {
        return None;
    }
    record.selected_record.last().map(|p| ProxyPoint { x: p.x, y: p.y })
}

/// Which point represents a live icon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlacementRule {
    /// Point of the final `add`; later `move`s are ignored.
    #[default]
    FinalAdd,
    /// Where the icon sits at the end of the history.
    LastLivePosition,
}

/// Final `add` point of every category that has a live icon at the end of
/// the history.
pub fn extract_final_adds(record: &CocoRecord) -> BTreeMap<String, ProxyPoint> {
    extract_icon_positions(record, PlacementRule::FinalAdd)
}

pub fn extract_icon_positions(
    record: &CocoRecord,
    rule: PlacementRule,
) -> BTreeMap<String, ProxyPoint> {
    // Records are validated on parse; an illegal history yields no points.
    let Ok(timelines) = replay_icons(&record.action_histories) else {
        return BTreeMap::new();
    };
    timelines
        .into_iter()
        .filter(|(_, tl)| tl.live)
        .filter_map(|(cat, tl)| {
            let p = match rule {
                PlacementRule::FinalAdd => tl.last_add,
                PlacementRule::LastLivePosition => tl.position,
            }?;
            Some((cat, ProxyPoint { x: p.x, y: p.y }))
        })
        .collect()
}

/// Projects a page-frame pixel position into the image frame.
///
/// Points up to one pixel outside the image rectangle are clamped; anything
/// further out is `OutsideImage`.
pub fn normalize_point(
    page_x: f64,
    page_y: f64,
    position: PagePosition,
    width: f64,
    height: f64,
) -> Result<ProxyPoint, RecordError> {
    let dx = page_x - position.x;
    let dy = page_y - position.y;
    let outside = |d: f64, extent: f64| d < -1.0 || d > extent + 1.0 || !d.is_finite();
    if outside(dx, width) || outside(dy, height) {
        return Err(RecordError::OutsideImage {
            x: page_x,
            y: page_y,
        });
    }
    Ok(ProxyPoint::clamped(dx / width, dy / height))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{ActionKind, IconAction, TracePoint};
    use serde_json::Map;

    fn imagenet(clicks: &[(f64, f64)]) -> ImageNetRecord {
        ImageNetRecord {
            image_id: "img".into(),
            class_id: "n0".into(),
            selected: clicks.len() % 2 == 1,
            selected_record: clicks
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| TracePoint::new(x, y, i as u64))
                .collect(),
            mouse_tracking: vec![],
            image_position: PagePosition { x: 0.0, y: 0.0 },
            image_width: 100.0,
            image_height: 100.0,
            worker_id: "w".into(),
            assignment_id: "a".into(),
            page_idx: 0,
            extra: Map::new(),
        }
    }

    #[test]
    fn final_click_is_last_of_odd_list() {
        let r = imagenet(&[(0.3, 0.4), (0.6, 0.7), (0.5, 0.5)]);
        assert_eq!(extract_final_click(&r), Some(ProxyPoint { x: 0.5, y: 0.5 }));
        let r = imagenet(&[(0.3, 0.4), (0.6, 0.7)]);
        assert_eq!(extract_final_click(&r), None);
    }

    fn coco(actions: Vec<IconAction>) -> CocoRecord {
        CocoRecord {
            image_id: 1,
            action_histories: actions,
            mouse_tracking: vec![],
            category_histories: vec![],
            using_keyboard: false,
            time_spent: 100,
            page_idx: 0,
            assignment_id: "a".into(),
            worker_id: "w".into(),
            extra: Map::new(),
        }
    }

    fn act(k: ActionKind, c: &str, x: f64, y: f64) -> IconAction {
        IconAction::new(k, c, TracePoint::new(x, y, 0))
    }

    #[test]
    fn final_adds_per_category() {
        use ActionKind::*;
        let r = coco(vec![act(Add, "dog", 0.2, 0.2), act(Add, "cat", 0.8, 0.8)]);
        let m = extract_final_adds(&r);
        assert_eq!(m["dog"], ProxyPoint { x: 0.2, y: 0.2 });
        assert_eq!(m["cat"], ProxyPoint { x: 0.8, y: 0.8 });
    }

    #[test]
    fn last_add_wins_and_moves_are_ignored() {
        use ActionKind::*;
        let r = coco(vec![
            act(Add, "dog", 0.2, 0.2),
            act(Remove, "dog", 0.2, 0.2),
            act(Add, "dog", 0.4, 0.4),
            act(Move, "dog", 0.9, 0.9),
        ]);
        assert_eq!(extract_final_adds(&r)["dog"], ProxyPoint { x: 0.4, y: 0.4 });
        let live = extract_icon_positions(&r, PlacementRule::LastLivePosition);
        assert_eq!(live["dog"], ProxyPoint { x: 0.9, y: 0.9 });
    }

    #[test]
    fn removed_icons_produce_no_point() {
        use ActionKind::*;
        let r = coco(vec![act(Add, "dog", 0.2, 0.2), act(Remove, "dog", 0.2, 0.2)]);
        assert!(extract_final_adds(&r).is_empty());
    }

    #[test]
    fn normalize_corners_and_center() {
        let pos = PagePosition { x: 100.0, y: 50.0 };
        assert_eq!(
            normalize_point(100.0, 50.0, pos, 200.0, 100.0).unwrap(),
            ProxyPoint { x: 0.0, y: 0.0 }
        );
        assert_eq!(
            normalize_point(200.0, 100.0, pos, 200.0, 100.0).unwrap(),
            ProxyPoint { x: 0.5, y: 0.5 }
        );
        assert_eq!(normalize_point(300.0, 60.0, pos, 200.0, 100.0).unwrap().x, 1.0);
        // within the one-pixel slack: clamped
        assert_eq!(normalize_point(300.5, 60.0, pos, 200.0, 100.0).unwrap().x, 1.0);
        assert!(matches!(
            normalize_point(302.0, 60.0, pos, 200.0, 100.0),
            Err(RecordError::OutsideImage { .. })
        ));
    }
}
