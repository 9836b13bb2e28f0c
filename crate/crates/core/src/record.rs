//! Byproduct record formats for the browsing and tagging interfaces.
//!
//! Coordinates inside records are image-normalized to `[0, 1]`; timestamps
//! are integer milliseconds since the assignment started. Records serialize
//! with a fixed key order so that `serialize(parse(bytes)) == bytes` for any
//! canonically written record.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{RecordError, Violation};

/// How unknown fields are treated when parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Unknown fields are a `MalformedRecord` error.
    #[default]
    Strict,
    /// Unknown fields are kept and written back after the known ones.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracePoint {
    pub x: f64,
    pub y: f64,
    pub t: u64,
}

impl TracePoint {
    pub fn new(x: f64, y: f64, t: u64) -> Self {
        TracePoint { x, y, t }
    }

    fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }
}

/// Top-left corner of an image in the page frame, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PagePosition {
    pub x: f64,
    pub y: f64,
}

/// Byproducts of one image shown on a browsing page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageNetRecord {
    pub image_id: String,
    pub class_id: String,
    pub selected: bool,
    #[serde(rename = "selectedRecord")]
    pub selected_record: Vec<TracePoint>,
    #[serde(rename = "mouseTracking")]
    pub mouse_tracking: Vec<TracePoint>,
    #[serde(rename = "imagePosition")]
    pub image_position: PagePosition,
    #[serde(rename = "imageWidth")]
    pub image_width: f64,
    #[serde(rename = "imageHeight")]
    pub image_height: f64,
    pub worker_id: String,
    pub assignment_id: String,
    pub page_idx: u32,
    #[serde(skip)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Add,
    Move,
    Remove,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Add => "add",
            ActionKind::Move => "move",
            ActionKind::Remove => "remove",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IconAction {
    pub action: ActionKind,
    pub category: String,
    pub point: TracePoint,
}

impl IconAction {
    pub fn new(action: ActionKind, category: impl Into<String>, point: TracePoint) -> Self {
        IconAction {
            action,
            category: category.into(),
            point,
        }
    }
}

/// One visit to a superclass tab of the category browser.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryVisit {
    pub superclass: String,
    pub t: u64,
}

/// Byproducts of one tagging page (a single image).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocoRecord {
    pub image_id: u64,
    #[serde(rename = "actionHistories")]
    pub action_histories: Vec<IconAction>,
    #[serde(rename = "mouseTracking")]
    pub mouse_tracking: Vec<TracePoint>,
    #[serde(rename = "categoryHistories")]
    pub category_histories: Vec<CategoryVisit>,
    #[serde(rename = "usingKeyboard")]
    pub using_keyboard: bool,
    #[serde(rename = "timeSpent")]
    pub time_spent: u64,
    pub page_idx: u32,
    pub assignment_id: String,
    pub worker_id: String,
    #[serde(skip)]
    pub extra: Map<String, Value>,
}

/// Shared behaviour of the two record formats.
pub trait ByproductRecord: Serialize + DeserializeOwned + Sized {
    /// Serialized keys, in output order.
    const FIELDS: &'static [&'static str];

    fn validate(&self) -> Result<(), RecordError>;
    fn extra(&self) -> &Map<String, Value>;
    fn extra_mut(&mut self) -> &mut Map<String, Value>;

    /// Parses and validates one record.
    fn parse(bytes: &[u8], mode: ParseMode) -> Result<Self, RecordError> {
        parse_record(bytes, mode)
    }

    /// Serializes with the fixed key order, followed by any preserved
    /// unknown fields.
    fn to_json_string(&self) -> String {
        let mut value = serde_json::to_value(self).expect("records serialize to JSON");
        let obj = value.as_object_mut().expect("records serialize as objects");
        for (k, v) in self.extra() {
            obj.insert(k.clone(), v.clone());
        }
        serde_json::to_string(&value).expect("JSON values serialize")
    }
}

pub(crate) fn parse_record<R: ByproductRecord>(
    bytes: &[u8],
    mode: ParseMode,
) -> Result<R, RecordError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| RecordError::malformed("$", e))?;
    let Value::Object(mut obj) = value else {
        return Err(RecordError::malformed("$", "expected a JSON object"));
    };
    let unknown: Vec<String> = obj
        .keys()
        .filter(|k| !R::FIELDS.contains(&k.as_str()))
        .cloned()
        .collect();
    let mut extra = Map::new();
    if let Some(first) = unknown.first() {
        if mode == ParseMode::Strict {
            return Err(RecordError::malformed(first.clone(), "unknown field"));
        }
        for k in unknown {
            let v = obj.remove(&k).expect("key listed above");
            extra.insert(k, v);
        }
    }
    let mut record: R = serde_path_to_error::deserialize(Value::Object(obj)).map_err(|e| {
        let path = e.path().to_string();
        RecordError::malformed(path, e.into_inner())
    })?;
    *record.extra_mut() = extra;
    record.validate()?;
    Ok(record)
}

/// Parses one browsing-interface record (strict mode).
pub fn parse_imagenet_record(bytes: &[u8]) -> Result<ImageNetRecord, RecordError> {
    parse_record(bytes, ParseMode::Strict)
}

/// Parses one tagging-interface record (strict mode).
pub fn parse_coco_record(bytes: &[u8]) -> Result<CocoRecord, RecordError> {
    parse_record(bytes, ParseMode::Strict)
}

fn check_trace(path: &str, points: &[TracePoint]) -> Result<(), RecordError> {
    for (i, p) in points.iter().enumerate() {
        if !p.in_unit_square() {
            return Err(RecordError::violation(
                format!("{path}[{i}]"),
                Violation::CoordinateOutOfRange,
            ));
        }
    }
    check_monotone(path, points.iter().map(|p| p.t))
}

fn check_monotone(path: &str, ts: impl Iterator<Item = u64>) -> Result<(), RecordError> {
    let mut prev = 0u64;
    for (i, t) in ts.enumerate() {
        if t < prev {
            return Err(RecordError::violation(
                format!("{path}[{i}].t"),
                Violation::NonMonotoneTimestamp,
            ));
        }
        prev = t;
    }
    Ok(())
}

impl ImageNetRecord {
    /// Whether the image was ever interacted with.
    pub fn has_interaction(&self) -> bool {
        !self.selected_record.is_empty() || !self.mouse_tracking.is_empty()
    }
}

impl ByproductRecord for ImageNetRecord {
    const FIELDS: &'static [&'static str] = &[
        "image_id",
        "class_id",
        "selected",
        "selectedRecord",
        "mouseTracking",
        "imagePosition",
        "imageWidth",
        "imageHeight",
        "worker_id",
        "assignment_id",
        "page_idx",
    ];

    fn validate(&self) -> Result<(), RecordError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.image_width) {
            return Err(RecordError::violation(
                "imageWidth",
                Violation::NonPositiveDimension,
            ));
        }
        if !positive(self.image_height) {
            return Err(RecordError::violation(
                "imageHeight",
                Violation::NonPositiveDimension,
            ));
        }
        check_trace("selectedRecord", &self.selected_record)?;
        check_trace("mouseTracking", &self.mouse_tracking)?;
        if self.selected != (self.selected_record.len() % 2 == 1) {
            return Err(RecordError::violation("selected", Violation::Parity));
        }
        Ok(())
    }

    fn extra(&self) -> &Map<String, Value> {
        &self.extra
    }

    fn extra_mut(&mut self) -> &mut Map<String, Value> {
        &mut self.extra
    }
}

/// Per-category outcome of replaying an action history.
#[derive(Debug, Clone, PartialEq)]
pub struct IconTimeline {
    /// Action kinds in order.
    pub kinds: Vec<ActionKind>,
    /// Whether an icon is on the image after the last action.
    pub live: bool,
    /// Point of the most recent `add`.
    pub last_add: Option<TracePoint>,
    /// Current icon position (last `add` or `move`), if live.
    pub position: Option<TracePoint>,
}

impl IconTimeline {
    /// Action kinds joined with `-`, e.g. `add-move`.
    pub fn sequence(&self) -> String {
        self.kinds
            .iter()
            .map(|k| k.as_str())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Replays an action history under the single-live-icon rule.
///
/// Returns the per-category timelines, or the index of the first illegal
/// action and the rule it breaks.
pub fn replay_icons(
    actions: &[IconAction],
) -> Result<BTreeMap<String, IconTimeline>, (usize, Violation)> {
    let mut timelines: BTreeMap<String, IconTimeline> = BTreeMap::new();
    for (i, a) in actions.iter().enumerate() {
        let tl = timelines
            .entry(a.category.clone())
            .or_insert_with(|| IconTimeline {
                kinds: Vec::new(),
                live: false,
                last_add: None,
                position: None,
            });
        match (a.action, tl.live) {
            (ActionKind::Add, true) => return Err((i, Violation::DoubleAdd)),
            (ActionKind::Move, false) => return Err((i, Violation::MoveBeforeAdd)),
            (ActionKind::Remove, false) => return Err((i, Violation::RemoveBeforeAdd)),
            (ActionKind::Add, false) => {
                tl.live = true;
                tl.last_add = Some(a.point);
                tl.position = Some(a.point);
            }
            (ActionKind::Move, true) => tl.position = Some(a.point),
            (ActionKind::Remove, true) => {
                tl.live = false;
                tl.position = None;
            }
        }
        tl.kinds.push(a.action);
    }
    Ok(timelines)
}

impl ByproductRecord for CocoRecord {
    const FIELDS: &'static [&'static str] = &[
        "image_id",
        "actionHistories",
        "mouseTracking",
        "categoryHistories",
        "usingKeyboard",
        "timeSpent",
        "page_idx",
        "assignment_id",
        "worker_id",
    ];

    fn validate(&self) -> Result<(), RecordError> {
        for (i, a) in self.action_histories.iter().enumerate() {
            if !a.point.in_unit_square() {
                return Err(RecordError::violation(
                    format!("actionHistories[{i}].point"),
                    Violation::CoordinateOutOfRange,
                ));
            }
        }
        check_monotone(
            "actionHistories",
            self.action_histories.iter().map(|a| a.point.t),
        )?;
        check_trace("mouseTracking", &self.mouse_tracking)?;
        check_monotone(
            "categoryHistories",
            self.category_histories.iter().map(|c| c.t),
        )?;
        replay_icons(&self.action_histories)
            .map_err(|(i, v)| RecordError::violation(format!("actionHistories[{i}]"), v))?;
        let last = self
            .action_histories
            .last()
            .map(|a| a.point.t)
            .into_iter()
            .chain(self.mouse_tracking.last().map(|p| p.t))
            .chain(self.category_histories.last().map(|c| c.t))
            .max()
            .unwrap_or(0);
        if self.time_spent < last {
            return Err(RecordError::violation(
                "timeSpent",
                Violation::TimeSpentBeforeLastEvent,
            ));
        }
        Ok(())
    }

    fn extra(&self) -> &Map<String, Value> {
        &self.extra
    }

    fn extra_mut(&mut self) -> &mut Map<String, Value> {
        &mut self.extra
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imagenet_json(selected: bool, clicks: &str) -> String {
        format!(
            r#"{{"image_id":"n01440764_10026","class_id":"n01440764","selected":{selected},"selectedRecord":{clicks},"mouseTracking":[{{"x":0.1,"y":0.2,"t":5}},{{"x":0.4,"y":0.5,"t":40}}],"imagePosition":{{"x":160.0,"y":0.0}},"imageWidth":150.0,"imageHeight":150.0,"worker_id":"9f2c1a7be03d4c11","assignment_id":"A1","page_idx":3}}"#
        )
    }

    #[test]
    fn odd_click_list_with_selected_parses() {
        let s = imagenet_json(true, r#"[{"x":0.4,"y":0.5,"t":41}]"#);
        let r = parse_imagenet_record(s.as_bytes()).unwrap();
        assert!(r.selected);
        assert_eq!(r.selected_record.len(), 1);
    }

    #[test]
    fn empty_click_list_with_selected_is_parity_violation() {
        let s = imagenet_json(true, "[]");
        let err = parse_imagenet_record(s.as_bytes()).unwrap_err();
        assert_eq!(err.violation_kind(), Some(Violation::Parity));
    }

    #[test]
    fn imagenet_field_set_matches_schema() {
        let s = imagenet_json(false, "[]");
        let r = parse_imagenet_record(s.as_bytes()).unwrap();
        let v: Value = serde_json::from_str(&r.to_json_string()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys, ImageNetRecord::FIELDS);
        assert_eq!(r.to_json_string(), s);
    }

    #[test]
    fn missing_field_is_malformed_with_path() {
        let s = imagenet_json(false, "[]").replace(r#","page_idx":3"#, "");
        match parse_imagenet_record(s.as_bytes()).unwrap_err() {
            RecordError::MalformedRecord { message, .. } => assert!(message.contains("page_idx")),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn wrong_type_reports_field_path() {
        let s = imagenet_json(false, "[]").replace(r#""imageWidth":150.0"#, r#""imageWidth":"wide""#);
        match parse_imagenet_record(s.as_bytes()).unwrap_err() {
            RecordError::MalformedRecord { path, .. } => assert_eq!(path, "imageWidth"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_field_strict_vs_lenient() {
        let base = imagenet_json(false, "[]");
        let s2 = format!("{},\"note\":\"x\"}}", &base[..base.len() - 1]);
        assert!(matches!(
            parse_imagenet_record(s2.as_bytes()),
            Err(RecordError::MalformedRecord { .. })
        ));
        let r: ImageNetRecord = parse_record(s2.as_bytes(), ParseMode::Lenient).unwrap();
        assert_eq!(r.extra.get("note"), Some(&Value::from("x")));
        assert_eq!(r.to_json_string(), s2);
    }

    #[test]
    fn decreasing_trace_timestamps_rejected() {
        let s = imagenet_json(
            true,
            r#"[{"x":0.4,"y":0.5,"t":41}]"#,
        )
        .replace(r#""t":40"#, r#""t":2"#);
        let err = parse_imagenet_record(s.as_bytes()).unwrap_err();
        assert_eq!(err.violation_kind(), Some(Violation::NonMonotoneTimestamp));
        match err {
            RecordError::InvariantViolation { path, .. } => assert_eq!(path, "mouseTracking[1].t"),
            _ => unreachable!(),
        }
    }

    fn coco(actions: &[(ActionKind, &str)]) -> CocoRecord {
        CocoRecord {
            image_id: 139,
            action_histories: actions
                .iter()
                .enumerate()
                .map(|(i, (k, c))| IconAction::new(*k, *c, TracePoint::new(0.5, 0.5, i as u64 * 10)))
                .collect(),
            mouse_tracking: vec![],
            category_histories: vec![CategoryVisit {
                superclass: "animal".into(),
                t: 0,
            }],
            using_keyboard: false,
            time_spent: 10_000,
            page_idx: 0,
            assignment_id: "B1".into(),
            worker_id: "00ff00ff00ff00ff".into(),
            extra: Map::new(),
        }
    }

    fn roundtrip_coco(r: &CocoRecord) -> Result<CocoRecord, RecordError> {
        parse_coco_record(r.to_json_string().as_bytes())
    }

    #[test]
    fn single_add_parses() {
        use ActionKind::*;
        let r = coco(&[(Add, "dog")]);
        assert_eq!(roundtrip_coco(&r).unwrap(), r);
    }

    #[test]
    fn move_before_add_rejected() {
        use ActionKind::*;
        let err = roundtrip_coco(&coco(&[(Move, "dog")])).unwrap_err();
        assert_eq!(err.violation_kind(), Some(Violation::MoveBeforeAdd));
    }

    #[test]
    fn double_add_and_remove_before_add_rejected() {
        use ActionKind::*;
        let err = roundtrip_coco(&coco(&[(Add, "dog"), (Add, "dog")])).unwrap_err();
        assert_eq!(err.violation_kind(), Some(Violation::DoubleAdd));
        let err = roundtrip_coco(&coco(&[(Remove, "dog")])).unwrap_err();
        assert_eq!(err.violation_kind(), Some(Violation::RemoveBeforeAdd));
        // a different category is independent
        assert!(roundtrip_coco(&coco(&[(Add, "dog"), (Add, "cat")])).is_ok());
    }

    #[test]
    fn longest_observed_sequence_parses() {
        use ActionKind::*;
        let mut seq = vec![Add, Remove, Add, Move];
        for _ in 0..7 {
            seq.extend([Remove, Add]);
        }
        seq.extend([Move, Move]);
        for _ in 0..2 {
            seq.extend([Remove, Add]);
        }
        assert_eq!(seq.len(), 24);
        let actions: Vec<_> = seq.iter().map(|k| (*k, "dog")).collect();
        let r = roundtrip_coco(&coco(&actions)).unwrap();
        assert_eq!(r.action_histories.len(), 24);
    }

    #[test]
    fn time_spent_must_cover_last_event() {
        use ActionKind::*;
        let mut r = coco(&[(Add, "dog")]);
        r.time_spent = 0;
        r.action_histories[0].point.t = 5;
        assert_eq!(
            roundtrip_coco(&r).unwrap_err().violation_kind(),
            Some(Violation::TimeSpentBeforeLastEvent)
        );
    }
}
