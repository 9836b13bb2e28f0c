//! In-memory state of one assignment, rebuilt from its log.
//!
//! The session is pure: it validates and applies events and submissions and
//! returns the log lines and records to persist, so replaying a log through
//! a fresh session reproduces the original records exactly.

use std::collections::{HashMap, HashSet};

use abkit_core::anon::{anonymize_worker, HashKey};
use abkit_core::hit::Hit;
use abkit_core::record::ByproductRecord;
use abkit_core::{CategoryVisit, CocoRecord, IconAction, ImageNetRecord, TracePoint};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::event::{Ack, Event, EventBatch, EventKind, LogLine, Submission};

/// Trace events accepted per image slot per second.
pub const MAX_TRACE_PER_SECOND: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentState {
    /// Accepting events and submissions.
    Open,
    CodeIssued,
    Closed,
    Rejected,
}

impl AssignmentState {
    pub fn name(self) -> &'static str {
        match self {
            AssignmentState::Open => "open",
            AssignmentState::CodeIssued => "code_issued",
            AssignmentState::Closed => "closed",
            AssignmentState::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    hit: Hit,
    worker: Option<String>,
    pub(crate) state: AssignmentState,
    events: Vec<Event>,
    seen: HashSet<(u32, u64, [u8; 32])>,
    page_high_water: Vec<Option<u64>>,
    trace_counts: HashMap<(u32, u32, u64), u32>,
    submitted: Vec<bool>,
}

fn trace_bucket(e: &Event) -> Option<(u32, u32, u64)> {
    match e.kind {
        EventKind::Trace { slot, .. } => Some((e.page_idx, slot.unwrap_or(0), e.t / 1000)),
        _ => None,
    }
}

fn unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl Session {
    pub fn new(hit: Hit) -> Self {
        let pages = hit.page_count();
        Session {
            hit,
            worker: None,
            state: AssignmentState::Open,
            events: Vec::new(),
            seen: HashSet::new(),
            page_high_water: vec![None; pages],
            trace_counts: HashMap::new(),
            submitted: vec![false; pages],
        }
    }

    pub fn hit(&self) -> &Hit {
        &self.hit
    }

    pub fn state(&self) -> AssignmentState {
        self.state
    }

    /// Number of accepted events.
    pub fn high_water_mark(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn pages_submitted(&self) -> usize {
        self.submitted.iter().filter(|&&s| s).count()
    }

    pub fn is_submitted(&self, page_idx: u32) -> bool {
        self.submitted.get(page_idx as usize).copied().unwrap_or(false)
    }

    fn require_open(&self) -> Result<(), ServiceError> {
        match self.state {
            AssignmentState::Open => Ok(()),
            _ => Err(ServiceError::ClosedAssignment(self.hit.assignment_id().to_string())),
        }
    }

    fn check_page(&self, page_idx: u32) -> Result<(), ServiceError> {
        if (page_idx as usize) < self.hit.page_count() {
            Ok(())
        } else {
            Err(ServiceError::InvalidPage { page_idx, pages: self.hit.page_count() })
        }
    }

    fn check_shape(&self, index: usize, e: &Event) -> Result<(), ServiceError> {
        let bad = |reason: &str| Err(ServiceError::InvalidEvent { index, reason: reason.to_string() });
        let browsing = matches!(self.hit, Hit::Browsing(_));
        let slots = match &self.hit {
            Hit::Browsing(b) => b.pages[e.page_idx as usize].slots.len() as u32,
            Hit::Tagging(_) => 1,
        };
        let (xy, slot) = match &e.kind {
            EventKind::Open => (None, None),
            EventKind::Trace { slot, x, y } => {
                if browsing != slot.is_some() {
                    return bad("trace slot must be given on browsing pages and only there");
                }
                (Some((*x, *y)), *slot)
            }
            EventKind::Click { slot, x, y } => {
                if !browsing {
                    return bad("clicks belong to browsing pages");
                }
                (Some((*x, *y)), Some(*slot))
            }
            EventKind::Icon { x, y, .. } => {
                if browsing {
                    return bad("icons belong to tagging pages");
                }
                (Some((*x, *y)), None)
            }
            EventKind::Category { .. } | EventKind::Keyboard => {
                if browsing {
                    return bad("category browsing belongs to tagging pages");
                }
                (None, None)
            }
        };
        if let Some((x, y)) = xy {
            if !(unit(x) && unit(y)) {
                return bad("coordinates must lie in [0, 1]");
            }
        }
        if let Some(s) = slot {
            if s >= slots {
                return bad("slot out of range");
            }
        }
        Ok(())
    }

    /// Appends the new events of a batch. The batch is applied atomically:
    /// on error nothing changes.
    pub fn ingest(&mut self, batch: &EventBatch) -> Result<(Ack, Vec<LogLine>), ServiceError> {
        let (ack, log) = self.plan_ingest(batch)?;
        self.apply(&log);
        Ok((ack, log))
    }

    /// Validates a batch and returns the acknowledgement and the log lines
    /// that [`Session::apply`] would commit, without changing the session.
    pub fn plan_ingest(&self, batch: &EventBatch) -> Result<(Ack, Vec<LogLine>), ServiceError> {
        self.require_open()?;
        let mut log = Vec::new();
        match &self.worker {
            Some(w) if *w != batch.worker_id => return Err(ServiceError::WorkerMismatch),
            Some(_) => {}
            None => log.push(LogLine::Worker(batch.worker_id.clone())),
        }
        let mut keys = HashSet::new();
        let mut high_water = self.page_high_water.clone();
        let mut counts: HashMap<(u32, u32, u64), u32> = HashMap::new();
        let (mut accepted, mut duplicates, mut throttled) = (0, 0, 0);
        for (i, e) in batch.events.iter().enumerate() {
            self.check_page(e.page_idx)?;
            let key = e.dedup_key();
            if self.seen.contains(&key) || keys.contains(&key) {
                duplicates += 1;
                continue;
            }
            if self.submitted[e.page_idx as usize] {
                return Err(ServiceError::ClosedAssignment(self.hit.assignment_id().to_string()));
            }
            self.check_shape(i, e)?;
            let hw = &mut high_water[e.page_idx as usize];
            if let Some(h) = *hw {
                if e.t < h {
                    return Err(ServiceError::NonMonotoneTimestamp { page_idx: e.page_idx, t: e.t, high_water: h });
                }
            }
            if let Some(bucket) = trace_bucket(e) {
                let used = self.trace_counts.get(&bucket).copied().unwrap_or(0) + counts.get(&bucket).copied().unwrap_or(0);
                if used >= MAX_TRACE_PER_SECOND {
                    throttled += 1;
                    continue;
                }
                *counts.entry(bucket).or_insert(0) += 1;
            }
            *hw = Some(e.t);
            keys.insert(key);
            accepted += 1;
            log.push(LogLine::Event(e.clone()));
        }
        let ack = Ack { accepted, duplicates, throttled, high_water_mark: self.high_water_mark() + accepted as u64 };
        Ok((ack, log))
    }

    /// Commits log lines produced by a plan. The lines are trusted.
    pub fn apply(&mut self, log: &[LogLine]) {
        for line in log {
            match line {
                LogLine::Worker(w) => {
                    if self.worker.is_none() {
                        self.worker = Some(w.clone());
                    }
                }
                LogLine::Event(e) => {
                    self.seen.insert(e.dedup_key());
                    let hw = &mut self.page_high_water[e.page_idx as usize];
                    *hw = Some(hw.map_or(e.t, |h| h.max(e.t)));
                    if let Some(bucket) = trace_bucket(e) {
                        *self.trace_counts.entry(bucket).or_insert(0) += 1;
                    }
                    self.events.push(e.clone());
                }
                LogLine::Submit { page_idx, .. } => self.submitted[*page_idx as usize] = true,
            }
        }
    }

    /// Closes a page and builds its records, each serialized as one
    /// canonical JSON line.
    pub fn submit(
        &mut self,
        page_idx: u32,
        submission: &Submission,
        strict: bool,
        key: &HashKey,
    ) -> Result<(Vec<String>, Vec<LogLine>), ServiceError> {
        let (records, log) = self.plan_submit(page_idx, submission, strict, key)?;
        self.apply(&log);
        Ok((records, log))
    }

    /// Builds the records of a page submission without changing the session.
    pub fn plan_submit(
        &self,
        page_idx: u32,
        submission: &Submission,
        strict: bool,
        key: &HashKey,
    ) -> Result<(Vec<String>, Vec<LogLine>), ServiceError> {
        self.require_open()?;
        self.check_page(page_idx)?;
        if self.submitted[page_idx as usize] {
            return Err(ServiceError::PageAlreadySubmitted(page_idx));
        }
        if let Some(h) = self.page_high_water[page_idx as usize] {
            if submission.t < h {
                return Err(ServiceError::NonMonotoneTimestamp { page_idx, t: submission.t, high_water: h });
            }
        }
        let mut log = Vec::new();
        let worker = match (&self.worker, &submission.worker_id) {
            (Some(w), Some(s)) if w != s => return Err(ServiceError::WorkerMismatch),
            (Some(w), _) => w.clone(),
            (None, Some(s)) => {
                log.push(LogLine::Worker(s.clone()));
                s.clone()
            }
            (None, None) => String::new(),
        };
        let records = self.build_records(page_idx, submission.t, &worker, strict, key)?;
        log.push(LogLine::Submit { page_idx, t: submission.t, strict });
        Ok((records, log))
    }

    fn page_events(&self, page_idx: u32) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.page_idx == page_idx)
    }

    fn build_records(
        &self,
        page_idx: u32,
        submit_t: u64,
        raw_worker: &str,
        strict: bool,
        key: &HashKey,
    ) -> Result<Vec<String>, ServiceError> {
        let worker = anonymize_worker(key, raw_worker);
        let assignment = self.hit.assignment_id().to_string();
        match &self.hit {
            Hit::Browsing(b) => {
                let page = &b.pages[page_idx as usize];
                let mut clicks = vec![Vec::new(); page.slots.len()];
                let mut traces = vec![Vec::new(); page.slots.len()];
                for e in self.page_events(page_idx) {
                    match e.kind {
                        EventKind::Click { slot, x, y } => clicks[slot as usize].push(TracePoint::new(x, y, e.t)),
                        EventKind::Trace { slot: Some(slot), x, y } => traces[slot as usize].push(TracePoint::new(x, y, e.t)),
                        _ => {}
                    }
                }
                let mut out = Vec::new();
                for ((slot, selected_record), mouse_tracking) in page.slots.iter().zip(clicks).zip(traces) {
                    if strict && selected_record.is_empty() && mouse_tracking.is_empty() {
                        continue;
                    }
                    let rec = ImageNetRecord {
                        image_id: slot.image.image_id.clone(),
                        class_id: b.class_id.clone(),
                        selected: selected_record.len() % 2 == 1,
                        selected_record,
                        mouse_tracking,
                        image_position: slot.position,
                        image_width: slot.width,
                        image_height: slot.height,
                        worker_id: worker.clone(),
                        assignment_id: assignment.clone(),
                        page_idx,
                        extra: Default::default(),
                    };
                    rec.validate()?;
                    out.push(rec.to_json_string());
                }
                Ok(out)
            }
            Hit::Tagging(tg) => {
                let page = &tg.pages[page_idx as usize];
                let start = self.page_events(page_idx).map(|e| e.t).next().unwrap_or(submit_t);
                let mut rec = CocoRecord {
                    image_id: page.image_id,
                    action_histories: Vec::new(),
                    mouse_tracking: Vec::new(),
                    category_histories: Vec::new(),
                    using_keyboard: false,
                    time_spent: submit_t - start,
                    page_idx,
                    assignment_id: assignment,
                    worker_id: worker,
                    extra: Default::default(),
                };
                for e in self.page_events(page_idx) {
                    let t = e.t - start;
                    match &e.kind {
                        EventKind::Trace { x, y, .. } => rec.mouse_tracking.push(TracePoint::new(*x, *y, t)),
                        EventKind::Icon { action, category, x, y } => {
                            rec.action_histories.push(IconAction::new(*action, category.clone(), TracePoint::new(*x, *y, t)))
                        }
                        EventKind::Category { superclass } => {
                            rec.category_histories.push(CategoryVisit { superclass: superclass.clone(), t })
                        }
                        EventKind::Keyboard => rec.using_keyboard = true,
                        EventKind::Open | EventKind::Click { .. } => {}
                    }
                }
                if strict && rec.action_histories.is_empty() && rec.mouse_tracking.is_empty() && rec.category_histories.is_empty() {
                    return Ok(Vec::new());
                }
                rec.validate()?;
                Ok(vec![rec.to_json_string()])
            }
        }
    }

    /// Re-applies a log to a fresh session and returns the records its
    /// submissions produce, in order.
    pub fn replay(hit: Hit, log: &[LogLine], key: &HashKey) -> Result<(Session, Vec<String>), ServiceError> {
        let mut s = Session::new(hit);
        let mut records = Vec::new();
        for (i, line) in log.iter().enumerate() {
            let corrupt = |m: String| ServiceError::Corrupt { path: format!("log line {}", i + 1), message: m };
            match line {
                LogLine::Worker(w) => match &s.worker {
                    Some(bound) if bound != w => return Err(corrupt("second worker binding".into())),
                    _ => s.apply(std::slice::from_ref(line)),
                },
                LogLine::Event(e) => {
                    let worker = s.worker.clone().ok_or_else(|| corrupt("event before worker".into()))?;
                    let (ack, _) = s.ingest(&EventBatch { worker_id: worker, events: vec![e.clone()] })?;
                    if ack.accepted != 1 {
                        return Err(corrupt("logged event was not accepted on replay".into()));
                    }
                }
                LogLine::Submit { page_idx, t, strict } => {
                    let (recs, _) = s.submit(*page_idx, &Submission { worker_id: None, t: *t }, *strict, key)?;
                    records.extend(recs);
                }
            }
        }
        Ok((s, records))
    }
}
