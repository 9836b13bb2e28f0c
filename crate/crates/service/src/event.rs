//! Wire and log formats for byproduct events.

use abkit_core::ActionKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What happened. Coordinates are normalized to the image frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    /// The page became visible.
    Open,
    /// Pointer position over an image. Browsing pages name the slot;
    /// tagging pages have a single image and omit it.
    Trace {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slot: Option<u32>,
        x: f64,
        y: f64,
    },
    /// Selection toggle on a browsing slot.
    Click { slot: u32, x: f64, y: f64 },
    /// Icon gesture on a tagging page.
    Icon { action: ActionKind, category: String, x: f64, y: f64 },
    /// Superclass tab opened in the category browser.
    Category { superclass: String },
    /// Arrow-key navigation in the category browser.
    Keyboard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub page_idx: u32,
    /// Milliseconds since the assignment started.
    pub t: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn new(page_idx: u32, t: u64, kind: EventKind) -> Self {
        Event { page_idx, t, kind }
    }

    /// SHA-256 of the canonical JSON of the payload.
    pub fn payload_hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(&self.kind).expect("events serialize");
        Sha256::digest(&bytes).into()
    }

    /// Identity used to drop resent events.
    pub fn dedup_key(&self) -> (u32, u64, [u8; 32]) {
        (self.page_idx, self.t, self.payload_hash())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventBatch {
    pub worker_id: String,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    #[serde(default)]
    pub worker_id: Option<String>,
    /// Milliseconds since the assignment started.
    pub t: u64,
}

/// Acknowledgement of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub accepted: usize,
    pub duplicates: usize,
    /// Trace events over the per-slot rate cap, dropped.
    pub throttled: usize,
    /// Total events accepted for the assignment so far.
    pub high_water_mark: u64,
}

/// One line of an assignment's append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogLine {
    Worker(String),
    Event(Event),
    Submit { page_idx: u32, t: u64, strict: bool },
}
