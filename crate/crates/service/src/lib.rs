//! Annotation task service.
//!
//! Serves HIT pages, ingests batched byproduct events into an append-only
//! per-assignment log, finalizes submitted pages into byproduct records and
//! issues keyed completion codes. Rejected work is re-posted through a queue.

pub mod error;
pub mod event;
pub mod http;
pub mod session;
pub mod store;

pub use error::ServiceError;
pub use event::{Ack, Event, EventBatch, EventKind, LogLine, Submission};
pub use http::{router, serve};
pub use session::{AssignmentState, Session, MAX_TRACE_PER_SECOND};
pub use store::{Index, IndexEntry, PagePayload, Store, StoreConfig};
