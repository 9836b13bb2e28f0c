use std::io;

use abkit_core::RecordError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown assignment `{0}`")]
    UnknownAssignment(String),
    #[error("assignment `{0}` is closed")]
    ClosedAssignment(String),
    #[error("page {page_idx}: event at t={t} precedes the page high-water mark {high_water}")]
    NonMonotoneTimestamp { page_idx: u32, t: u64, high_water: u64 },
    #[error("page {0} was already submitted")]
    PageAlreadySubmitted(u32),
    #[error("page {page_idx} out of range for a {pages}-page HIT")]
    InvalidPage { page_idx: u32, pages: usize },
    #[error("event {index}: {reason}")]
    InvalidEvent { index: usize, reason: String },
    #[error("assignment is bound to a different worker")]
    WorkerMismatch,
    #[error("no page of `{0}` has been submitted")]
    NoSubmittedPages(String),
    #[error("assignment `{id}` is {state}; cannot {action}")]
    InvalidTransition { id: String, state: &'static str, action: &'static str },
    #[error("assignment `{0}` already exists")]
    DuplicateAssignment(String),
    #[error("`{0}` is not a valid assignment id")]
    InvalidAssignmentId(String),
    #[error(transparent)]
    InvariantViolation(#[from] RecordError),
    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ServiceError {
    /// Stable machine-readable name, used in HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::UnknownAssignment(_) => "UnknownAssignment",
            ServiceError::ClosedAssignment(_) => "ClosedAssignment",
            ServiceError::NonMonotoneTimestamp { .. } => "NonMonotoneTimestamp",
            ServiceError::PageAlreadySubmitted(_) => "PageAlreadySubmitted",
            ServiceError::InvalidPage { .. } => "InvalidPage",
            ServiceError::InvalidEvent { .. } => "InvalidEvent",
            ServiceError::WorkerMismatch => "WorkerMismatch",
            ServiceError::NoSubmittedPages(_) => "NoSubmittedPages",
            ServiceError::InvalidTransition { .. } => "InvalidTransition",
            ServiceError::DuplicateAssignment(_) => "DuplicateAssignment",
            ServiceError::InvalidAssignmentId(_) => "InvalidAssignmentId",
            ServiceError::InvariantViolation(_) => "InvariantViolation",
            ServiceError::Corrupt { .. } => "Corrupt",
            ServiceError::Io(_) => "Io",
        }
    }
}
