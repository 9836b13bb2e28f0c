use std::fmt;

use thiserror::Error;

/// Errors raised while parsing, validating or projecting byproduct records.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    /// The input is not a well-formed record: bad JSON, a missing field,
    /// a field of the wrong type, or an unknown field in strict mode.
    #[error("malformed record at `{path}`: {message}")]
    MalformedRecord { path: String, message: String },

    /// The record is well-formed but breaks one of the format's invariants.
    #[error("invariant violation at `{path}`: {violation}")]
    InvariantViolation { path: String, violation: Violation },

    /// A page-frame point lies outside the image rectangle by more than one pixel.
    #[error("point ({x}, {y}) lies outside the image rectangle")]
    OutsideImage { x: f64, y: f64 },
}

impl RecordError {
    pub(crate) fn malformed(path: impl Into<String>, message: impl fmt::Display) -> Self {
        RecordError::MalformedRecord {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn violation(path: impl Into<String>, violation: Violation) -> Self {
        RecordError::InvariantViolation {
            path: path.into(),
            violation,
        }
    }

    /// The violated rule, if this is an invariant violation.
    pub fn violation_kind(&self) -> Option<Violation> {
        match self {
            RecordError::InvariantViolation { violation, .. } => Some(*violation),
            _ => None,
        }
    }
}

/// The record invariants that validation enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Violation {
    /// `selected` disagrees with the parity of `selectedRecord`.
    Parity,
    /// Timestamps decrease within a list.
    NonMonotoneTimestamp,
    /// A normalized coordinate lies outside `[0, 1]` or is not finite.
    CoordinateOutOfRange,
    /// `imageWidth` or `imageHeight` is not strictly positive.
    NonPositiveDimension,
    /// A `move` with no live icon for its category.
    MoveBeforeAdd,
    /// A `remove` with no live icon for its category.
    RemoveBeforeAdd,
    /// An `add` while the category already has a live icon.
    DoubleAdd,
    /// `timeSpent` is smaller than the last recorded timestamp.
    TimeSpentBeforeLastEvent,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::Parity => "parity",
            Violation::NonMonotoneTimestamp => "non-monotone-timestamp",
            Violation::CoordinateOutOfRange => "coordinate-out-of-range",
            Violation::NonPositiveDimension => "non-positive-dimension",
            Violation::MoveBeforeAdd => "move-before-add",
            Violation::RemoveBeforeAdd => "remove-before-add",
            Violation::DoubleAdd => "double-add",
            Violation::TimeSpentBeforeLastEvent => "time-spent-before-last-event",
        };
        f.write_str(s)
    }
}
