//! abkit-core: annotation byproduct records and the analytics built on them.
//!
//! The crate covers the parts of the pipeline that are pure functions over
//! records:
//!
//! * [`record`]: the browsing (`ImageNetRecord`) and tagging (`CocoRecord`)
//!   byproduct formats, their invariants and their JSON Lines encoding.
//! * [`proxy`]: extraction of weak object locations (final clicks, final
//!   icon placements) from records.
//! * [`hit`]: packaging of candidate images into annotation work units.
//! * [`qc`]: accept/reject rules for submitted work units.
//! * [`analysis`]: localization accuracy, click sweeps, trace quantiles,
//!   relative click bias, action sequences and recall-vs-size.
//!
//! Monte Carlo and batch evaluations run on rayon when the `parallel`
//! feature is enabled (the default) and sequentially otherwise. Every
//! randomized routine draws from per-item counter-based streams, so results
//! do not depend on the schedule.

pub mod analysis;
pub mod anon;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod hit;
pub mod jsonl;
pub mod proxy;
pub mod qc;
pub mod record;
pub mod rng;
pub mod synth;
pub mod truth;

pub use error::{RecordError, Violation};
pub use exec::Exec;
pub use geometry::{BBox, GtBox};
pub use proxy::{
    extract_final_adds, extract_final_click, extract_icon_positions, normalize_point,
    PlacementRule, ProxyPoint,
};
pub use record::{
    parse_coco_record, parse_imagenet_record, ActionKind, CategoryVisit, CocoRecord, IconAction,
    ImageNetRecord, PagePosition, ParseMode, TracePoint,
};
