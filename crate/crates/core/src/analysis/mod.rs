//! Byproduct statistics: how well clicks, traces and icon placements
//! localize objects, and how annotators behave.

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{BBox, ImageBoxes};
use crate::proxy::{extract_final_click, ProxyPoint};
use crate::record::ImageNetRecord;

pub mod actions;
pub mod bias;
pub mod clicks;
pub mod quantiles;
pub mod recall_size;
pub mod sweep;

pub use actions::action_sequence_histogram;
pub use bias::{relative_click_histogram, RelativeHistogram};
pub use clicks::click_localization_accuracy;
pub use quantiles::{trace_quantile_accuracy, QuantileCurve, QuantileMode};
pub use recall_size::{recall_by_category_and_size, CategoryRecall};
pub use sweep::{gaussian_click_sweep, Sigma, SweepConfig, SweepPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no usable input")]
    EmptyInput,
    #[error("box of image `{0}` has zero area")]
    DegenerateBox(String),
    #[error("no ground truth for image `{0}`")]
    MissingGroundTruth(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Joins final clicks with the boxes of their image. Records without a
/// final click or without boxes are skipped.
pub fn pair_final_clicks(
    records: &[ImageNetRecord],
    boxes: &HashMap<String, ImageBoxes>,
) -> Vec<(ProxyPoint, Vec<BBox>)> {
    records
        .iter()
        .filter_map(|r| {
            let p = extract_final_click(r)?;
            let b = boxes.get(&r.image_id)?;
            Some((p, b.boxes.clone()))
        })
        .collect()
}

/// Indexes grouped boxes by image id.
pub fn index_boxes(images: Vec<ImageBoxes>) -> HashMap<String, ImageBoxes> {
    images.into_iter().map(|b| (b.image_id.clone(), b)).collect()
}
