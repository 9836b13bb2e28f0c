//! Per-category tagging recall against object size.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::proxy::{extract_icon_positions, PlacementRule};
use crate::record::CocoRecord;
use crate::truth::TaggingTruth;

use super::AnalysisError;

/// Box-area bin edges: side fractions 0, .2, .4, .6, .8, 1 squared.
pub const SIZE_BIN_EDGES: [f64; 6] = [0.0, 0.04, 0.16, 0.36, 0.64, 1.0];

/// Index in `0..5` of the bin holding `area`.
pub fn size_bin(area: f64) -> usize {
    SIZE_BIN_EDGES[1..]
        .iter()
        .position(|&edge| area < edge)
        .unwrap_or(SIZE_BIN_EDGES.len() - 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecall {
    pub category: String,
    /// Annotated images that contain the category.
    pub images: usize,
    /// Of those, images where a live icon of the category was placed.
    pub annotated: usize,
    pub recall: f64,
    /// Mean size bin of the category's largest instance per image.
    pub mean_size_bin: f64,
}

pub fn recall_by_category_and_size(
    records: &[CocoRecord],
    gt: &HashMap<u64, TaggingTruth>,
) -> Result<Vec<CategoryRecall>, AnalysisError> {
    // category -> (images, annotated, size-bin sum)
    let mut acc: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for r in records {
        let truth = gt
            .get(&r.image_id)
            .ok_or_else(|| AnalysisError::MissingGroundTruth(r.image_id.to_string()))?;
        let placed = extract_icon_positions(r, PlacementRule::FinalAdd);
        for cat in truth.categories() {
            let area = truth.largest_area(cat).unwrap_or(0.0);
            let e = acc.entry(cat.to_string()).or_default();
            e.0 += 1;
            if placed.contains_key(cat) {
                e.1 += 1;
            }
            e.2 += size_bin(area);
        }
    }
    Ok(acc
        .into_iter()
        .map(|(category, (images, annotated, bins))| CategoryRecall {
            category,
            images,
            annotated,
            recall: annotated as f64 / images as f64,
            mean_size_bin: bins as f64 / images as f64,
        })
        .collect())
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
