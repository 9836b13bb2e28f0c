//! Click positions relative to the object box.

use serde::{Deserialize, Serialize};

use crate::geometry::BBox;
use crate::proxy::ProxyPoint;

use super::AnalysisError;

/// 2-D histogram over box-normalized coordinates.
///
/// The grid has `grid_bins + 2` cells per axis: index 0 and
/// `grid_bins + 1` form an overflow ring for clicks outside the box, the
/// inner `grid_bins` cells split `[0, 1]` evenly. Cells are row-major
/// (`row` follows y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeHistogram {
    pub grid_bins: usize,
    pub counts: Vec<u64>,
}

impl RelativeHistogram {
    pub fn side(&self) -> usize {
        self.grid_bins + 2
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.side() + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Box-frame centre `(u, v)` of the fullest inner cell.
    pub fn inner_mode(&self) -> (f64, f64) {
        let g = self.grid_bins;
        let mut best = (0, 0, 0u64);
        for row in 1..=g {
            for col in 1..=g {
                let c = self.get(row, col);
                if c > best.2 {
                    best = (row, col, c);
                }
            }
        }
        let centre = |i: usize| (i as f64 - 0.5) / g as f64;
        (centre(best.1), centre(best.0))
    }

    /// Mean box-frame offset of in-box clicks from the box centre.
    pub fn inner_mean_offset(&self) -> (f64, f64) {
        let g = self.grid_bins;
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
        for row in 1..=g {
            for col in 1..=g {
                let c = self.get(row, col) as f64;
                su += c * ((col as f64 - 0.5) / g as f64 - 0.5);
                sv += c * ((row as f64 - 0.5) / g as f64 - 0.5);
                n += c;
            }
        }
        if n == 0.0 {
            (0.0, 0.0)
        } else {
            (su / n, sv / n)
        }
    }
}

fn cell(u: f64, g: usize) -> usize {
    if u < 0.0 {
        0
    } else if u > 1.0 {
        g + 1
    } else {
        1 + ((u * g as f64) as usize).min(g - 1)
    }
}

pub fn relative_click_histogram(
    pairs: &[(ProxyPoint, BBox)],
    grid_bins: usize,
) -> Result<RelativeHistogram, AnalysisError> {
    if grid_bins == 0 {
        return Err(AnalysisError::InvalidConfig("grid_bins must be > 0".into()));
    }
    let side = grid_bins + 2;
    let mut counts = vec![0u64; side * side];
    for (i, (p, b)) in pairs.iter().enumerate() {
        if b.width() <= 0.0 || b.height() <= 0.0 {
            return Err(AnalysisError::DegenerateBox(i.to_string()));
        }
        let u = (p.x - b.x0) / b.width();
        let v = (p.y - b.y0) / b.height();
        counts[cell(v, grid_bins) * side + cell(u, grid_bins)] += 1;
    }
    Ok(RelativeHistogram { grid_bins, counts })
}
