use serde::{Deserialize, Serialize};

use crate::proxy::ProxyPoint;

/// Axis-aligned box in normalized image coordinates, `0 <= x0 < x1 <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    /// Builds a box, returning `None` unless `0 <= x0 < x1 <= 1` and likewise for y.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Option<Self> {
        let b = BBox { x0, y0, x1, y1 };
        b.is_valid().then_some(b)
    }

    pub fn is_valid(&self) -> bool {
        0.0 <= self.x0 && self.x0 < self.x1 && self.x1 <= 1.0 && 0.0 <= self.y0 && self.y0 < self.y1 && self.y1 <= 1.0
    }

    /// Closed-box membership: points on the boundary count as inside.
    pub fn contains(&self, p: ProxyPoint) -> bool {
        self.contains_xy(p.x, p.y)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Area as a fraction of the image.
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> ProxyPoint {
        ProxyPoint {
            x: 0.5 * (self.x0 + self.x1),
            y: 0.5 * (self.y0 + self.y1),
        }
    }

    pub fn full() -> Self {
        BBox {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        }
    }
}

/// A ground-truth box attached to an image.
///
/// `image_width`/`image_height` are optional pixel sizes; analytics that
/// need the aspect ratio treat missing sizes as a square image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub image_id: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_height: Option<f64>,
}

impl GtBox {
    pub fn new(image_id: impl Into<String>, bbox: BBox) -> Self {
        GtBox {
            image_id: image_id.into(),
            bbox,
            image_width: None,
            image_height: None,
        }
    }
}

/// Every instance box of the labelled class in one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBoxes {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
    pub boxes: Vec<BBox>,
}

impl ImageBoxes {
    pub fn square(image_id: impl Into<String>, boxes: Vec<BBox>) -> Self {
        ImageBoxes {
            image_id: image_id.into(),
            width: 1.0,
            height: 1.0,
            boxes,
        }
    }

    /// Any-box matching: a point is correct if it lies in any instance box.
    pub fn contains(&self, p: ProxyPoint) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }
}

/// Groups box rows by image, keeping first-seen image order.
pub fn group_boxes(rows: &[GtBox]) -> Vec<ImageBoxes> {
    let mut out: Vec<ImageBoxes> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for row in rows {
        let slot = *index.entry(row.image_id.clone()).or_insert_with(|| {
            out.push(ImageBoxes {
                image_id: row.image_id.clone(),
                width: row.image_width.unwrap_or(1.0),
                height: row.image_height.unwrap_or(1.0),
                boxes: Vec::new(),
            });
            out.len() - 1
        });
        out[slot].boxes.push(row.bbox);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_counts_as_inside() {
        let b = BBox::new(0.4, 0.4, 0.6, 0.6).unwrap();
        assert!(b.contains(ProxyPoint { x: 0.4, y: 0.6 }));
        assert!(b.contains(b.center()));
        assert!(!b.contains(ProxyPoint { x: 0.0, y: 0.0 }));
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(BBox::new(0.5, 0.1, 0.5, 0.2).is_none());
        assert!(BBox::new(0.1, 0.1, 1.2, 0.2).is_none());
    }

    #[test]
    fn grouping_keeps_instances_together() {
        let b = BBox::full();
        let rows = vec![GtBox::new("a", b), GtBox::new("b", b), GtBox::new("a", b)];
        let g = group_boxes(&rows);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].boxes.len(), 2);
    }
}
