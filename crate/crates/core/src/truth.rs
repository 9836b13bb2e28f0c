//! Ground-truth references used by quality control and analytics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry::BBox;
use crate::proxy::ProxyPoint;

/// Seed membership for every image packaged in one browsing HIT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrowsingTruth {
    pub assignment_id: String,
    pub class_id: String,
    /// image id -> whether it came from the original (seed) class subset.
    pub images: BTreeMap<String, bool>,
}

impl BrowsingTruth {
    pub fn seed_count(&self) -> usize {
        self.images.values().filter(|s| **s).count()
    }
}

/// Binary mask as row-major run lengths, starting with a background run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

impl Mask {
    pub fn from_bits(width: u32, height: u32, bits: &[bool]) -> Self {
        assert_eq!(bits.len(), (width * height) as usize);
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &b in bits {
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        counts.push(run);
        Mask {
            width,
            height,
            counts,
        }
    }

    fn pixel(&self, idx: u64) -> bool {
        let mut acc = 0u64;
        for (i, &c) in self.counts.iter().enumerate() {
            acc += c as u64;
            if idx < acc {
                return i % 2 == 1;
            }
        }
        false
    }

    pub fn contains(&self, p: ProxyPoint) -> bool {
        if self.width == 0 || self.height == 0 {
            return false;
        }
        let col = ((p.x * self.width as f64) as u32).min(self.width - 1);
        let row = ((p.y * self.height as f64) as u32).min(self.height - 1);
        self.pixel(row as u64 * self.width as u64 + col as u64)
    }

    /// Foreground fraction of the image.
    pub fn area(&self) -> f64 {
        let fg: u64 = self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum();
        fg as f64 / (self.width as f64 * self.height as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub category: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
}

impl Instance {
    /// Mask membership when a mask exists, box membership otherwise.
    pub fn covers(&self, p: ProxyPoint) -> bool {
        match &self.mask {
            Some(m) => m.contains(p),
            None => self.bbox.contains(p),
        }
    }
}

/// Every labelled instance in one tagging image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingTruth {
    pub image_id: u64,
    pub instances: Vec<Instance>,
}

impl TaggingTruth {
    pub fn categories(&self) -> BTreeSet<&str> {
        self.instances.iter().map(|i| i.category.as_str()).collect()
    }

    /// Whether `p` lands on any instance region of `category`.
    pub fn on_region(&self, category: &str, p: ProxyPoint) -> bool {
        self.instances
            .iter()
            .any(|i| i.category == category && i.covers(p))
    }

    /// Box-area fraction of the largest instance of `category`.
    pub fn largest_area(&self, category: &str) -> Option<f64> {
        self.instances
            .iter()
            .filter(|i| i.category == category)
            .map(|i| i.bbox.area())
            .fold(None, |acc, a| Some(acc.map_or(a, |m: f64| m.max(a))))
    }
}
