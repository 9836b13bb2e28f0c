//! Annotation work units (HITs) and their assembly from candidate pools.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::PagePosition;

pub const BROWSING_PAGES: usize = 10;
pub const SLOTS_PER_PAGE: usize = 48;
pub const BROWSING_SLOTS: usize = BROWSING_PAGES * SLOTS_PER_PAGE;
/// Seed images make up a quarter of the candidates (1 seed : 3 distractors).
pub const SEED_SLOTS: usize = BROWSING_SLOTS / 4;
pub const DISTRACTOR_SLOTS: usize = BROWSING_SLOTS - SEED_SLOTS;
pub const TAGGING_PAGES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HitError {
    #[error("pool has {seeds} seed and {distractors} distractor images; need {SEED_SLOTS} and {DISTRACTOR_SLOTS}")]
    InsufficientPool { seeds: usize, distractors: usize },
    #[error("image `{0}` is both a seed and a distractor")]
    OverlappingPool(String),
    #[error("need a multiple of {TAGGING_PAGES} images for tagging HITs, got {0}")]
    PartialTaggingHit(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: String,
    pub url: String,
}

impl ImageRef {
    pub fn new(image_id: impl Into<String>) -> Self {
        let image_id = image_id.into();
        let url = format!("/images/{image_id}.jpg");
        ImageRef { image_id, url }
    }
}

/// Candidate images for one class: seeds from the original class subset and
/// distractors from an external source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub class_id: String,
    pub seed_images: Vec<ImageRef>,
    pub distractor_images: Vec<ImageRef>,
}

/// Page geometry for the browsing grid, in page pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub columns: u32,
    pub rows: u32,
    pub cell_width: f64,
    pub cell_height: f64,
    pub gap: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl Default for GridLayout {
    fn default() -> Self {
        GridLayout {
            columns: 8,
            rows: 6,
            cell_width: 150.0,
            cell_height: 150.0,
            gap: 10.0,
            origin_x: 0.0,
            origin_y: 120.0,
        }
    }
}

impl GridLayout {
    pub fn position(&self, slot: usize) -> PagePosition {
        let col = (slot as u32 % self.columns) as f64;
        let row = (slot as u32 / self.columns) as f64;
        PagePosition {
            x: self.origin_x + col * (self.cell_width + self.gap),
            y: self.origin_y + row * (self.cell_height + self.gap),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub slot: u32,
    pub image: ImageRef,
    pub seed: bool,
    pub position: PagePosition,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrowsingPage {
    pub page_idx: u32,
    pub slots: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrowsingHit {
    pub assignment_id: String,
    pub class_id: String,
    pub pages: Vec<BrowsingPage>,
    pub seed_fraction_target: f64,
}

impl BrowsingHit {
    pub fn slot_count(&self) -> usize {
        self.pages.iter().map(|p| p.slots.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingPage {
    pub page_idx: u32,
    pub image_id: u64,
    pub url: String,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingHit {
    pub assignment_id: String,
    pub pages: Vec<TaggingPage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "interface", rename_all = "lowercase")]
pub enum Hit {
    Browsing(BrowsingHit),
    Tagging(TaggingHit),
}

impl Hit {
    pub fn assignment_id(&self) -> &str {
        match self {
            Hit::Browsing(h) => &h.assignment_id,
            Hit::Tagging(h) => &h.assignment_id,
        }
    }

    pub fn page_count(&self) -> usize {
        match self {
            Hit::Browsing(h) => h.pages.len(),
            Hit::Tagging(h) => h.pages.len(),
        }
    }

    /// Same pages under a different assignment id.
    pub fn with_assignment_id(&self, id: impl Into<String>) -> Hit {
        let mut h = self.clone();
        match &mut h {
            Hit::Browsing(b) => b.assignment_id = id.into(),
            Hit::Tagging(t) => t.assignment_id = id.into(),
        }
        h
    }
}

/// Packs 120 seed and 360 distractor images into ten shuffled 48-slot pages.
///
/// Deterministic given `rng_seed`.
pub fn assemble_browsing_hit(
    pool: &CandidatePool,
    assignment_id: impl Into<String>,
    rng_seed: u64,
) -> Result<BrowsingHit, HitError> {
    if pool.seed_images.len() < SEED_SLOTS || pool.distractor_images.len() < DISTRACTOR_SLOTS {
        return Err(HitError::InsufficientPool {
            seeds: pool.seed_images.len(),
            distractors: pool.distractor_images.len(),
        });
    }
    let seeds: HashSet<&str> = pool.seed_images.iter().map(|i| i.image_id.as_str()).collect();
    if let Some(dup) = pool
        .distractor_images
        .iter()
        .find(|i| seeds.contains(i.image_id.as_str()))
    {
        return Err(HitError::OverlappingPool(dup.image_id.clone()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut candidates: Vec<(ImageRef, bool)> = Vec::with_capacity(BROWSING_SLOTS);
    candidates.extend(
        pool.seed_images
            .choose_multiple(&mut rng, SEED_SLOTS)
            .map(|i| (i.clone(), true)),
    );
    candidates.extend(
        pool.distractor_images
            .choose_multiple(&mut rng, DISTRACTOR_SLOTS)
            .map(|i| (i.clone(), false)),
    );
    candidates.shuffle(&mut rng);

    let layout = GridLayout::default();
    let pages = candidates
        .chunks(SLOTS_PER_PAGE)
        .enumerate()
        .map(|(p, chunk)| BrowsingPage {
            page_idx: p as u32,
            slots: chunk
                .iter()
                .enumerate()
                .map(|(s, (image, seed))| Slot {
                    slot: s as u32,
                    image: image.clone(),
                    seed: *seed,
                    position: layout.position(s),
                    width: layout.cell_width,
                    height: layout.cell_height,
                })
                .collect(),
        })
        .collect();
    Ok(BrowsingHit {
        assignment_id: assignment_id.into(),
        class_id: pool.class_id.clone(),
        pages,
        seed_fraction_target: SEED_SLOTS as f64 / BROWSING_SLOTS as f64,
    })
}

/// Splits image ids into 20-page tagging HITs, in order.
pub fn assemble_tagging_hits(
    image_ids: &[u64],
    id_prefix: &str,
) -> Result<Vec<TaggingHit>, HitError> {
    if image_ids.len() % TAGGING_PAGES != 0 {
        return Err(HitError::PartialTaggingHit(image_ids.len()));
    }
    Ok(image_ids
        .chunks(TAGGING_PAGES)
        .enumerate()
        .map(|(h, chunk)| TaggingHit {
            assignment_id: format!("{id_prefix}{h:05}"),
            pages: chunk
                .iter()
                .enumerate()
                .map(|(p, &image_id)| TaggingPage {
                    page_idx: p as u32,
                    image_id,
                    url: format!("/images/{image_id:012}.jpg"),
                    width: 640.0,
                    height: 480.0,
                })
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn pool(seeds: usize, distractors: usize) -> CandidatePool {
        CandidatePool {
            class_id: "n01440764".into(),
            seed_images: (0..seeds).map(|i| ImageRef::new(format!("in_{i}"))).collect(),
            distractor_images: (0..distractors)
                .map(|i| ImageRef::new(format!("fl_{i}")))
                .collect(),
        }
    }

    #[test]
    fn exact_seed_count_and_shape() {
        let hit = assemble_browsing_hit(&pool(120, 360), "A", 7).unwrap();
        assert_eq!(hit.pages.len(), 10);
        assert!(hit.pages.iter().all(|p| p.slots.len() == 48));
        let seeds = hit.pages.iter().flat_map(|p| &p.slots).filter(|s| s.seed).count();
        assert_eq!(seeds, 120);
        let unique: HashSet<_> = hit
            .pages
            .iter()
            .flat_map(|p| &p.slots)
            .map(|s| &s.image.image_id)
            .collect();
        assert_eq!(unique.len(), 480);
    }

    #[test]
    fn small_pool_rejected() {
        assert_eq!(
            assemble_browsing_hit(&pool(100, 360), "A", 7),
            Err(HitError::InsufficientPool {
                seeds: 100,
                distractors: 360
            })
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let p = pool(300, 900);
        assert_eq!(
            assemble_browsing_hit(&p, "A", 7).unwrap(),
            assemble_browsing_hit(&p, "A", 7).unwrap()
        );
        assert_ne!(
            assemble_browsing_hit(&p, "A", 7).unwrap(),
            assemble_browsing_hit(&p, "A", 8).unwrap()
        );
    }

    #[test]
    fn overlapping_pool_rejected() {
        let mut p = pool(120, 360);
        p.distractor_images[5] = p.seed_images[3].clone();
        assert!(matches!(
            assemble_browsing_hit(&p, "A", 1),
            Err(HitError::OverlappingPool(_))
        ));
    }

    #[test]
    fn grid_positions_cover_eight_by_six() {
        let l = GridLayout::default();
        let last = l.position(47);
        assert_eq!(last.x, 7.0 * 160.0);
        assert_eq!(last.y, 120.0 + 5.0 * 160.0);
    }

    #[test]
    fn tagging_hits_have_twenty_pages() {
        let ids: Vec<u64> = (0..40).collect();
        let hits = assemble_tagging_hits(&ids, "T").unwrap();
        assert_eq!(hits.len(), 2);
        assert!(hits.iter().all(|h| h.pages.len() == 20));
        assert!(assemble_tagging_hits(&ids[..30], "T").is_err());
    }
}
