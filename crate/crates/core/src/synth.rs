//! Synthetic annotators and corpora.
//!
//! Generators produce records that pass strict validation. They are used by
//! the test suites, the benches and for dry runs of the pipeline without a
//! live crowd.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Map;

use crate::geometry::{BBox, GtBox};
use crate::hit::{BrowsingHit, Slot};
use crate::record::{ActionKind, CocoRecord, IconAction, ImageNetRecord, PagePosition, TracePoint};
use crate::rng::{stream_rng, StreamRng};
use crate::truth::{BrowsingTruth, Instance, TaggingTruth};

pub const CATEGORIES: [&str; 8] = ["person", "dog", "cat", "car", "chair", "cup", "bird", "bottle"];

fn unit(rng: &mut impl Rng) -> f64 {
    rng.random::<f64>()
}

/// A random box with sides in `[min_side, max_side]`.
pub fn random_box(rng: &mut impl Rng, min_side: f64, max_side: f64) -> BBox {
    let w = rng.random_range(min_side..=max_side);
    let h = rng.random_range(min_side..=max_side);
    let x0 = rng.random_range(0.0..=1.0 - w);
    let y0 = rng.random_range(0.0..=1.0 - h);
    BBox { x0, y0, x1: x0 + w, y1: y0 + h }
}

/// A cursor path from a random start towards `target`, ending on it.
pub fn approach_trace(rng: &mut impl Rng, target: (f64, f64), t0: u64, len: usize) -> Vec<TracePoint> {
    let start = (unit(rng), unit(rng));
    let mut t = t0;
    (0..len)
        .map(|i| {
            let a = (i + 1) as f64 / len as f64;
            let jitter = 0.03 * (1.0 - a);
            let x = (start.0 + a * (target.0 - start.0) + rng.random_range(-jitter..=jitter)).clamp(0.0, 1.0);
            let y = (start.1 + a * (target.1 - start.1) + rng.random_range(-jitter..=jitter)).clamp(0.0, 1.0);
            t += rng.random_range(10..40);
            TracePoint::new(x, y, t)
        })
        .collect()
}

fn imagenet_record(image_id: String, class_id: &str, assignment_id: &str, page_idx: u32) -> ImageNetRecord {
    ImageNetRecord {
        image_id,
        class_id: class_id.to_string(),
        selected: false,
        selected_record: Vec::new(),
        mouse_tracking: Vec::new(),
        image_position: PagePosition { x: 0.0, y: 0.0 },
        image_width: 150.0,
        image_height: 150.0,
        worker_id: "sim".into(),
        assignment_id: assignment_id.to_string(),
        page_idx,
        extra: Map::new(),
    }
}

/// Appends `clicks` toggle clicks, each preceded by an approach trace, and
/// sets `selected` from their parity.
fn click_on(rng: &mut impl Rng, r: &mut ImageNetRecord, targets: &[(f64, f64)]) {
    let mut t = r.mouse_tracking.last().map_or(0, |p| p.t);
    for &target in targets {
        let len = rng.random_range(2..8);
        let trace = approach_trace(rng, target, t, len);
        t = trace.last().map_or(t, |p| p.t) + rng.random_range(1..30);
        r.mouse_tracking.extend(trace);
        r.selected_record.push(TracePoint::new(target.0, target.1, t));
    }
    r.selected = r.selected_record.len() % 2 == 1;
}

/// One image's browsing session with 0 to 5 toggle clicks at random points.
pub fn random_click_session(rng: &mut impl Rng, image_id: impl Into<String>) -> ImageNetRecord {
    let mut r = imagenet_record(image_id.into(), "n00000000", "A0", 0);
    let n = rng.random_range(0..6);
    let targets: Vec<(f64, f64)> = (0..n).map(|_| (unit(rng), unit(rng))).collect();
    click_on(rng, &mut r, &targets);
    if n == 0 && rng.random::<bool>() {
        let target = (unit(rng), unit(rng));
        r.mouse_tracking = approach_trace(rng, target, 0, 4);
    }
    r
}

/// Records of `n` images with one or two object boxes each.
///
/// Annotators click on an object with probability `p_on_object`, otherwise
/// anywhere; a few images get an even number of clicks (deselected) or no
/// interaction at all.
pub fn click_corpus(seed: u64, n: usize, p_on_object: f64) -> (Vec<ImageNetRecord>, Vec<GtBox>) {
    let mut records = Vec::with_capacity(n);
    let mut boxes = Vec::new();
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let id = format!("img_{i:04}");
        let own: Vec<BBox> = (0..rng.random_range(1..3)).map(|_| random_box(&mut rng, 0.15, 0.6)).collect();
        boxes.extend(own.iter().map(|b| GtBox::new(id.clone(), *b)));
        let mut r = imagenet_record(id, "n00000001", &format!("A{}", i / 48), (i % 480 / 48) as u32);
        let clicks = match rng.random_range(0..10) {
            0 => 0,
            1 => 2,
            2 => 3,
            _ => 1,
        };
        let targets: Vec<(f64, f64)> = (0..clicks)
            .map(|_| {
                if rng.random::<f64>() < p_on_object {
                    let b = own[rng.random_range(0..own.len())];
                    (rng.random_range(b.x0..=b.x1), rng.random_range(b.y0..=b.y1))
                } else {
                    (unit(&mut rng), unit(&mut rng))
                }
            })
            .collect();
        click_on(&mut rng, &mut r, &targets);
        records.push(r);
    }
    (records, boxes)
}

/// A legal icon history over `categories`, `steps` actions long, with
/// non-decreasing timestamps starting after `t0`.
pub fn legal_actions(rng: &mut impl Rng, categories: &[&str], steps: usize, t0: u64) -> Vec<IconAction> {
    let mut live: BTreeSet<&str> = BTreeSet::new();
    let mut t = t0;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let cat = categories[rng.random_range(0..categories.len())];
        let kind = if live.contains(cat) {
            if rng.random::<f64>() < 0.7 {
                ActionKind::Move
            } else {
                ActionKind::Remove
            }
        } else {
            ActionKind::Add
        };
        match kind {
            ActionKind::Add => live.insert(cat),
            ActionKind::Remove => live.remove(cat),
            ActionKind::Move => true,
        };
        t += rng.random_range(0..500);
        out.push(IconAction::new(kind, cat, TracePoint::new(unit(rng), unit(rng), t)));
    }
    out
}

/// Wraps an action history into a valid tagging record.
pub fn coco_record(image_id: u64, actions: Vec<IconAction>, assignment_id: &str, page_idx: u32) -> CocoRecord {
    let last = actions.last().map_or(0, |a| a.point.t);
    CocoRecord {
        image_id,
        action_histories: actions,
        mouse_tracking: Vec::new(),
        category_histories: Vec::new(),
        using_keyboard: false,
        time_spent: last + 1000,
        page_idx,
        assignment_id: assignment_id.to_string(),
        worker_id: "sim".into(),
        extra: Map::new(),
    }
}

/// Tagging records and truth for `n` images.
///
/// Each present category is tagged with a probability that grows with the
/// side of its largest instance. Tagged icons land on that instance, then
/// may be moved within it or removed and re-added.
pub fn tagging_corpus(seed: u64, n: usize) -> (Vec<CocoRecord>, Vec<TaggingTruth>) {
    let mut records = Vec::with_capacity(n);
    let mut truths = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let image_id = 1 + i as u64;
        let mut cats: Vec<&str> = CATEGORIES.to_vec();
        cats.shuffle(&mut rng);
        let present = &cats[..rng.random_range(1..5)];
        let instances: Vec<Instance> = present
            .iter()
            .map(|c| {
                // Categories differ in typical size: later ones are bigger.
                let j = CATEGORIES.iter().position(|k| k == c).unwrap_or(0) as f64;
                let bbox = random_box(&mut rng, 0.05 + 0.1 * j, 0.15 + 0.1 * j);
                Instance { category: c.to_string(), bbox, mask: None }
            })
            .collect();
        let mut t = 0u64;
        let mut actions = Vec::new();
        for inst in &instances {
            let side = inst.bbox.area().sqrt();
            if rng.random::<f64>() >= 0.15 + 0.8 * side {
                continue;
            }
            let b = inst.bbox;
            let on_box = |rng: &mut StreamRng, t: &mut u64| {
                *t += rng.random_range(50..800);
                TracePoint::new(rng.random_range(b.x0..=b.x1), rng.random_range(b.y0..=b.y1), *t)
            };
            let cat = inst.category.clone();
            actions.push(IconAction::new(ActionKind::Add, cat.clone(), on_box(&mut rng, &mut t)));
            match rng.random_range(0..6) {
                0 | 1 => actions.push(IconAction::new(ActionKind::Move, cat.clone(), on_box(&mut rng, &mut t))),
                2 => {
                    actions.push(IconAction::new(ActionKind::Remove, cat.clone(), on_box(&mut rng, &mut t)));
                    actions.push(IconAction::new(ActionKind::Add, cat.clone(), on_box(&mut rng, &mut t)));
                }
                _ => {}
            }
        }
        records.push(coco_record(image_id, actions, &format!("T{:05}", i / 20), (i % 20) as u32));
        truths.push(TaggingTruth { image_id, instances });
    }
    (records, truths)
}

/// One browsing HIT with exact control over the QC metrics.
///
/// The truth holds `seeds` seed images and `distractors` distractors. The
/// records select the first `selected_seeds` seeds and the first
/// `selected_distractors` distractors, and spread all images round-robin
/// over `pages` pages.
pub fn browsing_qc_case(
    assignment_id: &str,
    seeds: usize,
    selected_seeds: usize,
    distractors: usize,
    selected_distractors: usize,
    pages: u32,
) -> (Vec<ImageNetRecord>, BrowsingTruth) {
    let mut rng = stream_rng(0, 0);
    let mut images = BTreeMap::new();
    let mut records = Vec::new();
    let all = (0..seeds)
        .map(|i| (format!("{assignment_id}_s{i:03}"), true, i < selected_seeds))
        .chain((0..distractors).map(|i| (format!("{assignment_id}_d{i:03}"), false, i < selected_distractors)));
    for (k, (id, seed, select)) in all.enumerate() {
        images.insert(id.clone(), seed);
        let mut r = imagenet_record(id, "n00000002", assignment_id, k as u32 % pages);
        if select {
            click_on(&mut rng, &mut r, &[(0.5, 0.5)]);
        }
        records.push(r);
    }
    let truth = BrowsingTruth { assignment_id: assignment_id.to_string(), class_id: "n00000002".into(), images };
    (records, truth)
}

/// One tagging HIT with exact control over the QC metrics.
///
/// Each of `pages` pages shows one image containing a single category.
/// `icons` icons are spread round-robin over the pages; the first
/// `correct_icons` of them land on their object, the rest on background.
/// With no icons on a page its category goes unrecalled.
pub fn tagging_qc_case(
    assignment_id: &str,
    pages: u32,
    icons: usize,
    correct_icons: usize,
    image_base: u64,
) -> (Vec<CocoRecord>, HashMap<u64, TaggingTruth>) {
    let object = BBox { x0: 0.25, y0: 0.25, x1: 0.75, y1: 0.75 };
    let mut per_page: Vec<Vec<IconAction>> = vec![Vec::new(); pages as usize];
    for k in 0..icons {
        let page = k % pages as usize;
        // Distinct categories per page keep every icon live.
        let cat = format!("c{}", k / pages as usize);
        let (x, y) = if k < correct_icons { (0.5, 0.5) } else { (0.05, 0.05) };
        let t = 100 * (per_page[page].len() as u64 + 1);
        per_page[page].push(IconAction::new(ActionKind::Add, cat, TracePoint::new(x, y, t)));
    }
    let mut records = Vec::new();
    let mut truth = HashMap::new();
    for (p, actions) in per_page.into_iter().enumerate() {
        let image_id = image_base + p as u64;
        let instances = actions
            .iter()
            .map(|a| Instance { category: a.category.clone(), bbox: object, mask: None })
            .chain(std::iter::once(Instance { category: "c0".into(), bbox: object, mask: None }))
            .fold(Vec::<Instance>::new(), |mut acc, i| {
                if !acc.iter().any(|j| j.category == i.category) {
                    acc.push(i);
                }
                acc
            });
        truth.insert(image_id, TaggingTruth { image_id, instances });
        records.push(coco_record(image_id, actions, assignment_id, p as u32));
    }
    (records, truth)
}

/// Browsing records of one annotator working through `hit`.
///
/// Each seed slot is selected with probability `seed_rate`, each
/// distractor with probability `distractor_rate`.
pub fn annotate_browsing_hit(
    hit: &BrowsingHit,
    seed_rate: f64,
    distractor_rate: f64,
    rng: &mut impl Rng,
) -> Vec<ImageNetRecord> {
    let mut out = Vec::new();
    for page in &hit.pages {
        for slot in &page.slots {
            out.push(slot_record(hit, page.page_idx, slot, seed_rate, distractor_rate, rng));
        }
    }
    out
}

fn slot_record(
    hit: &BrowsingHit,
    page_idx: u32,
    slot: &Slot,
    seed_rate: f64,
    distractor_rate: f64,
    rng: &mut impl Rng,
) -> ImageNetRecord {
    let mut r = imagenet_record(slot.image.image_id.clone(), &hit.class_id, &hit.assignment_id, page_idx);
    r.image_position = slot.position;
    r.image_width = slot.width;
    r.image_height = slot.height;
    let p = if slot.seed { seed_rate } else { distractor_rate };
    if rng.random::<f64>() < p {
        let target = (rng.random_range(0.2..0.8), rng.random_range(0.2..0.8));
        click_on(rng, &mut r, &[target]);
    }
    r
}

/// Seed membership of every slot of `hit`.
pub fn browsing_truth(hit: &BrowsingHit) -> BrowsingTruth {
    BrowsingTruth {
        assignment_id: hit.assignment_id.clone(),
        class_id: hit.class_id.clone(),
        images: hit
            .pages
            .iter()
            .flat_map(|p| &p.slots)
            .map(|s| (s.image.image_id.clone(), s.seed))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::ByproductRecord;

    #[test]
    fn generated_records_validate() {
        let mut rng = stream_rng(3, 0);
        for i in 0..200 {
            random_click_session(&mut rng, format!("i{i}")).validate().unwrap();
            let acts = legal_actions(&mut rng, &CATEGORIES[..3], 12, 0);
            coco_record(i, acts, "A", 0).validate().unwrap();
        }
        let (recs, _) = click_corpus(1, 100, 0.8);
        recs.iter().for_each(|r| r.validate().unwrap());
        let (recs, _) = tagging_corpus(1, 100);
        recs.iter().for_each(|r| r.validate().unwrap());
    }
}
