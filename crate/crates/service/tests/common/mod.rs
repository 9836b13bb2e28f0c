#![allow(dead_code)]

use abkit_core::anon::HashKey;
use abkit_core::hit::{assemble_browsing_hit, assemble_tagging_hits, CandidatePool, Hit, ImageRef};
use abkit_service::{Event, EventBatch, EventKind, Store, StoreConfig};

pub fn pool() -> CandidatePool {
    CandidatePool {
        class_id: "n02084071".into(),
        seed_images: (0..150).map(|i| ImageRef::new(format!("seed_{i}"))).collect(),
        distractor_images: (0..400).map(|i| ImageRef::new(format!("flickr_{i}"))).collect(),
    }
}

pub fn browsing(id: &str, seed: u64) -> Hit {
    Hit::Browsing(assemble_browsing_hit(&pool(), id, seed).unwrap())
}

pub fn tagging(id: &str) -> Hit {
    let ids: Vec<u64> = (1..=20).map(|i| 1000 + i).collect();
    Hit::Tagging(assemble_tagging_hits(&ids, id).unwrap().remove(0))
}

pub fn key() -> HashKey {
    HashKey::new(*b"test-secret")
}

pub fn store(dir: &std::path::Path, strict: bool) -> Store {
    let mut cfg = StoreConfig::new(dir, key());
    cfg.strict = strict;
    Store::open(cfg).unwrap()
}

pub fn batch(events: Vec<Event>) -> EventBatch {
    EventBatch { worker_id: "W1".into(), events }
}

pub fn trace(page: u32, slot: u32, t: u64, x: f64) -> Event {
    Event::new(page, t, EventKind::Trace { slot: Some(slot), x, y: 0.5 })
}

pub fn click(page: u32, slot: u32, t: u64) -> Event {
    Event::new(page, t, EventKind::Click { slot, x: 0.4, y: 0.6 })
}
