use std::collections::BTreeMap;

use abkit_core::hit::{assemble_browsing_hit, assemble_tagging_hits, CandidatePool, Hit};
use abkit_core::rng::derive_seed;
use abkit_core::truth::BrowsingTruth;
use anyhow::{Context, Result};
use serde::Serialize;

use super::{read_rows, Ctx};
use crate::cli::{Interface, MakeHitsArgs};
use crate::config::{required, usage};
use crate::output::OutDir;

#[derive(Serialize)]
struct Settings {
    interface: Interface,
    pools: Option<std::path::PathBuf>,
    images: Option<std::path::PathBuf>,
    per_class: usize,
    prefix: String,
    seed: u64,
    out: std::path::PathBuf,
}

pub fn run(_ctx: &Ctx, a: MakeHitsArgs) -> Result<()> {
    let interface = required(a.interface, "interface")?;
    let s = Settings {
        interface,
        pools: a.pools,
        images: a.images,
        per_class: a.per_class.unwrap_or(1),
        prefix: a.prefix.unwrap_or_else(|| if interface == Interface::Browsing { "H" } else { "T" }.into()),
        seed: a.seed.unwrap_or(0),
        out: required(a.out, "out")?,
    };
    let mut out = OutDir::create(&s.out)?;
    let input = match s.interface {
        Interface::Browsing => {
            let path = required(s.pools.clone(), "pools")?;
            let pools: Vec<CandidatePool> = read_rows(&path)?;
            let mut hits = Vec::new();
            let mut truth = Vec::new();
            for pool in &pools {
                for k in 0..s.per_class {
                    let id = format!("{}{}-{k:03}", s.prefix, pool.class_id);
                    let hit = assemble_browsing_hit(pool, id.clone(), derive_seed(s.seed, &id))
                        .with_context(|| format!("class {}", pool.class_id))?;
                    let images: BTreeMap<String, bool> = hit
                        .pages
                        .iter()
                        .flat_map(|p| &p.slots)
                        .map(|slot| (slot.image.image_id.clone(), slot.seed))
                        .collect();
                    truth.push(BrowsingTruth { assignment_id: id, class_id: hit.class_id.clone(), images });
                    hits.push(Hit::Browsing(hit));
                }
            }
            out.write_lines("hits.jsonl", &hits)?;
            out.write_lines("truth.jsonl", &truth)?;
            println!("{} browsing HITs written to {}", hits.len(), out.path().display());
            path
        }
        Interface::Tagging => {
            let path = required(s.images.clone(), "images")?;
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let ids: Vec<u64> = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: expected a JSON array of integers: {e}", path.display())))?;
            let hits: Vec<Hit> = assemble_tagging_hits(&ids, &s.prefix)?.into_iter().map(Hit::Tagging).collect();
            out.write_lines("hits.jsonl", &hits)?;
            println!("{} tagging HITs written to {}", hits.len(), out.path().display());
            path
        }
    };
    out.finish("make-hits", &s, vec![s.seed], &[&input])?;
    Ok(())
}
