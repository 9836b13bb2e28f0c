use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use abkit_core::anon::HashKey;
use abkit_core::hit::Hit;
use abkit_service::{ServiceError, Store, StoreConfig};
use anyhow::{Context, Result};
use serde::Serialize;

use super::{read_rows, Ctx};
use crate::cli::ServeArgs;
use crate::config::{required, usage};
use crate::output::OutDir;

pub const SECRET_ENV: &str = "ABKIT_SECRET";
const SECRET_FILE: &str = "secret.key";

#[derive(Serialize)]
struct Settings {
    host: String,
    port: u16,
    data_dir: PathBuf,
    strict: bool,
    hits: Option<PathBuf>,
    max_reposts: u32,
}

/// The key from `ABKIT_SECRET`, else from `<data-dir>/secret.key`, which is
/// created with random content on first use.
fn load_secret(data_dir: &Path) -> Result<HashKey> {
    if let Ok(s) = std::env::var(SECRET_ENV) {
        if s.is_empty() {
            return Err(usage(format!("{SECRET_ENV} is set but empty")));
        }
        return Ok(HashKey::new(s.into_bytes()));
    }
    let path = data_dir.join(SECRET_FILE);
    if !path.exists() {
        let key: [u8; 32] = rand::random();
        std::fs::write(&path, hex::encode(key)).with_context(|| format!("writing {}", path.display()))?;
    }
    let text = std::fs::read_to_string(&path)?;
    Ok(HashKey::new(text.trim().as_bytes().to_vec()))
}

pub fn run(_ctx: &Ctx, a: ServeArgs) -> Result<()> {
    let s = Settings {
        host: a.host.unwrap_or_else(|| "127.0.0.1".into()),
        port: a.port.unwrap_or(8080),
        data_dir: required(a.data_dir, "data_dir")?,
        strict: a.strict,
        hits: a.hits,
        max_reposts: a.max_reposts.unwrap_or(3),
    };
    let addr: SocketAddr = format!("{}:{}", s.host, s.port)
        .parse()
        .map_err(|e| usage(format!("bad listen address: {e}")))?;
    std::fs::create_dir_all(&s.data_dir)?;
    let mut cfg = StoreConfig::new(&s.data_dir, load_secret(&s.data_dir)?);
    cfg.strict = s.strict;
    cfg.max_reposts = s.max_reposts;
    let store = Store::open(cfg)?;
    let mut inputs: Vec<&Path> = Vec::new();
    if let Some(path) = &s.hits {
        let hits: Vec<Hit> = read_rows(path)?;
        let mut added = 0;
        for hit in hits {
            match store.register(hit) {
                Ok(()) => added += 1,
                Err(ServiceError::DuplicateAssignment(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        println!("registered {added} new HITs");
        inputs.push(path);
    }
    OutDir::create(&s.data_dir)?.finish("serve", &s, Vec::new(), &inputs)?;
    println!("listening on http://{addr} ({} assignments)", store.assignment_ids().len());
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(abkit_service::serve(addr, Arc::new(store)))?;
    Ok(())
}
