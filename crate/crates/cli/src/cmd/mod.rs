use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use abkit_core::jsonl::{read_json_lines, read_records};
use abkit_core::record::ByproductRecord;
use abkit_core::{Exec, ParseMode};
use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use walkdir::WalkDir;

use crate::cli::{Cli, Command};
use crate::config::ConfigFile;

pub mod analyze;
pub mod eval;
pub mod hits;
pub mod qc;
pub mod report;
pub mod serve;
pub mod train;

pub struct Ctx {
    pub exec: Exec,
    pub config: ConfigFile,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
        config: ConfigFile::load(cli.config.as_deref())?,
    };
    let name = cli.command.name();
    match cli.command {
        Command::Serve(a) => serve::run(&ctx, ctx.config.merge(name, &a)?),
        Command::MakeHits(a) => hits::run(&ctx, ctx.config.merge(name, &a)?),
        Command::Qc(a) => qc::run(&ctx, ctx.config.merge(name, &a)?),
        Command::Analyze(a) => analyze::run(&ctx, ctx.config.merge(name, &a)?),
        Command::Train(a) => train::run(&ctx, ctx.config.merge(name, &a)?),
        Command::Eval(a) => eval::run(&ctx, ctx.config.merge(name, &a)?),
        Command::Report(a) => report::run(&ctx, ctx.config.merge(name, &a)?),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_json_lines(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Files to read records from: `path` itself, or every `records.jsonl`
/// below it in path order.
pub fn record_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = entry?;
        if entry.file_type().is_file() && entry.file_name() == "records.jsonl" {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

pub fn read_all_records<R: ByproductRecord>(path: &Path, lenient: bool) -> Result<Vec<R>> {
    let mode = if lenient { ParseMode::Lenient } else { ParseMode::Strict };
    let mut out = Vec::new();
    for f in record_files(path)? {
        out.extend(read_records(open(&f)?, mode).with_context(|| format!("reading {}", f.display()))?);
    }
    Ok(out)
}
