use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use walkdir::WalkDir;

use super::Ctx;
use crate::cli::ReportArgs;
use crate::config::{required, usage};
use crate::manifest::RunManifest;
use crate::output::{OutDir, MANIFEST};

#[derive(Serialize)]
struct Settings {
    inputs: Vec<PathBuf>,
    max_rows: usize,
    out: PathBuf,
}

fn table(path: &Path, max_rows: usize) -> Result<String> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let mut md = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
    let mut total = 0;
    for row in rdr.records() {
        let row = row?;
        total += 1;
        if total <= max_rows {
            let cells: Vec<&str> = row.iter().collect();
            writeln!(md, "| {} |", cells.join(" | "))?;
        }
    }
    if total > max_rows {
        writeln!(md, "\n{} more rows not shown.", total - max_rows)?;
    }
    Ok(md)
}

pub fn run(_ctx: &Ctx, a: ReportArgs) -> Result<()> {
    let s = Settings {
        inputs: required(a.inputs, "inputs")?,
        max_rows: a.max_rows.unwrap_or(40),
        out: required(a.out, "out")?,
    };
    if s.inputs.is_empty() {
        return Err(usage("--inputs is empty"));
    }
    let mut md = String::from("# abkit report\n");
    for dir in &s.inputs {
        if !dir.is_dir() {
            return Err(usage(format!("{} is not a directory", dir.display())));
        }
        writeln!(md, "\n## {}\n", dir.display())?;
        if let Ok(text) = std::fs::read_to_string(dir.join(MANIFEST)) {
            let m: RunManifest =
                serde_json::from_str(&text).with_context(|| format!("{}/{MANIFEST}", dir.display()))?;
            let seeds: Vec<String> = m.seeds.iter().map(u64::to_string).collect();
            writeln!(md, "Command `{}` (abkit {}), seeds [{}].", m.command, m.version, seeds.join(", "))?;
        }
        for entry in WalkDir::new(dir).sort_by_file_name() {
            let entry = entry?;
            if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "csv") {
                let rel = entry.path().strip_prefix(dir)?.display().to_string();
                writeln!(md, "\n### {rel}\n")?;
                md.push_str(&table(entry.path(), s.max_rows)?);
            }
        }
    }
    let mut out = OutDir::create(&s.out)?;
    out.write("report.md", md.as_bytes())?;
    let inputs: Vec<&Path> = s.inputs.iter().map(PathBuf::as_path).collect();
    out.finish("report", &s, Vec::new(), &inputs)?;
    println!("wrote {}", s.out.join("report.md").display());
    Ok(())
}
