#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use abkit_core::record::ByproductRecord;
use serde::Serialize;

pub fn abkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abkit")).args(args).output().expect("abkit runs")
}

pub fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn write_records<R: ByproductRecord>(path: &Path, records: &[R]) {
    let text: String = records.iter().map(|r| r.to_json_string() + "\n").collect();
    fs::write(path, text).unwrap();
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) {
    let text: String = rows.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    fs::write(path, text).unwrap();
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Runs `args` twice into the same output directory and returns both snapshots.
pub fn run_twice(args: &[&str], out: &Path) -> (BTreeMap<PathBuf, Vec<u8>>, BTreeMap<PathBuf, Vec<u8>>) {
    let first = abkit(args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let a = snapshot(out);
    fs::remove_dir_all(out).unwrap();
    let second = abkit(args);
    assert!(second.status.success(), "{}", String::from_utf8_lossy(&second.stderr));
    (a, snapshot(out))
}
