use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use abkit_core::hit::Hit;
use abkit_core::qc::{evaluate_coco_hit, evaluate_imagenet_hit, repost_rejected, summarize, HitVerdict};
use abkit_core::truth::{BrowsingTruth, TaggingTruth};
use abkit_core::{CocoRecord, ImageNetRecord};
use anyhow::{bail, Context, Result};
use serde::Serialize;

use super::{read_all_records, read_rows, Ctx};
use crate::cli::{QcArgs, RecordKind};
use crate::config::{required, usage};
use crate::output::OutDir;

#[derive(Serialize)]
struct Settings {
    records: PathBuf,
    gt: PathBuf,
    interface: RecordKind,
    report: PathBuf,
    codes: Option<PathBuf>,
    hits: Option<PathBuf>,
    lenient: bool,
}

#[derive(Serialize)]
struct SummaryRow {
    metric: String,
    value: f64,
}

fn load_codes(path: Option<&Path>) -> Result<Option<HashMap<String, bool>>> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let codes = serde_json::from_str(&text)
        .map_err(|e| usage(format!("{}: expected an object of booleans: {e}", path.display())))?;
    Ok(Some(codes))
}

fn group<R>(records: Vec<R>, id: impl Fn(&R) -> &str) -> BTreeMap<String, Vec<R>> {
    let mut out: BTreeMap<String, Vec<R>> = BTreeMap::new();
    for r in records {
        out.entry(id(&r).to_string()).or_default().push(r);
    }
    out
}

pub fn run(_ctx: &Ctx, a: QcArgs) -> Result<()> {
    let s = Settings {
        records: required(a.records, "records")?,
        gt: required(a.gt, "gt")?,
        interface: required(a.interface, "interface")?,
        report: required(a.report, "report")?,
        codes: a.codes,
        hits: a.hits,
        lenient: a.lenient,
    };
    let codes = load_codes(s.codes.as_deref())?;
    let code_ok = |id: &str| codes.as_ref().is_none_or(|c| c.get(id).copied().unwrap_or(false));
    let hits: Vec<Hit> = match &s.hits {
        Some(p) => read_rows(p)?,
        None => Vec::new(),
    };

    let verdicts: Vec<HitVerdict> = match s.interface {
        RecordKind::Imagenet => {
            let truth: Vec<BrowsingTruth> = read_rows(&s.gt)?;
            let mut by_id = group(read_all_records::<ImageNetRecord>(&s.records, s.lenient)?, |r| &r.assignment_id);
            let mut out = Vec::new();
            for gt in &truth {
                let recs = by_id.remove(&gt.assignment_id).unwrap_or_default();
                out.push(evaluate_imagenet_hit(&recs, gt, code_ok(&gt.assignment_id))?);
            }
            if let Some(id) = by_id.keys().next() {
                bail!("no ground truth for assignment `{id}`");
            }
            out
        }
        RecordKind::Coco => {
            let truth: HashMap<u64, TaggingTruth> =
                read_rows::<TaggingTruth>(&s.gt)?.into_iter().map(|t| (t.image_id, t)).collect();
            let mut by_id = group(read_all_records::<CocoRecord>(&s.records, s.lenient)?, |r| &r.assignment_id);
            let ids: BTreeSet<String> = by_id
                .keys()
                .cloned()
                .chain(hits.iter().filter(|h| matches!(h, Hit::Tagging(_))).map(|h| h.assignment_id().to_string()))
                .collect();
            let mut out = Vec::new();
            for id in ids {
                let recs = by_id.remove(&id).unwrap_or_default();
                out.push(evaluate_coco_hit(&id, &recs, &truth, code_ok(&id))?);
            }
            out
        }
    };

    let summary = summarize(&verdicts);
    let mut rows = vec![
        SummaryRow { metric: "total".into(), value: summary.total as f64 },
        SummaryRow { metric: "accepted".into(), value: summary.accepted as f64 },
        SummaryRow { metric: "rejected".into(), value: summary.rejected as f64 },
        SummaryRow { metric: "rejection_rate".into(), value: summary.rejection_rate },
    ];
    rows.extend(summary.reasons.iter().map(|(r, n)| SummaryRow { metric: format!("reason:{r}"), value: *n as f64 }));

    let mut out = OutDir::create(&s.report)?;
    out.write_lines("verdicts.jsonl", &verdicts)?;
    out.write_csv("summary.csv", &rows)?;
    let mut inputs: Vec<&Path> = vec![&s.records, &s.gt];
    if let Some(p) = &s.hits {
        out.write_lines("reposts.jsonl", &repost_rejected(&verdicts, &hits))?;
        inputs.push(p);
    }
    if let Some(p) = &s.codes {
        inputs.push(p);
    }
    println!(
        "{} HITs: {} accepted, {} rejected ({:.1}%)",
        summary.total,
        summary.accepted,
        summary.rejected,
        100.0 * summary.rejection_rate
    );
    out.finish("qc", &s, Vec::new(), &inputs)?;
    Ok(())
}
