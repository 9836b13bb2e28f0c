use std::collections::HashMap;
use std::path::{Path, PathBuf};

use abkit_core::analysis::actions::sequence_frequencies;
use abkit_core::analysis::recall_size::pearson;
use abkit_core::analysis::{
    action_sequence_histogram, click_localization_accuracy, gaussian_click_sweep, index_boxes,
    pair_final_clicks, recall_by_category_and_size, relative_click_histogram, trace_quantile_accuracy,
    QuantileMode, Sigma, SweepConfig,
};
use abkit_core::geometry::{group_boxes, ImageBoxes};
use abkit_core::truth::TaggingTruth;
use abkit_core::{BBox, CocoRecord, GtBox, ImageNetRecord, ProxyPoint};
use anyhow::Result;
use serde::Serialize;
use serde_json::json;

use super::{read_all_records, read_rows, Ctx};
use crate::cli::{AnalyzeArgs, QuantileModeArg, Stat};
use crate::config::{required, usage};
use crate::output::OutDir;

#[derive(Serialize)]
struct Settings {
    stat: Stat,
    records: Option<PathBuf>,
    gt: Option<PathBuf>,
    out: PathBuf,
    mode: QuantileModeArg,
    bins: usize,
    sigmas: Vec<Sigma>,
    samples: usize,
    seed: u64,
    lenient: bool,
}

impl Settings {
    fn records(&self) -> Result<&Path> {
        self.records.as_deref().ok_or_else(|| usage(format!("`--stat {}` needs --records", self.stat_name())))
    }

    fn gt(&self) -> Result<&Path> {
        self.gt.as_deref().ok_or_else(|| usage(format!("`--stat {}` needs --gt", self.stat_name())))
    }

    fn stat_name(&self) -> String {
        serde_json::to_value(self.stat).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    fn inputs(&self) -> Vec<&Path> {
        self.records.iter().chain(&self.gt).map(PathBuf::as_path).collect()
    }
}

fn boxes(path: &Path) -> Result<Vec<ImageBoxes>> {
    Ok(group_boxes(&read_rows::<GtBox>(path)?))
}

/// The instance box whose centre is nearest the click.
fn nearest_box(p: ProxyPoint, boxes: &[BBox]) -> BBox {
    let d = |b: &BBox| {
        let c = b.center();
        (c.x - p.x).powi(2) + (c.y - p.y).powi(2)
    };
    *boxes.iter().min_by(|a, b| d(a).total_cmp(&d(b))).expect("grouped boxes are non-empty")
}

#[derive(Serialize)]
struct SweepRow {
    sigma: String,
    accuracy: f64,
}

#[derive(Serialize)]
struct BinRow {
    bin: usize,
    accuracy: f64,
    count: usize,
}

#[derive(Serialize)]
struct CellRow {
    row: usize,
    col: usize,
    count: u64,
}

#[derive(Serialize)]
struct SequenceRow {
    sequence: String,
    count: u64,
    frequency: f64,
}

pub fn run(ctx: &Ctx, a: AnalyzeArgs) -> Result<()> {
    let sigmas = match a.sigmas {
        Some(v) => v.iter().map(|s| s.parse::<Sigma>().map_err(usage)).collect::<Result<_>>()?,
        None => SweepConfig::default().sigmas,
    };
    let s = Settings {
        stat: required(a.stat, "stat")?,
        records: a.records,
        gt: a.gt,
        out: required(a.out, "out")?,
        mode: a.mode.unwrap_or(QuantileModeArg::TraceQuantile),
        bins: a.bins.unwrap_or(10),
        sigmas,
        samples: a.samples.unwrap_or(1000),
        seed: a.seed.unwrap_or(0),
        lenient: a.lenient,
    };
    let mut out = OutDir::create(&s.out)?;
    let mut seeds = Vec::new();
    let summary = match s.stat {
        Stat::Clicks => {
            let records: Vec<ImageNetRecord> = read_all_records(s.records()?, s.lenient)?;
            let index = index_boxes(boxes(s.gt()?)?);
            let pairs = pair_final_clicks(&records, &index);
            let accuracy = click_localization_accuracy(&pairs)?;
            #[derive(Serialize)]
            struct Row {
                records: usize,
                scored: usize,
                accuracy: f64,
            }
            out.write_csv("clicks.csv", &[Row { records: records.len(), scored: pairs.len(), accuracy }])?;
            json!({ "records": records.len(), "scored": pairs.len(), "accuracy": accuracy })
        }
        Stat::Sweep => {
            let images = boxes(s.gt()?)?;
            let cfg = SweepConfig { sigmas: s.sigmas.clone(), samples_per_image: s.samples, seed: s.seed };
            seeds.push(s.seed);
            let points = gaussian_click_sweep(&images, &cfg, ctx.exec)?;
            let rows: Vec<SweepRow> =
                points.iter().map(|p| SweepRow { sigma: p.sigma.to_string(), accuracy: p.accuracy }).collect();
            out.write_csv("sweep.csv", &rows)?;
            json!({ "images": images.len(), "points": points })
        }
        Stat::Quantiles => {
            let records: Vec<ImageNetRecord> = read_all_records(s.records()?, s.lenient)?;
            let index: HashMap<String, ImageBoxes> = index_boxes(boxes(s.gt()?)?);
            let mode = match s.mode {
                QuantileModeArg::LastN => QuantileMode::LastN,
                QuantileModeArg::TraceQuantile => QuantileMode::TraceQuantile,
                QuantileModeArg::TimeQuantile => QuantileMode::TimeQuantile,
            };
            let curve = trace_quantile_accuracy(&records, &index, mode, s.bins)?;
            let rows: Vec<BinRow> = curve
                .accuracy
                .iter()
                .zip(&curve.counts)
                .enumerate()
                .map(|(bin, (&accuracy, &count))| BinRow { bin, accuracy, count })
                .collect();
            out.write_csv("quantiles.csv", &rows)?;
            serde_json::to_value(&curve)?
        }
        Stat::Bias => {
            let records: Vec<ImageNetRecord> = read_all_records(s.records()?, s.lenient)?;
            let index = index_boxes(boxes(s.gt()?)?);
            let pairs: Vec<(ProxyPoint, BBox)> =
                pair_final_clicks(&records, &index).into_iter().map(|(p, b)| (p, nearest_box(p, &b))).collect();
            let hist = relative_click_histogram(&pairs, s.bins)?;
            let side = hist.side();
            let rows: Vec<CellRow> = (0..side)
                .flat_map(|row| (0..side).map(move |col| (row, col)))
                .map(|(row, col)| CellRow { row, col, count: hist.get(row, col) })
                .collect();
            out.write_csv("bias.csv", &rows)?;
            json!({
                "points": hist.total(),
                "grid_bins": hist.grid_bins,
                "inner_mode": hist.inner_mode(),
                "inner_mean_offset": hist.inner_mean_offset(),
            })
        }
        Stat::Actions => {
            let records: Vec<CocoRecord> = read_all_records(s.records()?, s.lenient)?;
            let hist = action_sequence_histogram(&records);
            let freq = sequence_frequencies(&hist);
            let mut rows: Vec<SequenceRow> = hist
                .iter()
                .map(|(k, &count)| SequenceRow { sequence: k.clone(), count, frequency: freq[k] })
                .collect();
            rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.sequence.cmp(&b.sequence)));
            out.write_csv("actions.csv", &rows)?;
            json!({ "records": records.len(), "live_icons": hist.values().sum::<u64>(), "sequences": hist.len() })
        }
        Stat::RecallSize => {
            let records: Vec<CocoRecord> = read_all_records(s.records()?, s.lenient)?;
            let truth: HashMap<u64, TaggingTruth> =
                read_rows::<TaggingTruth>(s.gt()?)?.into_iter().map(|t| (t.image_id, t)).collect();
            let rows = recall_by_category_and_size(&records, &truth)?;
            let xs: Vec<f64> = rows.iter().map(|r| r.mean_size_bin).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.recall).collect();
            out.write_csv("recall_size.csv", &rows)?;
            json!({ "categories": rows.len(), "pearson": pearson(&xs, &ys) })
        }
    };
    out.write_json("summary.json", &summary)?;
    println!("{}", serde_json::to_string(&summary)?);
    out.finish("analyze", &s, seeds, &s.inputs())?;
    Ok(())
}
