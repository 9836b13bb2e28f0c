use std::path::PathBuf;

use abkit_luab::experiment::run_arm_on;
use abkit_luab::{Arm, ArmResult, Datasets, ExperimentConfig, LabelMode, Network, RegressionLoss};
use anyhow::Result;
use serde::{Deserialize, Serialize};

use super::Ctx;
use crate::cli::{LabelArg, LossArg, Mode, TrainArgs};
use crate::config::{required, usage};
use crate::output::OutDir;

/// A trained network together with everything needed to rebuild its data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBundle {
    pub arm: Arm,
    pub seed: u64,
    pub experiment: ExperimentConfig,
    pub network: Network,
}

#[derive(Serialize)]
struct Settings {
    mode: Mode,
    seeds: Vec<u64>,
    out: PathBuf,
    experiment: ExperimentConfig,
}

#[derive(Serialize)]
struct ReportRow {
    seed: u64,
    acc_corr: f64,
    acc_decorr: f64,
    bg_gap: f64,
    loc_acc: f64,
    final_regression_loss: f64,
    final_val_localization: f64,
    map: Option<f64>,
    v_avg: Option<f64>,
    v_min: Option<f64>,
}

pub fn arm(mode: Mode) -> Arm {
    match mode {
        Mode::Luab => Arm::Luab,
        Mode::Rand => Arm::Rand,
        Mode::Baseline => Arm::Baseline,
        Mode::Attpool => Arm::Attpool,
    }
}

fn experiment(a: &TrainArgs) -> Result<ExperimentConfig> {
    let mut e = ExperimentConfig::default();
    if let Some(m) = a.label_mode {
        e.scene.label_mode = match m {
            LabelArg::Single => LabelMode::Single,
            LabelArg::Multi => LabelMode::Multi,
        };
    }
    if let Some(rho) = a.rho {
        e.scene.rho = rho;
    }
    let beta = a.beta.unwrap_or(1.0);
    e.train.regression = match a.loss.unwrap_or(LossArg::SmoothL1) {
        LossArg::SmoothL1 => RegressionLoss::SmoothL1 { beta },
        LossArg::Mse if a.beta.is_some() => return Err(usage("--beta only applies to the smooth-l1 loss")),
        LossArg::Mse => RegressionLoss::Mse,
    };
    let t = &mut e.train;
    t.lambda = a.lambda.unwrap_or(t.lambda);
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = a.learning_rate.unwrap_or(t.learning_rate);
    e.train_size = a.train_size.unwrap_or(e.train_size);
    e.val_size = a.val_size.unwrap_or(e.val_size);
    e.test_size = a.test_size.unwrap_or(e.test_size);
    e.scene.validate().map_err(|err| usage(err.to_string()))?;
    e.train.validate().map_err(|err| usage(err.to_string()))?;
    Ok(e)
}

pub fn run(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let s = Settings {
        mode: required(a.mode, "mode")?,
        seeds: a.seeds.clone().unwrap_or_else(|| vec![0]),
        out: required(a.out.clone(), "out")?,
        experiment: experiment(&a)?,
    };
    if s.seeds.is_empty() {
        return Err(usage("--seeds is empty"));
    }
    let arm = arm(s.mode);
    let mut out = OutDir::create(&s.out)?;
    let mut results: Vec<ArmResult> = Vec::new();
    let mut rows = Vec::new();
    for &seed in &s.seeds {
        let data = Datasets::generate(&s.experiment, seed, ctx.exec)?;
        let (result, trained) = run_arm_on(&s.experiment, &data, arm, seed, ctx.exec)?;
        let last = result.curves.last().expect("at least one epoch");
        let r = &result.report;
        rows.push(ReportRow {
            seed,
            acc_corr: r.acc_corr,
            acc_decorr: r.acc_decorr,
            bg_gap: r.bg_gap,
            loc_acc: r.loc_acc,
            final_regression_loss: last.regression_loss,
            final_val_localization: last.val_localization,
            map: r.map,
            v_avg: r.v_avg,
            v_min: r.v_min,
        });
        println!(
            "{} seed {seed}: acc {:.3}/{:.3} bg_gap {:.3} loc {:.3}",
            arm.name(),
            r.acc_corr,
            r.acc_decorr,
            r.bg_gap,
            r.loc_acc
        );
        out.write_csv(&format!("curves_seed{seed}.csv"), &result.curves)?;
        let bundle = ModelBundle { arm, seed, experiment: s.experiment.clone(), network: trained.network };
        out.write_json(&format!("model_seed{seed}.json"), &bundle)?;
        results.push(result);
    }
    out.write_csv("report.csv", &rows)?;
    out.write_json("report.json", &results)?;
    out.finish("train", &s, s.seeds.clone(), &[])?;
    Ok(())
}
