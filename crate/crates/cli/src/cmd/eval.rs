use std::path::PathBuf;

use abkit_luab::{evaluate_robustness, v_metrics, Datasets, LabelMode};
use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use super::train::ModelBundle;
use super::Ctx;
use crate::cli::{EvalArgs, Suite};
use crate::config::required;
use crate::output::OutDir;

#[derive(Serialize)]
struct Settings {
    model: PathBuf,
    suite: Suite,
    seed: u64,
    test_size: usize,
    out: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let model = required(a.model, "model")?;
    let text = std::fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
    let bundle: ModelBundle =
        serde_json::from_str(&text).with_context(|| format!("{} is not a trained model", model.display()))?;
    let s = Settings {
        model,
        suite: required(a.suite, "suite")?,
        seed: a.seed.unwrap_or(bundle.seed),
        test_size: a.test_size.unwrap_or(bundle.experiment.test_size),
        out: a.out,
    };
    let mut cfg = bundle.experiment.clone();
    cfg.train_size = 0;
    cfg.val_size = 0;
    cfg.test_size = s.test_size;
    let data = Datasets::generate(&cfg, s.seed, ctx.exec)?;
    let net = &bundle.network;
    let metrics = match s.suite {
        Suite::Bggap => {
            let r = evaluate_robustness(net, &data.test_corr, &data.test_decorr, ctx.exec)?;
            json!({ "acc_corr": r.acc_corr, "acc_decorr": r.acc_decorr, "bg_gap": r.bg_gap })
        }
        Suite::Loc => {
            let r = evaluate_robustness(net, &data.test_corr, &data.test_decorr, ctx.exec)?;
            json!({ "loc_acc": r.loc_acc })
        }
        Suite::Vmetrics => {
            if net.arch().label_mode != LabelMode::Multi {
                bail!("V metrics need a multi-label model");
            }
            let (v_avg, v_min) = v_metrics(net, &data.test_corr, ctx.exec)?;
            json!({ "v_avg": v_avg, "v_min": v_min })
        }
    };
    let result = json!({ "arm": bundle.arm, "seed": s.seed, "test_size": s.test_size, "metrics": metrics });
    println!("{}", serde_json::to_string(&result)?);
    if let Some(dir) = &s.out {
        let mut out = OutDir::create(dir)?;
        out.write_json("eval.json", &result)?;
        out.finish("eval", &s, vec![s.seed], &[&s.model])?;
    }
    Ok(())
}
