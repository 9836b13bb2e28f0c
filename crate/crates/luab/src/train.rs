//! Mini-batch SGD with momentum on the combined objective.

use abkit_core::exec::Exec;
use abkit_core::rng::{derive_seed, stream_rng};
use abkit_core::ProxyPoint;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::LuabError;
use crate::eval::{localization_hits, predict_all, sample_accuracy};
use crate::loss::{luab_loss, RegressionLoss};
use crate::net::{ArchSpec, Network};
use crate::scene::SceneSample;

/// Where point targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Supervision {
    /// Simulated annotator clicks.
    Byproduct,
    /// One uniform point per sample, fixed across epochs.
    RandomPoint,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub regression: RegressionLoss,
    pub supervision: Supervision,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 10.0,
            regression: RegressionLoss::default(),
            supervision: Supervision::Byproduct,
            epochs: 12,
            batch_size: 32,
            learning_rate: 0.15,
            momentum: 0.9,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LuabError> {
        let bad = |m: &str| Err(LuabError::InvalidConfig(m.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if let RegressionLoss::SmoothL1 { beta } = self.regression {
            if !(beta > 0.0) {
                return Err(LuabError::NonPositiveBeta(beta));
            }
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning rate must be positive and momentum in [0, 1)");
        }
        if !(self.grad_clip >= 0.0) {
            return bad("grad_clip must be non-negative");
        }
        Ok(())
    }
}

/// Point targets of a sample under a supervision source.
pub fn targets(sample: &SceneSample, supervision: Supervision) -> Vec<Option<[f64; 2]>> {
    match supervision {
        Supervision::Byproduct => sample.byproduct.clone(),
        Supervision::RandomPoint => sample.random_point.clone(),
        Supervision::None => vec![None; sample.byproduct.len()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean classification loss over the epoch's training samples.
    pub classification_loss: f64,
    /// Mean unweighted regression term over the epoch's training samples.
    pub regression_loss: f64,
    pub val_accuracy: f64,
    /// Validation point-in-box accuracy of the regression head.
    pub val_localization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained {
    pub network: Network,
    pub curves: Vec<EpochStats>,
}

/// Trains a freshly initialized network. Deterministic given `cfg.seed`.
pub fn train(
    arch: &ArchSpec,
    train_set: &[SceneSample],
    val_set: &[SceneSample],
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<Trained, LuabError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(LuabError::InvalidConfig("training set is empty".into()));
    }
    let mut net = Network::init(arch.clone(), &mut stream_rng(derive_seed(cfg.seed, "init"), 0))?;
    let all_targets: Vec<_> = train_set.iter().map(|s| targets(s, cfg.supervision)).collect();
    let n = train_set.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = (steps_per_epoch * cfg.epochs) as f64;
    let mut velocity = vec![0.0; net.param_count()];
    let mut grad = vec![0.0; net.param_count()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut curves = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream_rng(derive_seed(cfg.seed, "shuffle"), epoch as u64));
        let (mut cls_sum, mut reg_sum) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let s = &train_set[i];
                let t = &all_targets[i];
                let attend = t.first().copied().flatten().map(|z| ProxyPoint { x: z[0], y: z[1] });
                let fw = net.forward(&s.image, attend)?;
                let parts = luab_loss(&fw.scores, &fw.points, &s.label, t, cfg.lambda, cfg.regression)?;
                if !parts.total.is_finite() {
                    return Err(LuabError::DivergedTraining { epoch });
                }
                cls_sum += parts.classification;
                reg_sum += parts.regression;
                net.backward(&fw, &parts.d_scores, &parts.d_points, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            let mut norm2 = 0.0;
            for g in grad.iter_mut() {
                *g *= scale;
                norm2 += *g * *g;
            }
            if !norm2.is_finite() {
                return Err(LuabError::DivergedTraining { epoch });
            }
            let clip = if cfg.grad_clip > 0.0 && norm2.sqrt() > cfg.grad_clip {
                cfg.grad_clip / norm2.sqrt()
            } else {
                1.0
            };
            let progress = step as f64 / total_steps;
            let lr = cfg.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
            for ((p, v), g) in net.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v + g * clip;
                *p -= lr * *v;
            }
            step += 1;
        }
        let (val_accuracy, val_localization) = validate(&net, val_set, exec)?;
        curves.push(EpochStats {
            epoch,
            classification_loss: cls_sum / n as f64,
            regression_loss: reg_sum / n as f64,
            val_accuracy,
            val_localization,
        });
    }
    Ok(Trained { network: net, curves })
}

fn validate(net: &Network, val: &[SceneSample], exec: Exec) -> Result<(f64, f64), LuabError> {
    if val.is_empty() {
        return Ok((0.0, 0.0));
    }
    let preds = predict_all(net, val, exec)?;
    let mut acc = 0.0;
    let (mut hits, mut count) = (0usize, 0usize);
    for (s, (scores, points)) in val.iter().zip(&preds) {
        acc += sample_accuracy(&s.label, scores);
        let (h, c) = localization_hits(s, points);
        hits += h;
        count += c;
    }
    Ok((acc / val.len() as f64, hits as f64 / count.max(1) as f64))
}
