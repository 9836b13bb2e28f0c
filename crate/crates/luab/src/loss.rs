//! Classification and point-regression losses with their gradients.
//!
//! The training objective per sample is
//! `classification(scores, y) + lambda * regression(point, z)`, where the
//! regression term is zero for samples without a point target.

use serde::{Deserialize, Serialize};

use crate::error::LuabError;

/// Smooth-l1 (Huber) loss summed over the two coordinates of `u`, with its
/// gradient with respect to `u`.
pub fn smooth_l1(u: [f64; 2], beta: f64) -> Result<(f64, [f64; 2]), LuabError> {
    if !(beta > 0.0) {
        return Err(LuabError::NonPositiveBeta(beta));
    }
    let mut loss = 0.0;
    let mut grad = [0.0; 2];
    for i in 0..2 {
        let d = u[i];
        if d.abs() < beta {
            loss += 0.5 * d * d / beta;
            grad[i] = d / beta;
        } else {
            loss += d.abs() - 0.5 * beta;
            grad[i] = d.signum();
        }
    }
    Ok((loss, grad))
}

/// Squared error summed over the two coordinates.
pub fn squared_error(u: [f64; 2]) -> (f64, [f64; 2]) {
    (u[0] * u[0] + u[1] * u[1], [2.0 * u[0], 2.0 * u[1]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressionLoss {
    SmoothL1 { beta: f64 },
    Mse,
}

impl Default for RegressionLoss {
    fn default() -> Self {
        RegressionLoss::SmoothL1 { beta: 1.0 }
    }
}

impl RegressionLoss {
    pub fn eval(&self, u: [f64; 2]) -> Result<(f64, [f64; 2]), LuabError> {
        match *self {
            RegressionLoss::SmoothL1 { beta } => smooth_l1(u, beta),
            RegressionLoss::Mse => Ok(squared_error(u)),
        }
    }
}

/// Softmax cross-entropy of `scores` against class `y`, with the gradient
/// with respect to the scores.
pub fn softmax_cross_entropy(scores: &[f64], y: usize) -> (f64, Vec<f64>) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() + max - scores[y];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
    grad[y] -= 1.0;
    (loss, grad)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy with logits, averaged over classes.
pub fn binary_cross_entropy(scores: &[f64], targets: &[bool]) -> (f64, Vec<f64>) {
    let k = scores.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (&s, &t) in scores.iter().zip(targets) {
        let t = if t { 1.0 } else { 0.0 };
        // log(1 + e^s) - t*s, computed stably
        loss += s.max(0.0) - s * t + (-s.abs()).exp().ln_1p();
        grad.push((sigmoid(s) - t) / k);
    }
    (loss / k, grad)
}

/// Label of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Single(usize),
    Multi(Vec<bool>),
}

/// The two terms of the objective and the gradients of the total.
#[derive(Debug, Clone, PartialEq)]
pub struct LossParts {
    pub classification: f64,
    /// Unweighted regression term; zero when no point target is present.
    pub regression: f64,
    /// `classification + lambda * regression`.
    pub total: f64,
    pub d_scores: Vec<f64>,
    pub d_points: Vec<f64>,
}

/// Point targets of one sample: one per regression head, `None` where the
/// head gets no supervision.
pub type PointTargets = [Option<[f64; 2]>];

/// Per-sample objective.
///
/// `points` holds one predicted 2-vector per regression head, flattened.
/// Single-label samples have one head; multi-label samples have one head per
/// class and the regression term is the mean over supervised heads.
pub fn luab_loss(
    scores: &[f64],
    points: &[f64],
    label: &Label,
    targets: &PointTargets,
    lambda: f64,
    regression: RegressionLoss,
) -> Result<LossParts, LuabError> {
    if points.len() != 2 * targets.len() {
        return Err(LuabError::ShapeMismatch(format!(
            "{} point outputs for {} targets",
            points.len(),
            targets.len()
        )));
    }
    let (classification, d_scores) = match label {
        Label::Single(y) => {
            if *y >= scores.len() {
                return Err(LuabError::ShapeMismatch(format!(
                    "label {y} with {} classes",
                    scores.len()
                )));
            }
            softmax_cross_entropy(scores, *y)
        }
        Label::Multi(t) => {
            if t.len() != scores.len() {
                return Err(LuabError::ShapeMismatch(format!(
                    "{} targets for {} classes",
                    t.len(),
                    scores.len()
                )));
            }
            binary_cross_entropy(scores, t)
        }
    };
    let supervised = targets.iter().filter(|t| t.is_some()).count();
    let mut reg = 0.0;
    let mut d_points = vec![0.0; points.len()];
    if supervised > 0 {
        let w = 1.0 / supervised as f64;
        for (h, t) in targets.iter().enumerate() {
            let Some(z) = t else { continue };
            let u = [points[2 * h] - z[0], points[2 * h + 1] - z[1]];
            let (l, g) = regression.eval(u)?;
            reg += w * l;
            d_points[2 * h] = lambda * w * g[0];
            d_points[2 * h + 1] = lambda * w * g[1];
        }
    } else if let RegressionLoss::SmoothL1 { beta } = regression {
        if !(beta > 0.0) {
            return Err(LuabError::NonPositiveBeta(beta));
        }
    }
    Ok(LossParts {
        classification,
        regression: reg,
        total: classification + lambda * reg,
        d_scores,
        d_points,
    })
}
