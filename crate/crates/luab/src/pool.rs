//! Spatial pooling of a `C x H x W` feature map into a `C`-vector.

use abkit_core::ProxyPoint;
use serde::{Deserialize, Serialize};

use crate::error::LuabError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    GlobalAverage,
    /// Gaussian weights centred on the point target during training;
    /// global average at inference. Bandwidth is in normalized image units.
    Attentive { bandwidth: f64 },
}

/// Normalized isotropic Gaussian weights over the `h x w` cell centres.
pub fn attentive_weights(
    h: usize,
    w: usize,
    point: ProxyPoint,
    bandwidth: f64,
) -> Result<Vec<f64>, LuabError> {
    if !(bandwidth > 0.0) {
        return Err(LuabError::NonPositiveBandwidth(bandwidth));
    }
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut logits = Vec::with_capacity(h * w);
    for i in 0..h {
        let cy = (i as f64 + 0.5) / h as f64;
        for j in 0..w {
            let cx = (j as f64 + 0.5) / w as f64;
            logits.push(-((cx - point.x).powi(2) + (cy - point.y).powi(2)) * inv);
        }
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= z);
    Ok(weights)
}

pub fn uniform_weights(h: usize, w: usize) -> Vec<f64> {
    vec![1.0 / (h * w) as f64; h * w]
}

/// Weighted sum of the feature vectors at each cell.
pub fn pool_with_weights(features: &[f64], channels: usize, weights: &[f64]) -> Vec<f64> {
    let hw = weights.len();
    (0..channels)
        .map(|c| {
            features[c * hw..(c + 1) * hw]
                .iter()
                .zip(weights)
                .map(|(f, w)| f * w)
                .sum()
        })
        .collect()
}

/// Back-propagates through `pool_with_weights` (weights are constants).
pub fn pool_backward(d_pooled: &[f64], weights: &[f64], d_features: &mut [f64]) {
    let hw = weights.len();
    for (c, &g) in d_pooled.iter().enumerate() {
        for (df, w) in d_features[c * hw..(c + 1) * hw].iter_mut().zip(weights) {
            *df += g * w;
        }
    }
}

/// Point-guided pooling of a `channels x h x w` map; falls back to the
/// global average when no point is given.
pub fn attentive_pool_forward(
    features: &[f64],
    channels: usize,
    h: usize,
    w: usize,
    point: Option<ProxyPoint>,
    bandwidth: f64,
) -> Result<Vec<f64>, LuabError> {
    if features.len() != channels * h * w {
        return Err(LuabError::ShapeMismatch(format!(
            "{} features for a {channels}x{h}x{w} map",
            features.len()
        )));
    }
    let weights = match point {
        Some(p) => attentive_weights(h, w, p, bandwidth)?,
        None => {
            if !(bandwidth > 0.0) {
                return Err(LuabError::NonPositiveBandwidth(bandwidth));
            }
            uniform_weights(h, w)
        }
    };
    Ok(pool_with_weights(features, channels, &weights))
}
