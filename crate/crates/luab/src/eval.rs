//! Robustness evaluation: background gap, localization, mAP and
//! co-occurrence reliance.

use abkit_core::exec::Exec;
use abkit_core::ProxyPoint;
use serde::{Deserialize, Serialize};

use crate::error::LuabError;
use crate::loss::{sigmoid, Label};
use crate::net::Network;
use crate::scene::SceneSample;

/// Scores and squashed points for every sample, in order.
pub fn predict_all(
    net: &Network,
    samples: &[SceneSample],
    exec: Exec,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>, LuabError> {
    exec.map_slice(samples, |s| net.predict(&s.image)).into_iter().collect()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// 1/0 for single-label top-1; the fraction of correct per-class decisions
/// (score above zero) for multi-label.
pub fn sample_accuracy(label: &Label, scores: &[f64]) -> f64 {
    match label {
        Label::Single(y) => (argmax(scores) == *y) as u8 as f64,
        Label::Multi(t) => {
            let right = t.iter().zip(scores).filter(|(&t, &s)| t == (s > 0.0)).count();
            right as f64 / t.len() as f64
        }
    }
}

/// (points inside their object's box, points scored). Single-label samples
/// score head 0 against the object; multi-label samples score the head of
/// every present class.
pub fn localization_hits(sample: &SceneSample, points: &[f64]) -> (usize, usize) {
    let heads = points.len() / 2;
    let mut hits = 0;
    let mut count = 0;
    for o in &sample.objects {
        let h = if heads == 1 { 0 } else { o.class };
        let p = ProxyPoint { x: points[2 * h], y: points[2 * h + 1] };
        count += 1;
        hits += o.bbox.contains(p) as usize;
        if heads == 1 {
            break;
        }
    }
    (hits, count)
}

/// Mean over classes (with at least one positive) of average precision.
pub fn mean_average_precision(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> f64 {
    let k = labels.first().map_or(0, |l| l.len());
    let mut aps = Vec::new();
    for c in 0..k {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b][c].total_cmp(&scores[a][c]).then(a.cmp(&b)));
        let positives = labels.iter().filter(|l| l[c]).count();
        if positives == 0 {
            continue;
        }
        let mut tp = 0;
        let mut ap = 0.0;
        for (rank, &i) in order.iter().enumerate() {
            if labels[i][c] {
                tp += 1;
                ap += tp as f64 / (rank + 1) as f64;
            }
        }
        aps.push(ap / positives as f64);
    }
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub acc_corr: f64,
    pub acc_decorr: f64,
    /// `acc_corr - acc_decorr`; may be negative.
    pub bg_gap: f64,
    pub loc_acc: f64,
    pub map: Option<f64>,
    pub v_avg: Option<f64>,
    pub v_min: Option<f64>,
}

/// Accuracy on both test sets and localization on the correlated one. For
/// multi-label models also mAP and V metrics on the correlated set.
pub fn evaluate_robustness(
    net: &Network,
    test_corr: &[SceneSample],
    test_decorr: &[SceneSample],
    exec: Exec,
) -> Result<RobustnessReport, LuabError> {
    if test_corr.is_empty() || test_decorr.is_empty() {
        return Err(LuabError::EmptyTestSet);
    }
    let corr = predict_all(net, test_corr, exec)?;
    let decorr = predict_all(net, test_decorr, exec)?;
    let mean_acc = |set: &[SceneSample], preds: &[(Vec<f64>, Vec<f64>)]| {
        set.iter()
            .zip(preds)
            .map(|(s, (sc, _))| sample_accuracy(&s.label, sc))
            .sum::<f64>()
            / set.len() as f64
    };
    let acc_corr = mean_acc(test_corr, &corr);
    let acc_decorr = mean_acc(test_decorr, &decorr);
    let (mut hits, mut count) = (0, 0);
    for (s, (_, pts)) in test_corr.iter().zip(&corr) {
        let (h, c) = localization_hits(s, pts);
        hits += h;
        count += c;
    }
    let mut report = RobustnessReport {
        acc_corr,
        acc_decorr,
        bg_gap: acc_corr - acc_decorr,
        loc_acc: hits as f64 / count.max(1) as f64,
        map: None,
        v_avg: None,
        v_min: None,
    };
    if matches!(test_corr[0].label, Label::Multi(_)) {
        let labels: Vec<Vec<bool>> = test_corr
            .iter()
            .map(|s| match &s.label {
                Label::Multi(t) => Ok(t.clone()),
                Label::Single(_) => Err(LuabError::ShapeMismatch("mixed label modes".into())),
            })
            .collect::<Result<_, _>>()?;
        let scores: Vec<Vec<f64>> = corr.into_iter().map(|(s, _)| s).collect();
        report.map = Some(mean_average_precision(&scores, &labels));
        let (v_avg, v_min) = v_metrics(net, test_corr, exec)?;
        report.v_avg = Some(v_avg);
        report.v_min = Some(v_min);
    }
    Ok(report)
}

/// Co-occurrence reliance.
///
/// For each sample and present class `c`, and each other present class `o`,
/// `q = s_c(X without c) - s_c(X without o)` with `s` the sigmoid score. A
/// model that recognizes `c` by itself has `q` near -1; one that relies on
/// `o` has large `q`. `V^avg` averages `q` over `o` (the expectation over a
/// uniformly chosen erased class), `V^min` takes the worst `o`. Both are
/// averaged over (sample, class) pairs; lower is better.
pub fn v_metrics(net: &Network, samples: &[SceneSample], exec: Exec) -> Result<(f64, f64), LuabError> {
    if samples.is_empty() {
        return Err(LuabError::EmptyTestSet);
    }
    if let Some(i) = samples.iter().position(|s| s.objects.len() < 2) {
        return Err(LuabError::NoCooccurrence(i));
    }
    let per_sample = exec.map_slice(samples, |s| -> Result<(f64, f64, usize), LuabError> {
        let present = s.classes_present();
        let erased: Vec<Vec<f64>> = present
            .iter()
            .map(|&c| net.predict(&s.erase(c)).map(|(sc, _)| sc))
            .collect::<Result<_, _>>()?;
        let (mut avg, mut worst) = (0.0, 0.0);
        for (ci, &c) in present.iter().enumerate() {
            let without_c = sigmoid(erased[ci][c]);
            let qs: Vec<f64> = (0..present.len())
                .filter(|&oi| oi != ci)
                .map(|oi| without_c - sigmoid(erased[oi][c]))
                .collect();
            avg += qs.iter().sum::<f64>() / qs.len() as f64;
            worst += qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
        Ok((avg, worst, present.len()))
    });
    let (mut avg, mut worst, mut pairs) = (0.0, 0.0, 0usize);
    for r in per_sample {
        let (a, w, n) = r?;
        avg += a;
        worst += w;
        pairs += n;
    }
    Ok((avg / pairs as f64, worst / pairs as f64))
}
