use abkit_core::exec::Exec;
use abkit_core::rng::stream_rng;
use abkit_core::ProxyPoint;
use abkit_luab::eval::{evaluate_robustness, predict_all, sample_accuracy, v_metrics};
use abkit_luab::loss::{luab_loss, Label, RegressionLoss};
use abkit_luab::net::{ArchSpec, ConvSpec, Network};
use abkit_luab::pool::{attentive_pool_forward, attentive_weights};
use abkit_luab::scene::{generate_dataset, LabelMode, SceneConfig};
use abkit_luab::train::{train, Supervision, TrainConfig};
use proptest::prelude::*;
use rand::Rng;

fn small_arch(mode: LabelMode) -> ArchSpec {
    ArchSpec {
        convs: vec![ConvSpec { out_channels: 6, stride: 2 }, ConvSpec { out_channels: 8, stride: 2 }],
        ..ArchSpec::desk(8, mode)
    }
}

fn quick_train_cfg(seed: u64) -> TrainConfig {
    TrainConfig { epochs: 2, batch_size: 16, seed, ..TrainConfig::default() }
}

#[test]
fn rho_point_nine_matches_empirically() {
    let cfg = SceneConfig::default().with_rho(0.9);
    let data = generate_dataset(&cfg, 10_000, 11, Exec::Parallel).unwrap();
    let matches = data.iter().filter(|s| Label::Single(s.bg_kind) == s.label).count();
    let p = matches as f64 / data.len() as f64;
    assert!((p - 0.9).abs() <= 0.01, "P(bg matches) = {p}");
    assert!(data.iter().all(|s| s.correlated == (Label::Single(s.bg_kind) == s.label)));
}

#[test]
fn decorrelated_background_is_independent_of_class() {
    let cfg = SceneConfig::default().decorrelated();
    let data = generate_dataset(&cfg, 8_000, 12, Exec::Parallel).unwrap();
    let k = cfg.classes;
    let mut table = vec![vec![0usize; k]; k];
    for s in &data {
        if let Label::Single(y) = s.label {
            table[y][s.bg_kind] += 1;
        }
    }
    // Chi-square against the product of marginals, 49 degrees of freedom;
    // the 0.999 quantile is about 85.
    let n = data.len() as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let cols: Vec<f64> = (0..k).map(|j| table.iter().map(|r| r[j]).sum::<usize>() as f64).collect();
    let mut chi2 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let e = rows[i] * cols[j] / n;
            chi2 += (table[i][j] as f64 - e).powi(2) / e;
        }
    }
    assert!(chi2 < 85.0, "chi2 = {chi2}");
}

#[test]
fn same_seed_gives_bitwise_identical_runs() {
    let scene = SceneConfig::default();
    let tr = generate_dataset(&scene, 160, 3, Exec::Parallel).unwrap();
    let va = generate_dataset(&scene, 40, 4, Exec::Parallel).unwrap();
    let arch = small_arch(LabelMode::Single);
    let a = train(&arch, &tr, &va, &quick_train_cfg(5), Exec::Parallel).unwrap();
    let b = train(&arch, &tr, &va, &quick_train_cfg(5), Exec::Sequential).unwrap();
    assert_eq!(a.curves.len(), 2);
    for (x, y) in a.curves.iter().zip(&b.curves) {
        assert_eq!(x.classification_loss.to_bits(), y.classification_loss.to_bits());
        assert_eq!(x.regression_loss.to_bits(), y.regression_loss.to_bits());
        assert_eq!(x.val_accuracy.to_bits(), y.val_accuracy.to_bits());
        assert_eq!(x.val_localization.to_bits(), y.val_localization.to_bits());
    }
    assert!(a.network.params.iter().zip(&b.network.params).all(|(p, q)| p.to_bits() == q.to_bits()));
    let c = train(&arch, &tr, &va, &quick_train_cfg(6), Exec::Parallel).unwrap();
    assert_ne!(a.network.params, c.network.params);
}

#[test]
fn zero_lambda_leaves_the_regression_head_uninformative() {
    let scene = SceneConfig::default();
    let tr = generate_dataset(&scene, 400, 21, Exec::Parallel).unwrap();
    let test = generate_dataset(&scene, 1_000, 22, Exec::Parallel).unwrap();
    let arch = small_arch(LabelMode::Single);

    let with_points = train(&arch, &tr, &[], &TrainConfig { lambda: 0.0, ..quick_train_cfg(1) }, Exec::Parallel).unwrap();
    let without = train(
        &arch,
        &tr,
        &[],
        &TrainConfig { lambda: 0.0, supervision: Supervision::None, ..quick_train_cfg(1) },
        Exec::Parallel,
    )
    .unwrap();
    // The targets never reach the parameters.
    assert_eq!(with_points.network.params, without.network.params);

    let preds = predict_all(&with_points.network, &test, Exec::Parallel).unwrap();
    let hits = test.iter().zip(&preds).filter(|(s, (_, p))| s.gt_box().contains(ProxyPoint { x: p[0], y: p[1] })).count();
    let loc = hits as f64 / test.len() as f64;

    // A uniformly random guess hits with probability equal to the box area.
    let mean_area = test.iter().map(|s| s.gt_box().area()).sum::<f64>() / test.len() as f64;
    let mut rng = stream_rng(99, 0);
    let draws = 40;
    let uniform_hits: usize = test
        .iter()
        .map(|s| (0..draws).filter(|_| s.gt_box().contains_xy(rng.random(), rng.random())).count())
        .sum();
    let uniform = uniform_hits as f64 / (draws * test.len()) as f64;
    assert!((uniform - mean_area).abs() < 0.01, "uniform {uniform} vs area {mean_area}");

    // The untrained head outputs a near-constant point, so it can do no
    // better than the best constant guess.
    let mut best_constant: f64 = 0.0;
    for i in 0..=20 {
        for j in 0..=20 {
            let p = ProxyPoint { x: i as f64 / 20.0, y: j as f64 / 20.0 };
            let h = test.iter().filter(|s| s.gt_box().contains(p)).count();
            best_constant = best_constant.max(h as f64 / test.len() as f64);
        }
    }
    assert!(loc <= best_constant + 0.02, "loc {loc} above best constant {best_constant}");
    let spread = preds.iter().map(|(_, p)| (p[0] - preds[0].1[0]).abs().max((p[1] - preds[0].1[1]).abs())).fold(0.0, f64::max);
    assert!(spread < 0.1, "untrained head varies by {spread}");
}

#[test]
fn bg_gap_is_the_accuracy_difference() {
    let scene = SceneConfig::default();
    let corr = generate_dataset(&scene.with_rho(1.0), 200, 31, Exec::Parallel).unwrap();
    let decorr = generate_dataset(&scene.decorrelated(), 200, 32, Exec::Parallel).unwrap();
    let net = Network::init(small_arch(LabelMode::Single), &mut stream_rng(33, 0)).unwrap();
    let r = evaluate_robustness(&net, &corr, &decorr, Exec::Parallel).unwrap();
    assert_eq!(r.bg_gap.to_bits(), (r.acc_corr - r.acc_decorr).to_bits());
    let acc = |set: &[abkit_luab::SceneSample]| {
        let mut right = 0;
        for s in set {
            let (scores, _) = net.predict(&s.image).unwrap();
            let top = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
            right += (Label::Single(top) == s.label) as usize;
        }
        right as f64 / set.len() as f64
    };
    assert_eq!(r.acc_corr, acc(&corr));
    assert_eq!(r.acc_decorr, acc(&decorr));
    assert!(r.map.is_none() && r.v_avg.is_none());
}

#[test]
fn v_min_dominates_v_avg() {
    let scene = SceneConfig { label_mode: LabelMode::Multi, co_occurrence: 1.0, ..SceneConfig::default() };
    let data = generate_dataset(&scene, 60, 41, Exec::Parallel).unwrap();
    for seed in 0..3 {
        let mut net = Network::init(small_arch(LabelMode::Multi), &mut stream_rng(42, seed)).unwrap();
        for p in net.params.iter_mut() {
            *p *= 3.0;
        }
        let (avg, min) = v_metrics(&net, &data, Exec::Parallel).unwrap();
        assert!(min >= avg, "V^min {min} < V^avg {avg}");
        assert!((-1.0..=1.0).contains(&avg) && (-1.0..=1.0).contains(&min));
    }
}

#[test]
fn v_metrics_reject_single_object_samples() {
    let scene = SceneConfig { label_mode: LabelMode::Multi, co_occurrence: 0.0, third_object: 0.0, ..SceneConfig::default() };
    let data = generate_dataset(&scene, 20, 43, Exec::Parallel).unwrap();
    let net = Network::init(small_arch(LabelMode::Multi), &mut stream_rng(44, 0)).unwrap();
    if data.iter().any(|s| s.objects.len() < 2) {
        assert!(v_metrics(&net, &data, Exec::Parallel).is_err());
    }
}

/// Least-squares residual of fitting `z` with `[1, m_x, m_y]`, where `m` is
/// the brightness-weighted image centroid.
fn linear_fit_residual(features: &[[f64; 3]], z: &[[f64; 2]]) -> f64 {
    let mut ata = [[0.0; 3]; 3];
    for f in features {
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += f[i] * f[j];
            }
        }
    }
    let inv = invert3(ata);
    let mut total = 0.0;
    for d in 0..2 {
        let mut atb = [0.0; 3];
        for (f, t) in features.iter().zip(z) {
            for i in 0..3 {
                atb[i] += f[i] * t[d];
            }
        }
        let w: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i][j] * atb[j]).sum()).collect();
        for (f, t) in features.iter().zip(z) {
            let pred: f64 = (0..3).map(|i| w[i] * f[i]).sum();
            total += (pred - t[d]).powi(2);
        }
    }
    total / features.len() as f64
}

fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    inv
}

fn bright_centroid(s: &abkit_luab::SceneSample) -> [f64; 3] {
    let n = s.size;
    let (mut w, mut x, mut y) = (0.0, 0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            let v = (0..3).map(|ch| s.image[ch * n * n + r * n + c] as f64).sum::<f64>() / 3.0;
            let v = if v > 0.55 { v } else { 0.0 };
            w += v;
            x += v * (c as f64 + 0.5) / n as f64;
            y += v * (r as f64 + 0.5) / n as f64;
        }
    }
    if w == 0.0 {
        [1.0, 0.5, 0.5]
    } else {
        [1.0, x / w, y / w]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn loss_decomposes_in_lambda(
        scores in prop::collection::vec(-5.0f64..5.0, 4),
        points in prop::collection::vec(0.01f64..0.99, 2),
        z in prop::collection::vec(0.0f64..1.0, 2),
        y in 0usize..4,
        lambda in 0.0f64..100.0,
        beta in 0.01f64..2.0,
        present in any::<bool>(),
    ) {
        let reg = RegressionLoss::SmoothL1 { beta };
        let t = [present.then_some([z[0], z[1]])];
        let full = luab_loss(&scores, &points, &Label::Single(y), &t, lambda, reg).unwrap();
        let base = luab_loss(&scores, &points, &Label::Single(y), &t, 0.0, reg).unwrap();
        prop_assert_eq!(full.total, base.total + lambda * full.regression);
        prop_assert_eq!(base.total, base.classification);
        if !present {
            prop_assert_eq!(full.regression, 0.0);
        }
    }

    #[test]
    fn attentive_weights_form_a_distribution(
        h in 1usize..12,
        w in 1usize..12,
        x in 0.0f64..=1.0,
        y in 0.0f64..=1.0,
        bw in 0.01f64..10.0,
    ) {
        let ws = attentive_weights(h, w, ProxyPoint { x, y }, bw).unwrap();
        prop_assert_eq!(ws.len(), h * w);
        prop_assert!(ws.iter().all(|&v| v >= 0.0));
        prop_assert!((ws.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn huge_bandwidth_is_global_average(
        seed in any::<u64>(),
        x in 0.0f64..=1.0,
        y in 0.0f64..=1.0,
    ) {
        let mut rng = stream_rng(seed, 0);
        let (c, h, w) = (3, 6, 5);
        let feats: Vec<f64> = (0..c * h * w).map(|_| rng.random_range(-2.0..2.0)).collect();
        let att = attentive_pool_forward(&feats, c, h, w, Some(ProxyPoint { x, y }), 1e6).unwrap();
        let gap = attentive_pool_forward(&feats, c, h, w, None, 1.0).unwrap();
        for ch in 0..c {
            let mean = feats[ch * h * w..(ch + 1) * h * w].iter().sum::<f64>() / (h * w) as f64;
            prop_assert!((gap[ch] - mean).abs() <= 1e-12);
            prop_assert!((att[ch] - mean).abs() <= 1e-6);
        }
    }

    #[test]
    fn true_points_are_easier_to_fit_than_random_ones(seed in 0u64..1_000) {
        let data = generate_dataset(&SceneConfig::default(), 120, seed, Exec::Sequential).unwrap();
        let feats: Vec<[f64; 3]> = data.iter().map(bright_centroid).collect();
        let truth: Vec<[f64; 2]> = data.iter().map(|s| s.byproduct[0].unwrap_or([0.5, 0.5])).collect();
        let random: Vec<[f64; 2]> = data.iter().map(|s| s.random_point[0].unwrap_or([0.5, 0.5])).collect();
        let fit_truth = linear_fit_residual(&feats, &truth);
        let fit_random = linear_fit_residual(&feats, &random);
        prop_assert!(fit_truth <= fit_random, "true {} random {}", fit_truth, fit_random);
    }
}

#[test]
fn multi_label_accuracy_counts_per_class_decisions() {
    let l = Label::Multi(vec![true, false, true, false]);
    assert_eq!(sample_accuracy(&l, &[1.0, -1.0, 1.0, -1.0]), 1.0);
    assert_eq!(sample_accuracy(&l, &[-1.0, -1.0, 1.0, 1.0]), 0.5);
}
