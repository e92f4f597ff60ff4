use dignn::graphdata::gather_batch;
use dignn::model::{
    attention_fuse, classify, exc_loss, forward, load_model, model_from_bytes, model_to_bytes, objective, predict,
    rec_loss, save_model, DignnConfig, DignnParams, NoiseDraw,
};
use dignn::ndcore::rng::{stream_rng, Stream};
use dignn::ndcore::{Mat, Tape};
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

mod common;

fn toy_cfg() -> DignnConfig {
    DignnConfig {
        d: 3,
        d_hidden: 5,
        ..Default::default()
    }
}

fn random_mat(r: usize, c: usize, seed: u64) -> Mat {
    let mut rng = stream_rng(seed, Stream::Init, 50);
    Mat::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

fn seeded(cfg: &DignnConfig, n: usize, d: usize, seed: u64) -> DignnParams {
    let mut p = DignnParams::init(cfg, n, d, &mut stream_rng(seed, Stream::Init, 0));
    // non-zero biases
    let mut rng = stream_rng(seed, Stream::Init, 1);
    for t in p.tensors_mut() {
        if t.rows() == 1 {
            for x in t.data_mut() {
                *x = rng.random_range(-0.3..0.3);
            }
        }
    }
    p
}

#[test]
fn deterministic_forward_matches_oracle() {
    let (g, _) = common::small_graph(60, 1);
    let cfg = toy_cfg();
    let p = seeded(&cfg, g.num_nodes(), g.feature_dim(), 9);
    let ids: Vec<usize> = g.labeled_ids().into_iter().take(12).collect();
    let b = gather_batch(&g, &ids).unwrap();
    let got = forward(&p, &b.features, &b.topo_rows, None).unwrap();
    let want = common::forward(&p, &b.features, &b.topo_rows);
    assert!(common::max_abs_diff(&want.z_a, &got.z_a) < 1e-12);
    assert!(common::max_abs_diff(&want.z_x, &got.z_x) < 1e-12);
    assert!(common::max_abs_diff(&want.z, &got.z) < 1e-12);
    assert!(common::max_abs_diff(&want.logits, &got.logits) < 1e-12);
    for i in 0..ids.len() {
        assert!((want.alpha_a[i] - got.alpha_a.get(i, 0)).abs() < 1e-12);
        assert!((want.alpha_x[i] - got.alpha_x.get(i, 0)).abs() < 1e-12);
    }
}

#[test]
fn classify_matches_matmul_plus_bias() {
    let p = seeded(&toy_cfg(), 4, 2, 3);
    let z = random_mat(5, 3, 1);
    let got = classify(&p, &z).unwrap();
    let want = common::add_bias(
        &common::matmul(&common::rows(&z), &common::rows(&p.classifier.w)),
        &p.classifier.b,
    );
    assert!(common::max_abs_diff(&want, &got) < 1e-14);
}

#[test]
fn predict_scores_match_oracle_on_three_nodes() {
    let (g, _) = common::small_graph(60, 2);
    let p = seeded(&toy_cfg(), g.num_nodes(), g.feature_dim(), 5);
    let ids = [3, 17, 42];
    let (x, topo) = dignn::graphdata::gather_inputs(&g, &ids).unwrap();
    let pred = predict(&p, &x, &topo).unwrap();
    let o = common::forward(&p, &x, &topo);
    for (i, l) in o.logits.iter().enumerate() {
        let score = l[1].exp() / (l[0].exp() + l[1].exp());
        assert!((pred.scores[i] - score).abs() < 1e-12);
        assert_eq!(pred.classes[i], usize::from(l[1] > l[0]));
    }
}

#[test]
fn rec_loss_matches_two_mse_oracle() {
    let (g, _) = common::small_graph(60, 3);
    let p = seeded(&toy_cfg(), g.num_nodes(), g.feature_dim(), 6);
    let ids: Vec<usize> = g.labeled_ids().into_iter().take(7).collect();
    let b = gather_batch(&g, &ids).unwrap();
    let (za, zx) = (random_mat(7, 3, 2), random_mat(7, 3, 3));
    let got = rec_loss(&p, &b, &za, &zx).unwrap();
    let want = common::mse(&common::mlp(&p.dec_a, &common::rows(&za)), &common::dense(&b.topo_rows))
        + common::mse(&common::mlp(&p.dec_x, &common::rows(&zx)), &common::rows(&b.features));
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn rec_loss_trivial_zero_cases() {
    let cfg = toy_cfg();
    let mut p = seeded(&cfg, 4, 2, 1);
    for t in p.dec_a.layers.iter_mut().chain(p.dec_x.layers.iter_mut()) {
        t.w = Mat::zeros(t.w.rows(), t.w.cols());
        t.b = Mat::zeros(1, t.b.cols());
    }
    let g = dignn::graphdata::FraudGraph::new(Mat::zeros(4, 2), vec![0, 1, 0, 1], vec![]).unwrap();
    let b = gather_batch(&g, &[0, 1, 2, 3]).unwrap();
    let z = random_mat(4, 3, 1);
    assert_eq!(rec_loss(&p, &b, &z, &z).unwrap(), 0.0);
}

#[test]
fn objective_ce_matches_oracle_and_no_mi_drops_terms() {
    let (g, _) = common::small_graph(60, 4);
    let cfg = toy_cfg();
    let p = seeded(&cfg, g.num_nodes(), g.feature_dim(), 8);
    let ids: Vec<usize> = g.labeled_ids().into_iter().take(10).collect();
    let b = gather_batch(&g, &ids).unwrap();
    let zero = [NoiseDraw::zeros(10, 3)];
    let o = common::forward(&p, &b.features, &b.topo_rows);
    let ce = common::cross_entropy(&o.logits, &b.labels);
    let full = objective(&cfg, &p, &b, &zero, true).unwrap();
    let ce_only = objective(&cfg, &p, &b, &zero, false).unwrap();
    assert!((full.losses.ce - ce).abs() < 1e-12);
    assert_eq!(ce_only.losses.ce, full.losses.ce);
    assert_eq!((ce_only.losses.rec, ce_only.losses.exc), (0.0, 0.0));
    assert_eq!(ce_only.losses.total, ce_only.losses.ce);
    let expect = full.losses.ce + cfg.alpha * full.losses.rec + cfg.beta * full.losses.exc;
    assert!((full.losses.total - expect).abs() < 1e-12);
}

#[test]
fn ce_only_gradients_equal_zero_weighted_full_objective() {
    let (g, _) = common::small_graph(60, 5);
    let cfg = DignnConfig {
        alpha: 0.0,
        beta: 0.0,
        ..toy_cfg()
    };
    let p = seeded(&cfg, g.num_nodes(), g.feature_dim(), 2);
    let ids: Vec<usize> = g.labeled_ids().into_iter().take(10).collect();
    let b = gather_batch(&g, &ids).unwrap();
    let noise = [NoiseDraw::sample(10, 3, &mut stream_rng(1, Stream::Noise, 0))];
    let a = objective(&cfg, &p, &b, &noise, true).unwrap();
    let c = objective(&cfg, &p, &b, &noise, false).unwrap();
    assert_eq!(a.losses.total.to_bits(), c.losses.total.to_bits());
    for ((name, _, x), (_, _, y)) in a.grads.entries().into_iter().zip(c.grads.entries()) {
        if name.starts_with("dec") {
            assert!(x.data().iter().all(|&v| v == 0.0), "{name}");
        } else {
            assert_eq!(x, y, "{name}");
        }
    }
}

/// Closed form of the exclusion loss at zero noise.
fn exc_oracle(mu_a: &Mat, mu_x: &Mat, cfg: &DignnConfig) -> f64 {
    let d = cfg.d as f64;
    let prior = cfg.prior_mean_vec();
    let (s2, p2) = (cfg.sigma_enc.powi(2), cfg.prior_std.powi(2));
    let mut total = 0.0;
    for r in 0..mu_a.rows() {
        let dist = |row: &[f64]| row.iter().zip(&prior).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let per =
            -d * (2.0 * PI * s2).ln() + d * (2.0 * PI * p2).ln() + (dist(mu_a.row(r)) + dist(mu_x.row(r))) / (2.0 * p2);
        total += 0.5 * per;
    }
    total / mu_a.rows() as f64
}

#[test]
fn model_file_round_trip() {
    let p = seeded(&toy_cfg(), 9, 4, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    save_model(&p, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), p);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], b"DIGNNMDL");
    assert_eq!(bytes, model_to_bytes(&p));
    assert!(model_from_bytes(&bytes[..bytes.len() - 8]).is_err());
    assert!(load_model(&dir.path().join("missing.bin")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn attention_is_a_convex_combination(seed in any::<u64>(), n in 1usize..8) {
        let cfg = toy_cfg();
        let p = seeded(&cfg, 4, 2, seed);
        let za = random_mat(n, 3, seed ^ 1);
        let zx = random_mat(n, 3, seed ^ 2);
        let (a, x, z) = attention_fuse(&p, &za, &zx).unwrap();
        for i in 0..n {
            prop_assert!((a.get(i, 0) + x.get(i, 0) - 1.0).abs() <= 1e-10);
            for j in 0..3 {
                let (lo, hi) = (za.get(i, j).min(zx.get(i, j)), za.get(i, j).max(zx.get(i, j)));
                prop_assert!(z.get(i, j) >= lo - 1e-12 && z.get(i, j) <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn softmax_weights_ignore_a_common_score_shift(a in -30f64..30.0, b in -30f64..30.0, c in -100f64..100.0) {
        let mut t = Tape::new();
        let s = t.leaf(Mat::from_rows(&[&[a, b], &[a + c, b + c]]));
        let w = t.row_softmax(s);
        let v = t.value(w);
        prop_assert!((v.get(0, 0) - v.get(1, 0)).abs() <= 1e-10);
        prop_assert!((v.get(0, 1) - v.get(1, 1)).abs() <= 1e-10);
    }

    #[test]
    fn exclusion_at_zero_noise_is_the_closed_form(
        seed in any::<u64>(),
        n in 1usize..6,
        sigma in 0.3f64..2.0,
        prior_std in 0.3f64..2.0,
        shifted_prior in any::<bool>(),
    ) {
        let cfg = DignnConfig {
            sigma_enc: sigma,
            prior_std,
            prior_mean: if shifted_prior { vec![0.5, -1.0, 0.25] } else { vec![] },
            ..toy_cfg()
        };
        let (mu_a, mu_x) = (random_mat(n, 3, seed), random_mat(n, 3, seed.wrapping_add(1)));
        let got = exc_loss(&mu_a, &mu_x, &mu_a, &mu_x, &cfg).unwrap();
        let want = exc_oracle(&mu_a, &mu_x, &cfg);
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn losses_are_non_negative(seed in any::<u64>()) {
        let (g, _) = common::small_graph(40, seed % 7);
        let cfg = toy_cfg();
        let p = seeded(&cfg, g.num_nodes(), g.feature_dim(), seed);
        let ids: Vec<usize> = g.labeled_ids().into_iter().take(6).collect();
        let b = gather_batch(&g, &ids).unwrap();
        let noise = [NoiseDraw::sample(6, 3, &mut stream_rng(seed, Stream::Noise, 0))];
        let out = objective(&cfg, &p, &b, &noise, true).unwrap();
        prop_assert!(out.losses.ce >= 0.0 && out.losses.rec >= 0.0);
        let alpha_sum = out.forward.alpha_a.data().iter().zip(out.forward.alpha_x.data()).map(|(a, x)| a + x);
        for s in alpha_sum {
            prop_assert!((s - 1.0).abs() <= 1e-10);
        }
    }
}
