use std::fs;

use dignn::graphdata::io::{edges_file, FEATURES_FILE, LABELS_FILE, META_FILE};
use dignn::graphdata::{
    downsample_epoch, gather_batch, load_graph, make_batches, neighbor_label_distribution, normalize_features,
    save_graph, stratified_split, synth_generate, FraudGraph, Relation, SplitIndex, SplitRatios, SynthConfig, BENIGN,
    FRAUD,
};
use dignn::metrics::auc_rank;
use dignn::ndcore::rng::{stream_rng, Stream};
use dignn::ndcore::Mat;
use dignn::{Error, LoadError};
use proptest::prelude::*;

mod common;

fn toy() -> FraudGraph {
    FraudGraph::new(
        Mat::from_rows(&[&[0.0, 1.0], &[2.0, 3.0], &[4.0, 5.0]]),
        vec![0, 1, -1],
        vec![Relation {
            name: "r".into(),
            edges: vec![(0, 1), (1, 0), (0, 1)],
        }],
    )
    .unwrap()
}

#[test]
fn directory_round_trip_and_toy_adjacency() {
    let dir = tempfile::tempdir().unwrap();
    let g = toy();
    save_graph(&g, dir.path()).unwrap();
    let back = load_graph(dir.path()).unwrap();
    assert_eq!(back, g);
    let adj = back.union_adj();
    assert_eq!(adj.row_cols(0), &[1]);
    assert_eq!(adj.row_cols(1), &[0]);
    assert!(adj.row_cols(2).is_empty());
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join(META_FILE)).unwrap()).unwrap();
    for k in ["num_nodes", "feature_dim", "relations", "label_values"] {
        assert!(meta.get(k).is_some(), "{k}");
    }
    assert_eq!(fs::read(dir.path().join(LABELS_FILE)).unwrap(), vec![0u8, 1, 0xff]);
}

#[test]
fn load_errors_are_distinct() {
    let g = toy();

    let dir = tempfile::tempdir().unwrap();
    save_graph(&g, dir.path()).unwrap();
    fs::remove_file(dir.path().join(LABELS_FILE)).unwrap();
    assert!(matches!(
        load_graph(dir.path()),
        Err(Error::Load(LoadError::MissingFile(_)))
    ));

    let dir = tempfile::tempdir().unwrap();
    save_graph(&g, dir.path()).unwrap();
    let f = dir.path().join(FEATURES_FILE);
    let mut bytes = fs::read(&f).unwrap();
    bytes.truncate(bytes.len() - 4);
    fs::write(&f, bytes).unwrap();
    assert!(matches!(
        load_graph(dir.path()),
        Err(Error::Load(LoadError::LengthMismatch { .. }))
    ));

    let dir = tempfile::tempdir().unwrap();
    save_graph(&g, dir.path()).unwrap();
    let e = dir.path().join(edges_file("r"));
    let mut bytes = fs::read(&e).unwrap();
    bytes.extend_from_slice(&0u32.to_le_bytes());
    bytes.extend_from_slice(&7u32.to_le_bytes());
    fs::write(&e, bytes).unwrap();
    assert!(matches!(
        load_graph(dir.path()),
        Err(Error::Load(LoadError::NodeOutOfRange { .. }))
    ));

    let dir = tempfile::tempdir().unwrap();
    save_graph(&g, dir.path()).unwrap();
    fs::write(dir.path().join(LABELS_FILE), [0u8, 3, 0]).unwrap();
    assert!(matches!(
        load_graph(dir.path()),
        Err(Error::Load(LoadError::BadLabel { .. }))
    ));
}

#[test]
fn synth_directories_are_byte_identical_per_seed() {
    let cfg = SynthConfig {
        num_nodes: 300,
        ..Default::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_graph(&synth_generate(&cfg).unwrap(), a.path()).unwrap();
    save_graph(&synth_generate(&cfg).unwrap(), b.path()).unwrap();
    for name in [META_FILE, FEATURES_FILE, LABELS_FILE, &edges_file("synth")] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(load_graph(a.path()).unwrap(), synth_generate(&cfg).unwrap());
}

#[test]
fn split_of_100_with_10_fraud() {
    let labels: Vec<i8> = (0..100).map(|i| if i < 10 { FRAUD } else { BENIGN }).collect();
    let g = FraudGraph::new(Mat::zeros(100, 1), labels, vec![]).unwrap();
    let s = stratified_split(&g, SplitRatios::default(), 3).unwrap();
    let fraud = s.train.iter().filter(|&&i| i < 10).count();
    assert_eq!((fraud, s.train.len() - fraud), (4, 36));
    assert_eq!(s, stratified_split(&g, SplitRatios::default(), 3).unwrap());
}

#[test]
fn normalization_examples() {
    let g = FraudGraph::new(
        Mat::from_rows(&[
            &[0.0, 5.0],
            &[2.0, 5.0],
            &[9.0, 5.0],
            &[4.0, 5.0],
            &[1.0, 5.0],
            &[7.0, 5.0],
        ]),
        vec![0, 0, 1, 1, 0, 1],
        vec![],
    )
    .unwrap();
    let split = SplitIndex {
        train: vec![0, 1],
        val: vec![2, 3],
        test: vec![4, 5],
    };
    let n = normalize_features(&g, &split).unwrap();
    assert_eq!((n.features().get(0, 0), n.features().get(1, 0)), (-1.0, 1.0));
    assert!((0..6).all(|r| n.features().get(r, 1) == 0.0));
    let twice = normalize_features(&n, &split).unwrap();
    let mean: f64 = split.train.iter().map(|&i| twice.features().get(i, 0)).sum::<f64>() / 2.0;
    assert!(mean.abs() < 1e-10);
}

fn bayes_auc(g: &FraudGraph) -> f64 {
    // For isotropic Gaussians with a shift along the all-ones direction the
    // likelihood ratio is monotone in the coordinate sum.
    let ids = g.labeled_ids();
    let scores: Vec<f64> = ids.iter().map(|&i| g.features().row(i).iter().sum()).collect();
    let labels: Vec<usize> = ids.iter().map(|&i| g.labels()[i] as usize).collect();
    auc_rank(&scores, &labels).unwrap()
}

#[test]
fn attribute_separation_sets_bayes_auc() {
    let delta = common::separation_for_auc(0.95);
    assert!((delta - 2.33).abs() < 0.01);
    let base = SynthConfig {
        num_nodes: 20_000,
        feature_dim: 1,
        fraud_rate: 0.3,
        avg_degree: 2.0,
        ..Default::default()
    };
    let sep = synth_generate(&SynthConfig {
        mean_separation: delta,
        ..base
    })
    .unwrap();
    assert!((bayes_auc(&sep) - 0.95).abs() <= 0.01, "{}", bayes_auc(&sep));
    let none = synth_generate(&SynthConfig {
        mean_separation: 0.0,
        ..base
    })
    .unwrap();
    assert!((bayes_auc(&none) - 0.5).abs() <= 0.02, "{}", bayes_auc(&none));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synth_graph_invariants(seed in any::<u64>(), h in 0.0f64..=1.0, rate in 0.1f64..0.5) {
        let g = synth_generate(&SynthConfig {
            num_nodes: 600,
            homophily: h,
            fraud_rate: rate,
            avg_degree: 8.0,
            seed,
            ..Default::default()
        }).unwrap();
        let adj = g.union_adj();
        prop_assert!(adj.is_symmetric());
        for r in 0..g.num_nodes() {
            let cols = adj.row_cols(r);
            prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(!cols.contains(&r));
        }
        let dist = neighbor_label_distribution(&g);
        for row in dist.rows.iter().flatten() {
            prop_assert!((row[0] + row[1] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn split_is_a_stratified_partition(seed in any::<u64>(), rate in 0.05f64..0.5) {
        let g = synth_generate(&SynthConfig { num_nodes: 800, fraud_rate: rate, avg_degree: 2.0, seed, ..Default::default() }).unwrap();
        let s = stratified_split(&g, SplitRatios::default(), seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, g.labeled_ids());
        let overall = g.fraud_fraction();
        for part in [&s.train, &s.val, &s.test] {
            let f = part.iter().filter(|&&i| g.labels()[i] == FRAUD).count() as f64 / part.len() as f64;
            prop_assert!((f - overall).abs() <= 0.01, "{} vs {}", f, overall);
        }
    }

    #[test]
    fn downsample_then_batch_partitions_ids(pos in 1usize..60, neg in 0usize..200, bs in 1usize..50, seed in any::<u64>()) {
        let labels: Vec<i8> = (0..pos + neg).map(|i| if i < pos { FRAUD } else { BENIGN }).collect();
        let ids: Vec<usize> = (0..pos + neg).collect();
        let out = downsample_epoch(&ids, &labels, &mut stream_rng(seed, Stream::Downsample, 0)).unwrap();
        let p = out.iter().filter(|&&i| labels[i] == FRAUD).count();
        prop_assert_eq!(p, pos);
        prop_assert_eq!(out.len() - p, pos.min(neg));
        let mut sorted = out.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), out.len());

        let batches = make_batches(&out, bs).unwrap();
        prop_assert_eq!(batches.len(), out.len().div_ceil(bs));
        prop_assert!(batches[..batches.len() - 1].iter().all(|b| b.len() == bs));
        let flat: Vec<usize> = batches.concat();
        prop_assert_eq!(flat, out);
    }

    #[test]
    fn gathered_rows_match_direct_lookup(seed in any::<u64>()) {
        let g = synth_generate(&SynthConfig { num_nodes: 120, avg_degree: 5.0, seed, ..Default::default() }).unwrap();
        let mut rng = stream_rng(seed, Stream::Shuffle, 0);
        let ids: Vec<usize> = rand::seq::index::sample(&mut rng, 120, 5).into_vec();
        let b = gather_batch(&g, &ids).unwrap();
        for (k, &i) in ids.iter().enumerate() {
            prop_assert_eq!(b.topo_rows.row_cols(k), g.union_adj().row_cols(i));
            prop_assert_eq!(b.features.row(k), g.features().row(i));
            prop_assert_eq!(b.labels[k] as i8, g.labels()[i]);
        }
    }
}
