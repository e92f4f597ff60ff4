use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use dignn::graphdata::io::graph_files;
use dignn::graphdata::{
    gather_inputs, load_graph, neighbor_label_distribution, normalize_features, save_graph, stratified_split,
    synth_generate, FraudGraph, SplitIndex, SynthConfig,
};
use dignn::metrics::MetricsReport;
use dignn::model::{check_model_matches, deterministic, load_model, save_model, DignnConfig, DignnParams};
use dignn::trainer::{
    evaluate, gradcheck, train_with_observer, Ablation, EpochRecord, GradcheckOptions, TrainMode, TrainObserver,
};
use dignn::{Error, Result};

use crate::config::RunConfig;
use crate::manifest::{hash_file, RunManifest, HISTORY_FILE, METRICS_FILE, MODEL_FILE};
use crate::{AblationArg, ConfigArgs, EvalArgs, ExportArgs, GradcheckArgs, ModeArg, SplitArg, SynthArgs, TrainArgs};

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

pub fn resolve_config(a: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&a.config)?;
    let t = &mut cfg.train;
    if let Some(s) = a.seed {
        t.seed = s;
    }
    if let Some(e) = a.epochs {
        t.epochs = e;
    }
    if let Some(b) = a.batch_size {
        t.batch_size = b;
    }
    if let Some(x) = a.alpha {
        t.model.alpha = x;
    }
    if let Some(x) = a.beta {
        t.model.beta = x;
    }
    if let Some(x) = a.ablation {
        t.ablation = match x {
            AblationArg::Full => Ablation::Full,
            AblationArg::NoMi => Ablation::NoMi,
        };
    }
    if let Some(x) = a.mode {
        t.mode = match x {
            ModeArg::Minibatch => TrainMode::Minibatch,
            ModeArg::Fullbatch => TrainMode::Fullbatch,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads a graph, splits it with the run seed and standardizes features with
/// training-split statistics.
pub fn prepare(data: &Path, cfg: &RunConfig) -> Result<(FraudGraph, SplitIndex)> {
    let g = load_graph(data)?;
    let split = stratified_split(&g, cfg.split, cfg.train.seed)?;
    let g = normalize_features(&g, &split)?;
    Ok((g, split))
}

fn split_ids(g: &FraudGraph, split: &SplitIndex, which: SplitArg) -> Vec<usize> {
    match which {
        SplitArg::Train => split.train.clone(),
        SplitArg::Val => split.val.clone(),
        SplitArg::Test => split.test.clone(),
        SplitArg::Labeled => g.labeled_ids(),
    }
}

fn pretty_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

struct EpochPrinter<'a> {
    out: &'a mut dyn Write,
}

impl TrainObserver for EpochPrinter<'_> {
    fn on_epoch(&mut self, r: &EpochRecord, _params: &DignnParams) {
        let _ = writeln!(
            self.out,
            "epoch {:>3}  loss {:.4}  ce {:.4}  rec {:.4}  exc {:.4}  alpha_a {:.3}  val_auc {:.4}",
            r.epoch, r.total, r.ce, r.rec, r.exc, r.alpha_a, r.val.auc
        );
    }
}

#[derive(serde::Serialize)]
struct TrainMetrics<'a> {
    variant: &'a str,
    best_epoch: usize,
    val: &'a MetricsReport,
    test: &'a MetricsReport,
}

/// Trains and writes `manifest.json`, `model.bin`, `history.csv` and
/// `metrics.json` into the output directory. Returns the final manifest.
pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<RunManifest> {
    let (cfg, data, out_dir, expected_inputs) = match &a.manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            let cfg = RunConfig::from_pairs(&m.config)?;
            cfg.validate()?;
            let dir = a.out.clone().unwrap_or_else(|| m.out_dir.clone().into());
            (
                cfg,
                a.data.clone().unwrap_or_else(|| m.data_dir.clone().into()),
                dir,
                Some(m.input_hashes),
            )
        }
        None => {
            let cfg = resolve_config(&a.cfg)?;
            let data = a
                .data
                .clone()
                .ok_or_else(|| Error::Config("--data is required without --manifest".into()))?;
            let dir = a
                .out
                .clone()
                .ok_or_else(|| Error::Config("--out is required without --manifest".into()))?;
            (cfg, data, dir, None)
        }
    };

    let (g, split) = prepare(&data, &cfg)?;
    let mut input_hashes = BTreeMap::new();
    for f in graph_files(&data)? {
        let name = f.file_name().expect("file path").to_string_lossy().into_owned();
        input_hashes.insert(name, hash_file(&f)?);
    }
    if let Some(expected) = expected_inputs {
        if expected != input_hashes {
            return Err(Error::Config(format!(
                "contents of {} differ from the manifest's input hashes",
                data.display()
            )));
        }
    }

    fs::create_dir_all(&out_dir).map_err(io_err)?;
    let t = &cfg.train;
    let mut manifest = RunManifest {
        command: "train".into(),
        variant: t.variant().into(),
        seed: t.seed,
        config: cfg.to_map(),
        data_dir: data.display().to_string(),
        input_hashes,
        out_dir: out_dir.display().to_string(),
        outputs: [MODEL_FILE, HISTORY_FILE, METRICS_FILE]
            .iter()
            .map(|f| (f.to_string(), out_dir.join(f).display().to_string()))
            .collect(),
        artifact_hashes: Default::default(),
    };
    manifest.write(&out_dir)?;

    writeln!(
        out,
        "training {} on {} nodes ({} train / {} val / {} test), seed {}",
        t.variant(),
        g.num_nodes(),
        split.train.len(),
        split.val.len(),
        split.test.len(),
        t.seed
    )
    .map_err(io_err)?;
    let result = train_with_observer(&g, &split, t, &mut EpochPrinter { out: &mut *out })?;
    let test = evaluate(&result.params, &g, &split.test)?;

    save_model(&result.params, &out_dir.join(MODEL_FILE))?;
    fs::write(out_dir.join(HISTORY_FILE), result.history.to_csv()).map_err(io_err)?;
    let metrics = TrainMetrics {
        variant: t.variant(),
        best_epoch: result.best_epoch,
        val: &result.best_val,
        test: &test,
    };
    fs::write(out_dir.join(METRICS_FILE), pretty_json(&metrics)).map_err(io_err)?;

    for f in [MODEL_FILE, HISTORY_FILE, METRICS_FILE] {
        manifest.artifact_hashes.insert(f.into(), hash_file(&out_dir.join(f))?);
    }
    manifest.write(&out_dir)?;
    writeln!(
        out,
        "best epoch {}  test f1_macro {:.4}  auc {:.4}  gmean {:.4}",
        result.best_epoch, test.f1_macro, test.auc, test.gmean
    )
    .map_err(io_err)?;
    Ok(manifest)
}

fn load_checked(data: &Path, model: &Path, cfg: &RunConfig) -> Result<(FraudGraph, SplitIndex, DignnParams)> {
    let (g, split) = prepare(data, cfg)?;
    let params = load_model(model)?;
    check_model_matches(&params, g.num_nodes(), g.feature_dim())?;
    Ok((g, split, params))
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<MetricsReport> {
    let cfg = resolve_config(&a.cfg)?;
    let (g, split, params) = load_checked(&a.data, &a.model, &cfg)?;
    let report = evaluate(&params, &g, &split_ids(&g, &split, a.split))?;
    let text = pretty_json(&report);
    out.write_all(text.as_bytes()).map_err(io_err)?;
    if let Some(path) = &a.out {
        fs::write(path, &text).map_err(io_err)?;
    }
    Ok(report)
}

/// One CSV row per requested node: id, label, then the fused embedding from a
/// noise-free forward pass.
pub fn cmd_export_embeddings(a: &ExportArgs, out: &mut dyn Write) -> Result<usize> {
    let cfg = resolve_config(&a.cfg)?;
    let (g, split, params) = load_checked(&a.data, &a.model, &cfg)?;
    let ids = split_ids(&g, &split, a.split);
    let (features, topo) = gather_inputs(&g, &ids)?;
    let (_, _, z) = deterministic(&params, &features, &topo)?;

    let mut csv = String::from("node_id,label");
    for j in 0..z.cols() {
        csv.push_str(&format!(",z{j}"));
    }
    csv.push('\n');
    for (r, &id) in ids.iter().enumerate() {
        csv.push_str(&format!("{id},{}", g.labels()[id]));
        for v in z.row(r) {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    fs::write(&a.out, csv).map_err(io_err)?;
    writeln!(
        out,
        "wrote {} embeddings of width {} to {}",
        ids.len(),
        z.cols(),
        a.out.display()
    )
    .map_err(io_err)?;
    Ok(ids.len())
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<FraudGraph> {
    let cfg = SynthConfig {
        num_nodes: a.nodes,
        feature_dim: a.dim,
        fraud_rate: a.fraud_rate,
        mean_separation: a.separation,
        homophily: a.h,
        avg_degree: a.avg_degree,
        seed: a.seed,
    };
    cfg.validate()?;
    let g = synth_generate(&cfg)?;
    save_graph(&g, &a.out)?;
    let dist = neighbor_label_distribution(&g);
    writeln!(
        out,
        "wrote {} nodes ({} fraud), {} undirected edges to {}",
        g.num_nodes(),
        g.count_label(dignn::graphdata::FRAUD),
        g.num_union_edges(),
        a.out.display()
    )
    .map_err(io_err)?;
    writeln!(
        out,
        "neighbor label distribution (fraction of neighbors that are benign / fraud):"
    )
    .map_err(io_err)?;
    for (name, row) in [("benign", dist.benign_row()), ("fraud", dist.fraud_row())] {
        match row {
            Some([b, f]) => writeln!(out, "  {name:<6} nodes: benign {b:.4}  fraud {f:.4}"),
            None => writeln!(out, "  {name:<6} nodes: no labeled neighbors"),
        }
        .map_err(io_err)?;
    }
    Ok(g)
}

/// Returns whether every variant passed.
pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<bool> {
    if !(a.tolerance > 0.0) {
        return Err(Error::Config(format!("tolerance must be > 0, got {}", a.tolerance)));
    }
    let opts = GradcheckOptions {
        tolerance: a.tolerance,
        seed: a.seed,
        flip_sign: a.flip_sign.clone(),
        ..Default::default()
    };
    let mut all = true;
    for (alpha, beta) in [(a.alpha, a.beta), (0.0, 0.0), (1.0, 1.0)] {
        let cfg = DignnConfig {
            alpha,
            beta,
            ..Default::default()
        };
        let r = gradcheck(&cfg, &opts)?;
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "alpha={alpha} beta={beta}: max relative error {:.3e} (tolerance {:.0e}) {verdict}",
            r.max_rel_err, r.tolerance
        )
        .map_err(io_err)?;
        for t in &r.tensors {
            writeln!(
                out,
                "  {:<12} {:>4} entries  rel {:.3e}  abs {:.3e}",
                t.name, t.len, t.max_rel_err, t.max_abs_err
            )
            .map_err(io_err)?;
        }
        all &= r.passed();
    }
    Ok(all)
}
