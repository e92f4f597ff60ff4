//! Python bindings: synthetic data generation, training, metrics and the
//! gradient check. Build with `maturin develop` from this directory.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dignn::graphdata::{
    load_graph, neighbor_label_distribution, normalize_features, save_graph, stratified_split, synth_generate,
    SplitRatios, SynthConfig, FRAUD,
};
use dignn::metrics::{auc_rank, MetricsReport};
use dignn::model::DignnConfig;
use dignn::trainer::{evaluate, gradcheck as run_gradcheck, train as run_train, GradcheckOptions, TrainConfig};
use dignn::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Load(_) | Error::ModelFile(_) => PyIOError::new_err(e.to_string()),
        Error::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("f1_macro", r.f1_macro)?;
    d.set_item("auc", r.auc)?;
    d.set_item("gmean", r.gmean)?;
    d.set_item("tp", r.tp)?;
    d.set_item("fp", r.fp)?;
    d.set_item("tn", r.tn)?;
    d.set_item("fn", r.fn_)?;
    Ok(d)
}

/// Rank-statistic ROC AUC of fraud scores against 0/1 labels.
#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<usize>) -> PyResult<f64> {
    auc_rank(&scores, &labels).map_err(to_py)
}

/// Writes a synthetic graph directory and returns its neighbor label
/// distribution.
#[pyfunction]
#[pyo3(signature = (out, nodes=4000, dim=16, fraud_rate=0.15, separation=2.33, h=0.19, avg_degree=20.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn synth<'py>(
    py: Python<'py>,
    out: PathBuf,
    nodes: usize,
    dim: usize,
    fraud_rate: f64,
    separation: f64,
    h: f64,
    avg_degree: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = SynthConfig {
        num_nodes: nodes,
        feature_dim: dim,
        fraud_rate,
        mean_separation: separation,
        homophily: h,
        avg_degree,
        seed,
    };
    let g = synth_generate(&cfg).map_err(to_py)?;
    save_graph(&g, &out).map_err(to_py)?;
    let dist = neighbor_label_distribution(&g);
    let d = PyDict::new(py);
    d.set_item("num_nodes", g.num_nodes())?;
    d.set_item("num_fraud", g.count_label(FRAUD))?;
    d.set_item("benign_row", dist.benign_row().map(|r| r.to_vec()))?;
    d.set_item("fraud_row", dist.fraud_row().map(|r| r.to_vec()))?;
    Ok(d)
}

/// Trains on a graph directory and returns validation/test metrics of the
/// selected epoch.
#[pyfunction]
#[pyo3(signature = (data, epochs=50, batch_size=1024, seed=0, alpha=0.05, beta=0.8, ablation="full", mode="minibatch"))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    data: PathBuf,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    alpha: f64,
    beta: f64,
    ablation: &str,
    mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = TrainConfig {
        epochs,
        batch_size,
        seed,
        ablation: ablation.parse().map_err(to_py)?,
        mode: mode.parse().map_err(to_py)?,
        model: DignnConfig {
            alpha,
            beta,
            ..Default::default()
        },
        ..Default::default()
    };
    let run = || -> dignn::Result<_> {
        let g = load_graph(&data)?;
        let split = stratified_split(&g, SplitRatios::default(), seed)?;
        let g = normalize_features(&g, &split)?;
        let out = run_train(&g, &split, &cfg)?;
        let test = evaluate(&out.params, &g, &split.test)?;
        let curve: Vec<f64> = out.history.epochs.iter().map(|r| r.val.auc).collect();
        Ok((out.best_epoch, out.best_val, test, curve))
    };
    let (best_epoch, val, test, curve) = py.detach(run).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("variant", cfg.variant())?;
    d.set_item("best_epoch", best_epoch)?;
    d.set_item("val", report_dict(py, &val)?)?;
    d.set_item("test", report_dict(py, &test)?)?;
    d.set_item("val_auc_history", curve)?;
    Ok(d)
}

/// Largest relative error between analytic and finite-difference gradients
/// on the toy graph.
#[pyfunction]
#[pyo3(signature = (alpha=0.05, beta=0.8, seed=0))]
fn gradcheck(alpha: f64, beta: f64, seed: u64) -> PyResult<f64> {
    let cfg = DignnConfig {
        alpha,
        beta,
        ..Default::default()
    };
    let opts = GradcheckOptions {
        seed,
        ..Default::default()
    };
    Ok(run_gradcheck(&cfg, &opts).map_err(to_py)?.max_rel_err)
}

#[pymodule]
fn dignn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}
