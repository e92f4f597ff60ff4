//! Training objective: cross-entropy on the fused embedding, a decoder
//! reconstruction term per view, and a cross-view exclusion term built from
//! Gaussian encoder posteriors and a Gaussian prior.

use std::f64::consts::PI;

use crate::error::Result;
use crate::graphdata::BatchSubgraph;
use crate::model::forward::{check_inputs, decode, forward_on_tape, ForwardOut, NoiseDraw};
use crate::model::{DignnConfig, DignnParams};
use crate::ndcore::{Mat, Tape, Var};

/// `sum_i log N(z_i; mu_i, s^2 I)` over the rows of an `n x d` sample,
/// where `centered = z - mu` is already on the tape.
fn gaussian_log_density(tape: &mut Tape, centered: Var, s: f64) -> Var {
    let (n, d) = tape.value(centered).shape();
    let ss = tape.sum_squares(centered);
    let quad = tape.scale(ss, -1.0 / (2.0 * s * s));
    tape.add_scalar(quad, -((n * d) as f64) / 2.0 * (2.0 * PI * s * s).ln())
}

/// Mean reconstruction error of both decoders.
pub fn rec_loss_on_tape(tape: &mut Tape, x_a_hat: Var, x_x_hat: Var, topo_dense: &Mat, features: &Mat) -> Result<Var> {
    let a = tape.mse(x_a_hat, topo_dense)?;
    let x = tape.mse(x_x_hat, features)?;
    tape.add(a, x)
}

/// Single-sample estimate of the exclusion bound
///
/// `1/2 * mean_i [ log p(zx|x) - log r(za) + log p(za|a) - log r(zx) ]`
///
/// with `p(z|.) = N(mu(.), sigma_enc^2 I)` and `r = N(prior_mean, prior_std^2 I)`.
pub fn exc_loss_on_tape(
    tape: &mut Tape,
    mu_a: Var,
    mu_x: Var,
    z_a_s: Var,
    z_x_s: Var,
    cfg: &DignnConfig,
) -> Result<Var> {
    let (n, d) = tape.value(z_a_s).shape();
    let prior: Vec<f64> = cfg.prior_mean_vec();
    let mut neg_prior = Mat::zeros(n, d);
    for r in 0..n {
        for (o, &p) in neg_prior.row_mut(r).iter_mut().zip(&prior) {
            *o = -p;
        }
    }

    let za_centered = tape.add_const(z_a_s, &neg_prior)?;
    let zx_centered = tape.add_const(z_x_s, &neg_prior)?;
    let prior_a = gaussian_log_density(tape, za_centered, cfg.prior_std);
    let prior_x = gaussian_log_density(tape, zx_centered, cfg.prior_std);
    let prior_sum = tape.add(prior_a, prior_x)?;
    let mut sum = tape.scale(prior_sum, -1.0);

    if !cfg.drop_conditional_terms {
        let dx = tape.sub(z_x_s, mu_x)?;
        let da = tape.sub(z_a_s, mu_a)?;
        let cond_x = gaussian_log_density(tape, dx, cfg.sigma_enc);
        let cond_a = gaussian_log_density(tape, da, cfg.sigma_enc);
        let cond = tape.add(cond_x, cond_a)?;
        sum = tape.add(sum, cond)?;
    }
    Ok(tape.scale(sum, 0.5 / n.max(1) as f64))
}

/// `ce + alpha * rec + beta * exc`.
pub fn total_loss(ce: f64, rec: f64, exc: f64, cfg: &DignnConfig) -> f64 {
    ce + cfg.alpha * rec + cfg.beta * exc
}

pub fn total_loss_on_tape(tape: &mut Tape, ce: Var, rec: Var, exc: Var, cfg: &DignnConfig) -> Result<Var> {
    let r = tape.scale(rec, cfg.alpha);
    let e = tape.scale(exc, cfg.beta);
    let t = tape.add(ce, r)?;
    tape.add(t, e)
}

/// Reconstruction loss of decoders applied to sampled embeddings.
pub fn rec_loss(params: &DignnParams, batch: &BatchSubgraph, z_a_s: &Mat, z_x_s: &Mat) -> Result<f64> {
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let (a, x) = (tape.leaf(z_a_s.clone()), tape.leaf(z_x_s.clone()));
    let x_a_hat = decode(&mut tape, &pv.dec_a, a)?;
    let x_x_hat = decode(&mut tape, &pv.dec_x, x)?;
    let l = rec_loss_on_tape(
        &mut tape,
        x_a_hat,
        x_x_hat,
        &batch.topo_rows.to_dense(),
        &batch.features,
    )?;
    Ok(tape.value(l).data()[0])
}

/// Exclusion loss for given means and samples.
pub fn exc_loss(mu_a: &Mat, mu_x: &Mat, z_a_s: &Mat, z_x_s: &Mat, cfg: &DignnConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = [mu_a, mu_x, z_a_s, z_x_s].map(|m| tape.leaf(m.clone()));
    let l = exc_loss_on_tape(&mut tape, vars[0], vars[1], vars[2], vars[3], cfg)?;
    Ok(tape.value(l).data()[0])
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub ce: f64,
    pub rec: f64,
    pub exc: f64,
    pub total: f64,
}

/// Losses, parameter gradients and the forward pass of one batch.
#[derive(Debug, Clone)]
pub struct ObjectiveOutput {
    pub losses: LossBreakdown,
    pub grads: DignnParams,
    /// Forward pass of the first Monte-Carlo sample.
    pub forward: ForwardOut,
}

/// Builds the objective for one batch and backpropagates it.
///
/// Each entry of `noise` is one Monte-Carlo sample; losses are averaged over
/// them. Without `use_mi` only the cross-entropy enters the total and the
/// reconstruction/exclusion terms are reported as zero.
pub fn objective(
    cfg: &DignnConfig,
    params: &DignnParams,
    batch: &BatchSubgraph,
    noise: &[NoiseDraw],
    use_mi: bool,
) -> Result<ObjectiveOutput> {
    check_inputs(params, &batch.features, &batch.topo_rows)?;
    if noise.is_empty() {
        return Err(crate::Error::Contract("objective needs at least one noise draw".into()));
    }
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let topo_dense = if use_mi { Some(batch.topo_rows.to_dense()) } else { None };

    let mut parts: Vec<(Var, Option<Var>, Option<Var>, Var)> = Vec::with_capacity(noise.len());
    let mut first = None;
    for draw in noise {
        let v = forward_on_tape(
            &mut tape,
            &pv,
            &batch.features,
            &batch.topo_rows,
            Some((draw, cfg.sigma_enc)),
            use_mi,
        )?;
        let ce = tape.ce_with_logits(v.logits, &batch.labels)?;
        let part = match (&topo_dense, v.x_a_hat, v.x_x_hat) {
            (Some(dense), Some(xa), Some(xx)) => {
                let rec = rec_loss_on_tape(&mut tape, xa, xx, dense, &batch.features)?;
                let exc = exc_loss_on_tape(&mut tape, v.z_a, v.z_x, v.z_a_s, v.z_x_s, cfg)?;
                let total = total_loss_on_tape(&mut tape, ce, rec, exc, cfg)?;
                (ce, Some(rec), Some(exc), total)
            }
            _ => (ce, None, None, ce),
        };
        parts.push(part);
        first.get_or_insert(v);
    }

    let loss = if parts.len() == 1 {
        parts[0].3
    } else {
        let mut acc = parts[0].3;
        for p in &parts[1..] {
            acc = tape.add(acc, p.3)?;
        }
        tape.scale(acc, 1.0 / parts.len() as f64)
    };
    tape.backward(loss)?;

    let k = parts.len() as f64;
    let value = |v: Option<Var>| v.map_or(0.0, |v| tape.value(v).data()[0]);
    let losses = LossBreakdown {
        ce: parts.iter().map(|p| value(Some(p.0))).sum::<f64>() / k,
        rec: parts.iter().map(|p| value(p.1)).sum::<f64>() / k,
        exc: parts.iter().map(|p| value(p.2)).sum::<f64>() / k,
        total: tape.value(loss).data()[0],
    };
    let grads = DignnParams::grads_from(&tape, &pv);
    let forward = ForwardOut::collect(&tape, first.as_ref().expect("at least one sample"));
    Ok(ObjectiveOutput { losses, grads, forward })
}
