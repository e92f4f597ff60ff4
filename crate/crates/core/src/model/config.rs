use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and loss weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DignnConfig {
    /// Embedding width of each view and of the fused representation.
    pub d: usize,
    /// Width of the hidden layer(s) in encoders and decoders.
    pub d_hidden: usize,
    /// Number of linear layers per encoder/decoder.
    pub encoder_layers: usize,
    /// Weight of the reconstruction loss.
    pub alpha: f64,
    /// Weight of the cross-view exclusion loss.
    pub beta: f64,
    /// Fixed std of the Gaussian encoder posterior.
    pub sigma_enc: f64,
    /// Prior mean; empty means the zero vector.
    pub prior_mean: Vec<f64>,
    pub prior_std: f64,
    pub mc_samples: usize,
    /// Separate (q, W, b) per view instead of one shared set.
    pub per_view_attention: bool,
    /// Drop the conditional log-density terms of the exclusion loss. With a
    /// fixed encoder std they carry no gradient.
    pub drop_conditional_terms: bool,
}

impl Default for DignnConfig {
    fn default() -> Self {
        Self {
            d: 32,
            d_hidden: 64,
            encoder_layers: 2,
            alpha: 0.05,
            beta: 0.8,
            sigma_enc: 1.0,
            prior_mean: Vec::new(),
            prior_std: 1.0,
            mc_samples: 1,
            per_view_attention: false,
            drop_conditional_terms: false,
        }
    }
}

impl DignnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.d == 0 || self.d_hidden == 0 {
            return fail("d and d_hidden must be >= 1".into());
        }
        if self.encoder_layers == 0 {
            return fail("encoder_layers must be >= 1".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) || !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail(format!(
                "alpha and beta must be >= 0 (got {}, {})",
                self.alpha, self.beta
            ));
        }
        if !(self.sigma_enc > 0.0) || !(self.prior_std > 0.0) {
            return fail("sigma_enc and prior_std must be > 0".into());
        }
        if !self.prior_mean.is_empty() && self.prior_mean.len() != self.d {
            return fail(format!(
                "prior_mean has {} entries but d = {}",
                self.prior_mean.len(),
                self.d
            ));
        }
        if self.mc_samples == 0 {
            return fail("mc_samples must be >= 1".into());
        }
        Ok(())
    }

    pub fn prior_mean_vec(&self) -> Vec<f64> {
        if self.prior_mean.is_empty() {
            vec![0.0; self.d]
        } else {
            self.prior_mean.clone()
        }
    }
}
