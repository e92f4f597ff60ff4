//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment, every key optional. The literal name `default` means no file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dignn::graphdata::SplitRatios;
use dignn::trainer::TrainConfig;
use dignn::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub split: SplitRatios,
}

/// Every recognised key, in the order [`RunConfig::to_pairs`] emits them.
pub const KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "lr",
    "weight_decay",
    "seed",
    "mode",
    "ablation",
    "downsample",
    "d",
    "d_hidden",
    "encoder_layers",
    "alpha",
    "beta",
    "sigma_enc",
    "prior_mean",
    "prior_std",
    "mc_samples",
    "per_view_attention",
    "drop_conditional_terms",
    "train_ratio",
    "val_ratio",
    "test_ratio",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let m = &mut t.model;
        match key {
            "epochs" => t.epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "lr" => t.lr = parse(key, value)?,
            "weight_decay" => t.weight_decay = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "mode" => t.mode = value.parse()?,
            "ablation" => t.ablation = value.parse()?,
            "downsample" => t.downsample = parse(key, value)?,
            "d" => m.d = parse(key, value)?,
            "d_hidden" => m.d_hidden = parse(key, value)?,
            "encoder_layers" => m.encoder_layers = parse(key, value)?,
            "alpha" => m.alpha = parse(key, value)?,
            "beta" => m.beta = parse(key, value)?,
            "sigma_enc" => m.sigma_enc = parse(key, value)?,
            "prior_mean" => {
                m.prior_mean = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "prior_std" => m.prior_std = parse(key, value)?,
            "mc_samples" => m.mc_samples = parse(key, value)?,
            "per_view_attention" => m.per_view_attention = parse(key, value)?,
            "drop_conditional_terms" => m.drop_conditional_terms = parse(key, value)?,
            "train_ratio" => self.split.train = parse(key, value)?,
            "val_ratio" => self.split.val = parse(key, value)?,
            "test_ratio" => self.split.test = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    /// `default` or a path to a config file.
    pub fn load(source: &str) -> Result<Self> {
        if source == "default" {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(Path::new(source))
            .map_err(|e| Error::Config(format!("cannot read config {source}: {e}")))?;
        Self::parse_str(&text)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Fully materialised key/value pairs. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let m = &t.model;
        let prior: Vec<String> = m.prior_mean.iter().map(f64::to_string).collect();
        let values = [
            t.epochs.to_string(),
            t.batch_size.to_string(),
            t.lr.to_string(),
            t.weight_decay.to_string(),
            t.seed.to_string(),
            t.mode.to_string(),
            t.ablation.to_string(),
            t.downsample.to_string(),
            m.d.to_string(),
            m.d_hidden.to_string(),
            m.encoder_layers.to_string(),
            m.alpha.to_string(),
            m.beta.to_string(),
            m.sigma_enc.to_string(),
            prior.join(","),
            m.prior_std.to_string(),
            m.mc_samples.to_string(),
            m.per_view_attention.to_string(),
            m.drop_conditional_terms.to_string(),
            self.split.train.to_string(),
            self.split.val.to_string(),
            self.split.test.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn render(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.split.validate().map_err(|e| match e {
            Error::Split(m) => Error::Config(m),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dignn::trainer::{Ablation, TrainMode};

    #[test]
    fn render_parses_back() {
        let mut c = RunConfig::default();
        c.set("lr", "0.0003").unwrap();
        c.set("mode", "fullbatch").unwrap();
        c.set("prior_mean", "0.5, -1").unwrap();
        c.set("d", "2").unwrap();
        let back = RunConfig::parse_str(&c.render()).unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::from_pairs(&c.to_map()).unwrap(), c);
    }

    #[test]
    fn comments_blanks_and_defaults() {
        let c = RunConfig::parse_str("# run\n\nablation = no_mi  # drop MI terms\nbeta=0.4\n").unwrap();
        assert_eq!(c.train.ablation, Ablation::NoMi);
        assert_eq!(c.train.model.beta, 0.4);
        assert_eq!(c.train.mode, TrainMode::Minibatch);
        assert_eq!(c.train.epochs, 50);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::parse_str("gamma = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse_str("epochs = many"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse_str("epochs"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse_str("mode = sideways"), Err(Error::Config(_))));
    }

    #[test]
    fn every_key_is_settable() {
        let defaults = RunConfig::default();
        for (k, v) in defaults.to_pairs() {
            let mut c = RunConfig::default();
            c.set(k, &v).unwrap();
            assert_eq!(c, defaults, "{k}");
        }
    }
}
