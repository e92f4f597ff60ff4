//! Binary model file.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `DIGNNMDL` |
//! | 4     | format version (`u32`, currently 1) |
//! | 8 x 4 | `N`, `D`, `d`, `d_hidden` (`u64`) |
//! | 4     | linear layers per encoder/decoder (`u32`) |
//! | 4     | flags (`u32`; bit 0 = per-view attention) |
//!
//! followed by every tensor as row-major `f64` in the order of
//! [`Params::entries`](crate::model::Params::entries):
//! `enc_a.{i}.w/b`, `enc_x.{i}.w/b`, `att.q/w/b` (or `att_a.*`, `att_x.*`),
//! `cls.w/b`, `dec_a.{i}.w/b`, `dec_x.{i}.w/b`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::params::ModelShape;
use crate::model::DignnParams;

pub const MODEL_MAGIC: &[u8; 8] = b"DIGNNMDL";
pub const MODEL_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 * 4 + 4 + 4;
const FLAG_PER_VIEW: u32 = 1;

pub fn model_to_bytes(params: &DignnParams) -> Vec<u8> {
    let s = params.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + params.num_scalars() * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for v in [s.num_nodes, s.feature_dim, s.d, s.d_hidden] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&(s.layers as u32).to_le_bytes());
    let flags = if s.per_view_attention { FLAG_PER_VIEW } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for (_, _, m) in params.entries() {
        for x in m.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFile(msg.into())
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<DignnParams> {
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != MODEL_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(8);
    if version != MODEL_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dim = |i: usize| -> Result<usize> {
        usize::try_from(u64_at(12 + 8 * i)).map_err(|_| bad("dimension overflows usize"))
    };
    let layers = u32_at(44) as usize;
    let flags = u32_at(48);
    if flags & !FLAG_PER_VIEW != 0 {
        return Err(bad(format!("unknown flags {flags:#x}")));
    }
    let shape = ModelShape {
        num_nodes: dim(0)?,
        feature_dim: dim(1)?,
        d: dim(2)?,
        d_hidden: dim(3)?,
        layers,
        per_view_attention: flags & FLAG_PER_VIEW != 0,
    };
    if shape.num_nodes == 0 || shape.feature_dim == 0 || shape.d == 0 || shape.d_hidden == 0 || layers == 0 {
        return Err(bad(format!("degenerate dimensions {shape:?}")));
    }
    // Size check before allocating anything proportional to the header.
    let scalars = expected_scalars(&shape).ok_or_else(|| bad("dimensions overflow"))?;
    let body = &bytes[HEADER_LEN..];
    if Some(body.len()) != scalars.checked_mul(8) {
        return Err(bad(format!(
            "expected {} tensor bytes for {shape:?}, found {}",
            scalars.saturating_mul(8),
            body.len()
        )));
    }
    let mut params = DignnParams::zeros(shape);
    let mut chunks = body.chunks_exact(8);
    for t in params.tensors_mut() {
        for x in t.data_mut() {
            *x = f64::from_le_bytes(chunks.next().expect("length checked").try_into().expect("8 bytes"));
        }
    }
    Ok(params)
}

fn expected_scalars(s: &ModelShape) -> Option<usize> {
    let mlp = |input: usize, output: usize| -> Option<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(s.d_hidden, s.layers - 1));
        dims.push(output);
        dims.windows(2).try_fold(0usize, |acc, w| {
            acc.checked_add(w[0].checked_mul(w[1])?.checked_add(w[1])?)
        })
    };
    let views = if s.per_view_attention { 2 } else { 1 };
    let attention = views * (s.d + s.d * s.d + s.d);
    let classifier = s.d * 2 + 2;
    [
        mlp(s.num_nodes, s.d)?,
        mlp(s.feature_dim, s.d)?,
        mlp(s.d, s.num_nodes)?,
        mlp(s.d, s.feature_dim)?,
        attention,
        classifier,
    ]
    .into_iter()
    .try_fold(0usize, |a, b| a.checked_add(b))
}

pub fn save_model(params: &DignnParams, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&model_to_bytes(params))?;
    f.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<DignnParams> {
    let bytes = fs::read(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    model_from_bytes(&bytes)
}

/// Fails unless the model was built for a graph with `num_nodes` nodes and
/// `feature_dim` features.
pub fn check_model_matches(params: &DignnParams, num_nodes: usize, feature_dim: usize) -> Result<()> {
    let s = params.shape();
    if s.num_nodes != num_nodes || s.feature_dim != feature_dim {
        return Err(bad(format!(
            "model expects N = {}, D = {} but the graph has N = {num_nodes}, D = {feature_dim}",
            s.num_nodes, s.feature_dim
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DignnConfig;
    use crate::ndcore::rng::{stream_rng, Stream};

    fn toy(per_view: bool, layers: usize) -> DignnParams {
        let cfg = DignnConfig {
            d: 3,
            d_hidden: 5,
            encoder_layers: layers,
            per_view_attention: per_view,
            ..Default::default()
        };
        DignnParams::init(&cfg, 7, 4, &mut stream_rng(1, Stream::Init, 0))
    }

    #[test]
    fn round_trip_is_exact() {
        for (pv, layers) in [(false, 2), (true, 2), (false, 1), (true, 3)] {
            let p = toy(pv, layers);
            let bytes = model_to_bytes(&p);
            assert_eq!(bytes.len(), HEADER_LEN + 8 * p.num_scalars());
            assert_eq!(model_from_bytes(&bytes).unwrap(), p);
        }
    }

    #[test]
    fn rejects_corruption() {
        let bytes = model_to_bytes(&toy(false, 2));
        assert!(model_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(model_from_bytes(&bytes[..10]).is_err());
        let mut b = bytes.clone();
        b[0] = b'X';
        assert!(model_from_bytes(&b).is_err());
        let mut b = bytes.clone();
        b[8] = 9;
        assert!(model_from_bytes(&b).is_err());
        let mut b = bytes;
        b[12..20].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(model_from_bytes(&b).is_err());
    }

    #[test]
    fn dimension_check() {
        let p = toy(false, 2);
        assert!(check_model_matches(&p, 7, 4).is_ok());
        assert!(check_model_matches(&p, 7, 5).is_err());
        assert!(check_model_matches(&p, 8, 4).is_err());
    }
}
