//! Two MLP encoders (topology rows and attributes), attention fusion, a
//! linear classifier, per-view decoders and the training objective.

mod config;
pub mod file;
pub mod forward;
pub mod losses;
mod params;

pub use config::DignnConfig;
pub use file::{check_model_matches, load_model, model_from_bytes, model_to_bytes, save_model};
pub use forward::{
    attention_fuse, classify, deterministic, encode_views, forward, predict, reparameterize, ForwardOut, NoiseDraw,
    Prediction,
};
pub use losses::{exc_loss, objective, rec_loss, total_loss, LossBreakdown, ObjectiveOutput};
pub use params::{AttentionParams, DignnParams, Linear, Mlp, ModelShape, Params, TensorKind};
