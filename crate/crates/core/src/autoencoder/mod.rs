//! The video-specific autoencoder and its training loop.

mod config;
mod latent;
mod model;
mod train;

pub use config::{default_progression, AutoencoderConfig, TrainConfig};
pub use latent::LatentCode;
pub use model::{VideoAutoencoder, BN_EPS, BN_MOMENTUM};
pub use train::{train, train_many, EpochRecord, TrainHistory};

use crate::error::Result;
use crate::ingest::Frame;

/// `build_model`: a freshly initialized autoencoder.
pub fn build_model(config: AutoencoderConfig, seed: u64) -> Result<VideoAutoencoder> {
    VideoAutoencoder::build(config, seed)
}

/// Mean over frames of the per-frame mean squared error of `g(f(x))`.
pub fn reconstruction_loss(model: &VideoAutoencoder, frames: &[Frame]) -> Result<f64> {
    model.reconstruction_loss(frames)
}
