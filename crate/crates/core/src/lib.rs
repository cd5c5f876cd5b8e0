//! Video-specific autoencoders: train a convolutional autoencoder on the
//! frames of one video (or a few), then explore, edit and transmit the video
//! through its latent codes and manifold reprojection.

pub mod autoencoder;
pub mod cli;
pub mod editing;
pub mod error;
pub mod ingest;
pub mod latentops;
pub mod nn;
pub mod projection;
pub mod service;
pub mod synth;
pub mod transmit;

pub use error::{Error, Result};
