use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub base_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub channel_progression: Vec<usize>,
    pub epochs_trained: usize,
    pub trained_frame_count: usize,
    pub source_labels: Vec<String>,
    pub hflip_augmentation: bool,
    pub multires_augmentation: bool,
    pub weights_digest: String,
    #[serde(default)]
    pub multires_scales: Vec<f32>,
    #[serde(default = "default_bn_eps")]
    pub batchnorm_eps: f32,
    #[serde(default = "default_bn_momentum")]
    pub batchnorm_momentum: f32,
    #[serde(default)]
    pub weight_init: String,
    #[serde(default)]
    pub optimizer: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_bn_eps() -> f32 {
    1e-5
}

fn default_bn_momentum() -> f32 {
    0.1
}

impl ModelManifest {
    pub fn validate(&self) -> Result<()> {
        if !super::is_model_compatible(self.input_height, self.input_width) {
            return Err(Error::InvalidConfig(format!(
                "input dims {}x{} are not divisible by 64",
                self.input_height, self.input_width
            )));
        }
        if self.channel_progression.len() != 6 {
            return Err(Error::InvalidConfig(
                "channel_progression must have 6 entries".into(),
            ));
        }
        if self.channel_progression[5] != 12 * self.base_channels {
            return Err(Error::InvalidConfig(format!(
                "last encoder width {} != 12 * {}",
                self.channel_progression[5], self.base_channels
            )));
        }
        if self.weights_digest.len() != 64
            || !self
                .weights_digest
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        {
            return Err(Error::InvalidConfig(
                "weights_digest must be 64 lowercase hex characters".into(),
            ));
        }
        Ok(())
    }

    /// First 16 bytes of the weights digest, as carried in transmission packets.
    pub fn digest16(&self) -> Result<[u8; 16]> {
        let bytes = hex::decode(&self.weights_digest)
            .map_err(|e| Error::CorruptBundle(format!("bad digest hex: {e}")))?;
        bytes
            .get(..16)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| Error::CorruptBundle("digest shorter than 16 bytes".into()))
    }
}

/// Serialized weights plus the manifest that describes them.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub weights: Vec<u8>,
    pub manifest: ModelManifest,
}

impl ModelBundle {
    pub fn verify(&self) -> Result<()> {
        let digest = weights_digest(&self.weights);
        if digest != self.manifest.weights_digest {
            return Err(Error::CorruptBundle(format!(
                "weights digest {digest} does not match manifest {}",
                self.manifest.weights_digest
            )));
        }
        Ok(())
    }
}

/// Lowercase hex SHA-256 of the weights bytes.
pub fn weights_digest(weights: &[u8]) -> String {
    hex::encode(Sha256::digest(weights))
}

/// Writes `manifest.json` and `weights.bin` into the bundle directory at `path`.
pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    bundle.manifest.validate()?;
    bundle.verify()?;
    let path = path.as_ref();
    std::fs::create_dir_all(path)?;
    std::fs::write(path.join(WEIGHTS_FILE), &bundle.weights)?;
    let json = serde_json::to_vec_pretty(&bundle.manifest)?;
    std::fs::write(path.join(MANIFEST_FILE), json)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let manifest: ModelManifest = serde_json::from_slice(&std::fs::read(path.join(MANIFEST_FILE))?)
        .map_err(|e| Error::CorruptBundle(format!("manifest: {e}")))?;
    let weights = std::fs::read(path.join(WEIGHTS_FILE))?;
    let bundle = ModelBundle { weights, manifest };
    bundle
        .manifest
        .validate()
        .map_err(|e| Error::CorruptBundle(e.to_string()))?;
    bundle.verify()?;
    Ok(bundle)
}
