use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::is_model_compatible;

/// Architecture of a video-specific autoencoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    /// `k`: filters in the first encoder layer.
    pub base_channels: usize,
    /// Output widths of the six encoder layers; the last one is the latent depth `12·k`.
    pub channel_progression: Vec<usize>,
    pub input_h: usize,
    pub input_w: usize,
    pub hflip_augmentation: bool,
    pub multires_augmentation: bool,
    pub multires_scales: Vec<f32>,
}

impl AutoencoderConfig {
    pub fn new(base_channels: usize, input_h: usize, input_w: usize) -> Self {
        AutoencoderConfig {
            base_channels,
            channel_progression: default_progression(base_channels),
            input_h,
            input_w,
            hflip_augmentation: false,
            multires_augmentation: false,
            multires_scales: vec![0.5, 0.25, 0.125],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_channels == 0 {
            return Err(Error::InvalidConfig("base_channels must be positive".into()));
        }
        if !is_model_compatible(self.input_h, self.input_w) {
            return Err(Error::InvalidConfig(format!(
                "input {}x{} is not divisible by 64",
                self.input_h, self.input_w
            )));
        }
        if self.channel_progression.len() != 6 {
            return Err(Error::InvalidConfig(
                "channel_progression must have exactly 6 entries".into(),
            ));
        }
        if self.channel_progression.iter().any(|&c| c == 0) {
            return Err(Error::InvalidConfig("channel widths must be positive".into()));
        }
        if self.channel_progression[5] != 12 * self.base_channels {
            return Err(Error::InvalidConfig(format!(
                "last encoder width must be 12*k = {}, got {}",
                12 * self.base_channels,
                self.channel_progression[5]
            )));
        }
        if self.channel_progression[0] != self.base_channels {
            return Err(Error::InvalidConfig(
                "first encoder width must equal base_channels".into(),
            ));
        }
        if self.multires_augmentation
            && (self.multires_scales.is_empty()
                || self.multires_scales.iter().any(|s| !(*s > 0.0 && *s <= 1.0)))
        {
            return Err(Error::InvalidConfig(
                "multires_scales must be non-empty and within (0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn latent_channels(&self) -> usize {
        self.channel_progression[5]
    }

    /// Latent shape for a `h`×`w` input.
    pub fn latent_shape(&self, h: usize, w: usize) -> (usize, usize, usize) {
        (self.latent_channels(), h / 64, w / 64)
    }

    /// Dimension of a per-pixel hypercolumn: the sum of all encoder widths.
    pub fn pixel_code_dim(&self) -> usize {
        self.channel_progression.iter().sum()
    }
}

/// `k, 2k, 4k, 8k, 12k, 12k`.
pub fn default_progression(k: usize) -> Vec<usize> {
    vec![k, 2 * k, 4 * k, 8 * k, 12 * k, 12 * k]
}

/// Optimization recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f32,
    pub epochs_constant: usize,
    pub epochs_decay: usize,
    pub large_video_threshold: usize,
    pub large_video_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 6,
            lr: 0.0002,
            epochs_constant: 100,
            epochs_decay: 100,
            large_video_threshold: 3000,
            large_video_epochs: 40,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || !(self.lr > 0.0)
            || self.epochs_constant + self.epochs_decay == 0
            || self.large_video_threshold == 0
            || self.large_video_epochs == 0
        {
            return Err(Error::InvalidConfig(
                "training parameters must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `(constant, decay)` epoch counts for a training set of `frames` frames.
    ///
    /// Large videos keep the same constant/decay proportion over the reduced budget.
    pub fn schedule(&self, frames: usize) -> (usize, usize) {
        if frames > self.large_video_threshold {
            let total = self.large_video_epochs;
            let full = (self.epochs_constant + self.epochs_decay).max(1);
            let constant = total * self.epochs_constant / full;
            (constant, total - constant)
        } else {
            (self.epochs_constant, self.epochs_decay)
        }
    }

    pub fn total_epochs(&self, frames: usize) -> usize {
        let (c, d) = self.schedule(frames);
        c + d
    }

    /// Learning rate for a zero-based epoch: constant, then linear decay towards zero.
    pub fn lr_at(&self, epoch: usize, frames: usize) -> f32 {
        let (constant, decay) = self.schedule(frames);
        if epoch < constant || decay == 0 {
            self.lr
        } else {
            let t = (epoch - constant) as f32 / decay as f32;
            self.lr * (1.0 - t).max(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_recipe() {
        let tc = TrainConfig::default();
        assert_eq!(tc.batch_size, 6);
        assert_eq!(tc.lr, 0.0002);
        assert_eq!(tc.total_epochs(60), 200);
        assert_eq!(tc.total_epochs(3000), 200);
        assert_eq!(tc.total_epochs(3500), 40);
        assert_eq!(tc.lr_at(99, 60), 0.0002);
        assert!((tc.lr_at(150, 60) - 0.0001).abs() < 1e-9);
        assert!(tc.lr_at(199, 60) > 0.0 && tc.lr_at(199, 60) < 0.00001);
    }

    #[test]
    fn config_validation() {
        assert!(AutoencoderConfig::new(64, 256, 512).validate().is_ok());
        assert!(AutoencoderConfig::new(16, 100, 128).validate().is_err());
        let mut c = AutoencoderConfig::new(8, 64, 64);
        c.channel_progression[5] = 95;
        assert!(c.validate().is_err());
        c.channel_progression = vec![8, 16];
        assert!(c.validate().is_err());
    }

    #[test]
    fn pixel_code_dims() {
        assert_eq!(AutoencoderConfig::new(64, 256, 512).pixel_code_dim(), 2496);
        assert_eq!(AutoencoderConfig::new(16, 128, 192).pixel_code_dim(), 624);
    }
}
