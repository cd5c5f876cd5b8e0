use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::VideoAutoencoder;
use crate::error::{Error, Result};
use crate::ingest::{Frame, FrameSequence};
use crate::nn::{Adam, AdamConfig, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f32,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub total_epochs: usize,
    pub frame_count: usize,
    pub hflip_augmentation: bool,
    pub multires_augmentation: bool,
}

impl TrainHistory {
    pub fn first_loss(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.mean_loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }
}

/// Trains on the frames of one video. See [`train_many`].
pub fn train(
    model: VideoAutoencoder,
    frames: &FrameSequence,
    tc: &TrainConfig,
) -> Result<(VideoAutoencoder, TrainHistory)> {
    train_many(model, std::slice::from_ref(frames), tc, |_| {})
}

/// Minimizes the mean squared reconstruction error over the union of all
/// frames with Adam. Frames are an unordered set, reshuffled every epoch.
pub fn train_many(
    mut model: VideoAutoencoder,
    videos: &[FrameSequence],
    tc: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(VideoAutoencoder, TrainHistory)> {
    tc.validate()?;
    let frames: Vec<&Frame> = videos.iter().flat_map(|v| v.frames()).collect();
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "training needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let cfg = model.config().clone();
    if let Some(f) = frames
        .iter()
        .find(|f| f.dims() != (cfg.input_h, cfg.input_w))
    {
        return Err(Error::shape(format!(
            "training frame {:?} does not match model input {}x{}",
            f.dims(),
            cfg.input_h,
            cfg.input_w
        )));
    }

    let n = frames.len();
    let total = tc.total_epochs(n);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut opt = Adam::new(AdamConfig::default());
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory {
        epochs: Vec::with_capacity(total),
        total_epochs: total,
        frame_count: n,
        hflip_augmentation: cfg.hflip_augmentation,
        multires_augmentation: cfg.multires_augmentation,
    };

    for epoch in 0..total {
        let start = Instant::now();
        let lr = tc.lr_at(epoch, n);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(tc.batch_size) {
            let mut inputs = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for &i in batch {
                let mut target = frames[i].clone();
                if cfg.hflip_augmentation && rng.gen_bool(0.5) {
                    target = target.hflip();
                }
                let input = if cfg.multires_augmentation {
                    degrade_random(&target, &cfg.multires_scales, &mut rng)
                } else {
                    target.clone()
                };
                inputs.push(input);
                targets.push(target);
            }
            let x = stack(&inputs);
            let t = stack(&targets);
            model.zero_grad();
            let loss = model.train_step_grads(&x, &t);
            opt.step(&mut model.params_mut(), lr);
            loss_sum += loss * batch.len() as f64;
        }
        let record = EpochRecord {
            epoch,
            mean_loss: loss_sum / n as f64,
            lr,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        log::debug!(
            "epoch {epoch}/{total} loss {:.6} lr {lr:.2e} ({:.1}s)",
            record.mean_loss,
            record.wall_time_s
        );
        on_epoch(&record);
        history.epochs.push(record);
    }

    model.epochs_trained += total;
    model.trained_frame_count = n;
    model.source_labels = videos.iter().map(|v| v.source_label.clone()).collect();
    Ok((model, history))
}

fn stack(frames: &[Frame]) -> Tensor {
    let refs: Vec<&Frame> = frames.iter().collect();
    VideoAutoencoder::batch_tensor(&refs)
}

/// Downsamples by a random scale (or keeps full resolution) and restores the size bilinearly.
fn degrade_random(frame: &Frame, scales: &[f32], rng: &mut impl Rng) -> Frame {
    let pick = rng.gen_range(0..=scales.len());
    if pick == scales.len() {
        return frame.clone();
    }
    let s = scales[pick];
    let (h, w) = frame.dims();
    let lh = ((h as f32 * s).round() as usize).max(1);
    let lw = ((w as f32 * s).round() as usize).max(1);
    frame.resize_bilinear(lh, lw).resize_bilinear(h, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::AutoencoderConfig;

    fn tiny_video(n: usize) -> FrameSequence {
        let frames = (0..n)
            .map(|t| {
                Frame::from_fn(64, 64, |y, x| {
                    let cx = 16.0 + 4.0 * t as f32;
                    let d = ((x as f32 - cx).powi(2) + (y as f32 - 32.0).powi(2)).sqrt();
                    let s = if d < 10.0 { 0.9 } else { 0.2 };
                    [s, 0.5, x as f32 / 64.0]
                })
            })
            .collect();
        FrameSequence::new(frames, "tiny").unwrap()
    }

    #[test]
    fn needs_two_frames() {
        let m = VideoAutoencoder::build(AutoencoderConfig::new(2, 64, 64), 0).unwrap();
        let one = FrameSequence::new(vec![Frame::filled(64, 64, 0.5)], "x").unwrap();
        assert!(matches!(
            train(m, &one, &TrainConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn rejects_unconformed_frames() {
        let m = VideoAutoencoder::build(AutoencoderConfig::new(2, 64, 128), 0).unwrap();
        let tc = TrainConfig {
            epochs_constant: 1,
            epochs_decay: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(m, &tiny_video(3), &tc), Err(Error::Shape(_))));
    }

    #[test]
    fn short_run_reduces_loss_and_records_flags() {
        let mut cfg = AutoencoderConfig::new(4, 64, 64);
        cfg.multires_augmentation = true;
        let m = VideoAutoencoder::build(cfg, 1).unwrap();
        let tc = TrainConfig {
            epochs_constant: 20,
            epochs_decay: 10,
            lr: 2e-3,
            ..TrainConfig::default()
        };
        let untrained = m.clone();
        let video = tiny_video(8);
        let (trained, hist) = train(m, &video, &tc).unwrap();
        assert_eq!(hist.epochs.len(), 30);
        assert!(!hist.hflip_augmentation);
        assert!(hist.multires_augmentation);
        assert!(hist.final_loss().unwrap() < hist.first_loss().unwrap());
        assert!(hist.epochs.iter().all(|e| e.wall_time_s >= 0.0));
        let before = untrained.reconstruction_loss(video.frames()).unwrap();
        let after = trained.reconstruction_loss(video.frames()).unwrap();
        assert!(after < before, "{after} >= {before}");
        assert_eq!(trained.epochs_trained(), 30);
        assert_eq!(trained.source_labels(), &["tiny".to_string()]);
        let json = serde_json::to_value(&hist).unwrap();
        assert!(json["epochs"][0].get("wall_time_s").is_some());
    }

    #[test]
    fn large_video_epoch_budget() {
        let tc = TrainConfig::default();
        assert_eq!(tc.total_epochs(3500), 40);
        assert_eq!(tc.schedule(3500), (20, 20));
    }
}
