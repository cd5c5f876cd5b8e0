//! Operations over latent codes: 2D embedding, averages, interpolation and
//! temporal resampling, clustering, and pixel-level hypercolumn codes.

mod cluster;
mod embedding;
mod pca;
mod pixel;

pub use cluster::{cluster, cluster_points, kmeans, purity_curve, ClusterResult, CurvePoint};
pub use embedding::{embed_all, fit_embedding, EmbeddingModel, Point2D};
pub(crate) use pca::{fit as pca_fit, Pca};
pub use pixel::{
    correspond, pixel_codes, propagate_mask, propagate_mask_with_progress, FlowMap, LabelMap, PixelCodeField,
    DEFAULT_SEARCH_RADIUS,
};

use crate::autoencoder::LatentCode;
use crate::error::{Error, Result};
use crate::ingest::{Frame, FrameSequence};
use crate::projection::{iterate_project, Reprojector};

/// Arithmetic mean of a nonempty subset of codes.
pub fn average_codes(codes: &[&LatentCode]) -> Result<LatentCode> {
    LatentCode::mean(codes)
}

/// Decodes the mean code, then applies `iterations` reprojections.
pub fn decode_average<M: Reprojector + ?Sized>(
    model: &M,
    codes: &[&LatentCode],
    iterations: usize,
) -> Result<Frame> {
    let mean = average_codes(codes)?;
    iterate_project(model, &model.decode(&mean)?, iterations)
}

/// Index (into `codes`) of the code nearest to `target`.
pub fn mediod(codes: &[&LatentCode], target: &LatentCode) -> Result<usize> {
    codes
        .iter()
        .enumerate()
        .map(|(i, c)| Ok((i, c.sq_distance(target))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or(Error::EmptySelection)
}

/// Latent blend `alpha·a + (1 − alpha)·b`; `alpha` weights the earlier frame.
pub fn interpolate_code(code_a: &LatentCode, code_b: &LatentCode, alpha: f32) -> Result<LatentCode> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    code_a.lerp(code_b, alpha)
}

/// `g(alpha·a + (1 − alpha)·b)`.
pub fn interpolate<M: Reprojector + ?Sized>(
    model: &M,
    code_a: &LatentCode,
    code_b: &LatentCode,
    alpha: f32,
) -> Result<Frame> {
    model.decode(&interpolate_code(code_a, code_b, alpha)?)
}

/// Output length of [`resample_timeline`] for `n` codes.
pub fn resampled_len(n: usize, factor: f64) -> usize {
    if factor > 1.0 {
        (n - 1) * factor.ceil() as usize + 1
    } else {
        ((n as f64 * factor).ceil() as usize).clamp(1, n)
    }
}

/// Slows down (`factor > 1`: `⌈factor⌉ − 1` interpolated frames per adjacent pair)
/// or speeds up (`factor < 1`: uniform subsampling) an ordered list of codes.
pub fn resample_timeline<M: Reprojector + ?Sized>(
    model: &M,
    codes: &[LatentCode],
    factor: f64,
) -> Result<FrameSequence> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidFactor(factor));
    }
    if codes.len() < 2 {
        return Err(Error::InsufficientData(
            "resampling needs at least 2 codes".into(),
        ));
    }
    let mut frames = Vec::with_capacity(resampled_len(codes.len(), factor));
    if factor > 1.0 {
        let steps = factor.ceil() as usize;
        for (i, pair) in codes.windows(2).enumerate() {
            if i == 0 {
                frames.push(model.decode(&pair[0])?);
            }
            for s in 1..steps {
                let alpha = 1.0 - s as f32 / steps as f32;
                frames.push(interpolate(model, &pair[0], &pair[1], alpha)?);
            }
            frames.push(model.decode(&pair[1])?);
        }
    } else {
        let m = resampled_len(codes.len(), factor);
        let step = 1.0 / factor;
        for i in 0..m {
            let idx = ((i as f64 * step).floor() as usize).min(codes.len() - 1);
            frames.push(model.decode(&codes[idx])?);
        }
    }
    FrameSequence::new(frames, "resampled")
}
