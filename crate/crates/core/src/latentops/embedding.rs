use serde::{Deserialize, Serialize};

use super::pca;
use crate::autoencoder::LatentCode;
use crate::error::{Error, Result};

/// Two-component PCA over flattened latent codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub mean: Vec<f64>,
    pub basis: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    pub code_shape: (usize, usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub frame_id: u32,
    pub source_label: String,
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn distance(&self, other: &Point2D) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

fn flatten(code: &LatentCode) -> Vec<f64> {
    code.values.iter().map(|&v| v as f64).collect()
}

/// Fits the embedding. Each axis is signed so its largest-magnitude coefficient is positive.
pub fn fit_embedding(codes: &[LatentCode]) -> Result<EmbeddingModel> {
    if codes.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "embedding needs at least 3 codes, got {}",
            codes.len()
        )));
    }
    for c in codes {
        codes[0].check_same_shape(c)?;
    }
    let rows: Vec<Vec<f64>> = codes.iter().map(flatten).collect();
    let p = pca::fit(&rows, 2);
    let [b0, b1]: [Vec<f64>; 2] = p
        .components
        .try_into()
        .map_err(|_| Error::InsufficientData("latent codes have fewer than 2 dimensions".into()))?;
    Ok(EmbeddingModel {
        mean: p.mean,
        basis: [b0, b1],
        explained_variance: [p.variances[0], p.variances[1]],
        code_shape: codes[0].shape(),
    })
}

impl EmbeddingModel {
    pub fn coords(&self, code: &LatentCode) -> Result<(f64, f64)> {
        if code.shape() != self.code_shape {
            return Err(Error::shape(format!(
                "code shape {:?} does not match embedding {:?}",
                code.shape(),
                self.code_shape
            )));
        }
        let mut xy = [0.0; 2];
        for (k, b) in self.basis.iter().enumerate() {
            xy[k] = code
                .values
                .iter()
                .zip(&self.mean)
                .zip(b)
                .map(|((v, m), bi)| (*v as f64 - m) * bi)
                .sum();
        }
        Ok((xy[0], xy[1]))
    }

    pub fn embed(&self, code: &LatentCode, frame_id: u32, source_label: &str) -> Result<Point2D> {
        let (x, y) = self.coords(code)?;
        Ok(Point2D {
            frame_id,
            source_label: source_label.to_string(),
            x,
            y,
        })
    }

    /// `mean + x·b₁ + y·b₂` reshaped as a latent code.
    pub fn back_project(&self, x: f64, y: f64) -> LatentCode {
        let values = self
            .mean
            .iter()
            .zip(&self.basis[0])
            .zip(&self.basis[1])
            .map(|((m, b0), b1)| (m + x * b0 + y * b1) as f32)
            .collect();
        let (c, h, w) = self.code_shape;
        LatentCode::new(c, h, w, values).expect("embedding shape is consistent")
    }
}

/// Embeds every code; `labels` must be parallel to `codes`.
pub fn embed_all(
    em: &EmbeddingModel,
    codes: &[LatentCode],
    frame_ids: &[u32],
    labels: &[String],
) -> Result<Vec<Point2D>> {
    codes
        .iter()
        .zip(frame_ids)
        .zip(labels)
        .map(|((c, id), l)| em.embed(c, *id, l))
        .collect()
}
