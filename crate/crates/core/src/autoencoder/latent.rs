use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Encoder output for one frame: `channels × h × w` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub values: Vec<f32>,
    /// `(height, width)` of the frame that was encoded.
    pub source_shape: (usize, usize),
}

impl LatentCode {
    pub fn new(channels: usize, h: usize, w: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != channels * h * w {
            return Err(Error::shape(format!(
                "latent of {channels}x{h}x{w} needs {} values, got {}",
                channels * h * w,
                values.len()
            )));
        }
        Ok(LatentCode {
            channels,
            h,
            w,
            values,
            source_shape: (h * 64, w * 64),
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.h, self.w)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_same_shape(&self, other: &LatentCode) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "latent shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// `alpha · self + (1 − alpha) · other`; exact wherever the two agree.
    pub fn lerp(&self, other: &LatentCode, alpha: f32) -> Result<LatentCode> {
        self.check_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| if a == b { *a } else { alpha * a + (1.0 - alpha) * b })
            .collect();
        Ok(LatentCode {
            values,
            ..self.clone()
        })
    }

    /// Arithmetic mean, accumulated in f64 so the result does not depend on order beyond rounding.
    pub fn mean(codes: &[&LatentCode]) -> Result<LatentCode> {
        let first = *codes.first().ok_or(Error::EmptySelection)?;
        let mut acc = vec![0.0f64; first.values.len()];
        for c in codes {
            first.check_same_shape(c)?;
            for (a, v) in acc.iter_mut().zip(&c.values) {
                *a += *v as f64;
            }
        }
        let n = codes.len() as f64;
        Ok(LatentCode {
            values: acc.into_iter().map(|a| (a / n) as f32).collect(),
            ..first.clone()
        })
    }

    pub fn dot(&self, other: &LatentCode) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| *a as f64 * *b as f64)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sq_distance(&self, other: &LatentCode) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
            .sum()
    }
}
