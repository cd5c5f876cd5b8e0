//! A small CPU engine for the convolutional autoencoder: NCHW tensors,
//! im2col convolutions, batch-norm, max-pooling and Adam, each with a
//! hand-written backward pass.

mod adam;
mod batchnorm;
mod conv;
mod gemm;
mod pool;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use batchnorm::{BatchNorm2d, BnCache};
pub use conv::{Conv2d, ConvTranspose2d};
pub use pool::{max_pool2x2, max_pool2x2_backward};
pub use tensor::Tensor;

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// A learnable tensor and its accumulated gradient.
#[derive(Clone, Debug)]
pub struct Param {
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
}

impl Param {
    pub fn zeros(len: usize) -> Self {
        Param {
            value: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    pub fn filled(len: usize, v: f32) -> Self {
        Param {
            value: vec![v; len],
            grad: vec![0.0; len],
        }
    }

    /// He-normal initialization, `std = sqrt(2 / fan_in)`.
    pub fn he_normal(len: usize, fan_in: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
        Param {
            value: (0..len).map(|_| normal.sample(rng) as f32).collect(),
            grad: vec![0.0; len],
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

pub fn relu_inplace(t: &mut Tensor) {
    t.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Zeroes gradient entries where the (post-ReLU) activation is not positive.
pub fn relu_backward_inplace(grad: &mut Tensor, activation: &Tensor) {
    for (g, a) in grad.data.iter_mut().zip(&activation.data) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn sigmoid_inplace(t: &mut Tensor) {
    t.data
        .iter_mut()
        .for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
}

pub fn sigmoid_backward_inplace(grad: &mut Tensor, output: &Tensor) {
    for (g, y) in grad.data.iter_mut().zip(&output.data) {
        *g *= y * (1.0 - y);
    }
}

/// Bilinear resize of one `h`×`w` plane, half-pixel centers.
pub(crate) fn resize_plane(src: &[f32], h: usize, w: usize, oh: usize, ow: usize, out: &mut [f32]) {
    let sy = h as f32 / oh as f32;
    let sx = w as f32 / ow as f32;
    let coord = |d: usize, s: f32, len: usize| {
        let p = ((d as f32 + 0.5) * s - 0.5).max(0.0);
        let i0 = (p.floor() as usize).min(len - 1);
        (i0, (i0 + 1).min(len - 1), p - i0 as f32)
    };
    let xs: Vec<_> = (0..ow).map(|x| coord(x, sx, w)).collect();
    for y in 0..oh {
        let (y0, y1, fy) = coord(y, sy, h);
        for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
            let a = src[y0 * w + x0] + (src[y0 * w + x1] - src[y0 * w + x0]) * fx;
            let b = src[y1 * w + x0] + (src[y1 * w + x1] - src[y1 * w + x0]) * fx;
            out[y * ow + x] = a + (b - a) * fy;
        }
    }
}
