use super::{Param, Tensor};

/// Per-channel batch normalization with affine parameters and running statistics.
#[derive(Clone, Debug)]
pub struct BatchNorm2d {
    pub channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub eps: f32,
    pub momentum: f32,
}

/// What the backward pass needs from a training-mode forward.
#[derive(Clone, Debug)]
pub struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f32>,
}

impl BatchNorm2d {
    pub fn new(channels: usize, eps: f32, momentum: f32) -> Self {
        BatchNorm2d {
            channels,
            gamma: Param::filled(channels, 1.0),
            beta: Param::zeros(channels),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps,
            momentum,
        }
    }

    fn for_each_channel(t: &Tensor, c: usize, mut f: impl FnMut(&[f32])) {
        let plane = t.h * t.w;
        for n in 0..t.n {
            let off = (n * t.c + c) * plane;
            f(&t.data[off..off + plane]);
        }
    }

    /// Normalizes with batch statistics and updates the running estimates.
    pub fn forward_train(&mut self, x: &Tensor) -> (Tensor, BnCache) {
        assert_eq!(x.c, self.channels);
        let plane = x.h * x.w;
        let count = (x.n * plane) as f64;
        let mut out = x.clone();
        let mut xhat = x.clone();
        let mut inv_std = vec![0.0; self.channels];
        for c in 0..self.channels {
            let mut sum = 0.0f64;
            Self::for_each_channel(x, c, |p| sum += p.iter().map(|&v| v as f64).sum::<f64>());
            let mean = sum / count;
            let mut sq = 0.0f64;
            Self::for_each_channel(x, c, |p| {
                sq += p.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>()
            });
            let var = sq / count;
            let istd = 1.0 / (var + self.eps as f64).sqrt();
            inv_std[c] = istd as f32;
            let unbiased = if count > 1.0 { var * count / (count - 1.0) } else { var };
            let m = self.momentum;
            self.running_mean[c] = (1.0 - m) * self.running_mean[c] + m * mean as f32;
            self.running_var[c] = (1.0 - m) * self.running_var[c] + m * unbiased as f32;
            let (g, b) = (self.gamma.value[c], self.beta.value[c]);
            for n in 0..x.n {
                let off = (n * x.c + c) * plane;
                for i in off..off + plane {
                    let h = ((x.data[i] as f64 - mean) * istd) as f32;
                    xhat.data[i] = h;
                    out.data[i] = g * h + b;
                }
            }
        }
        (out, BnCache { xhat, inv_std })
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.c, self.channels);
        let plane = x.h * x.w;
        let mut out = x.clone();
        for c in 0..self.channels {
            let istd = 1.0 / (self.running_var[c] + self.eps).sqrt();
            let scale = self.gamma.value[c] * istd;
            let shift = self.beta.value[c] - self.running_mean[c] * scale;
            for n in 0..x.n {
                let off = (n * x.c + c) * plane;
                out.data[off..off + plane]
                    .iter_mut()
                    .for_each(|v| *v = *v * scale + shift);
            }
        }
        out
    }

    pub fn backward(&mut self, cache: &BnCache, grad_out: &Tensor) -> Tensor {
        let plane = grad_out.h * grad_out.w;
        let m = (grad_out.n * plane) as f32;
        let mut dx = grad_out.clone();
        for c in 0..self.channels {
            let mut sum_dy = 0.0f64;
            let mut sum_dy_xhat = 0.0f64;
            for n in 0..grad_out.n {
                let off = (n * grad_out.c + c) * plane;
                for i in off..off + plane {
                    let dy = grad_out.data[i] as f64;
                    sum_dy += dy;
                    sum_dy_xhat += dy * cache.xhat.data[i] as f64;
                }
            }
            self.beta.grad[c] += sum_dy as f32;
            self.gamma.grad[c] += sum_dy_xhat as f32;
            let g = self.gamma.value[c];
            let k = g * cache.inv_std[c] / m;
            let (sd, sdx) = (sum_dy as f32, sum_dy_xhat as f32);
            for n in 0..grad_out.n {
                let off = (n * grad_out.c + c) * plane;
                for i in off..off + plane {
                    dx.data[i] = k * (m * grad_out.data[i] - sd - cache.xhat.data[i] * sdx);
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
}
