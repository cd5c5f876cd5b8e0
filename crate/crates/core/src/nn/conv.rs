use rand::Rng;

use super::gemm::gemm;
use super::{Param, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Geometry {
    channels: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn new(channels: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Self {
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        Geometry {
            channels,
            h,
            w,
            k,
            stride,
            pad,
            oh,
            ow,
        }
    }

    fn rows(&self) -> usize {
        self.channels * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }
}

/// Unfolds `channels × h × w` into a `(channels·k·k) × (oh·ow)` patch matrix.
fn im2col(src: &[f32], g: &Geometry, col: &mut [f32]) {
    let cols = g.cols();
    for c in 0..g.channels {
        let plane = &src[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let out = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        out.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in out.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *v = if ix >= 0 && ix < g.w as isize {
                            src_row[ix as usize]
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch rows back into `channels × h × w`, accumulating.
fn col2im(col: &[f32], g: &Geometry, dst: &mut [f32]) {
    let cols = g.cols();
    for c in 0..g.channels {
        let plane = &mut dst[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &col[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in src[oy * g.ow..(oy + 1) * g.ow].iter().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst_row[ix as usize] += *v;
                        }
                    }
                }
            }
        }
    }
}

/// 2D convolution; weights are `cout × (cin·k·k)`.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Param,
    pub bias: Option<Param>,
}

impl Conv2d {
    pub fn new(
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = cin * k * k;
        Conv2d {
            cin,
            cout,
            k,
            stride,
            pad,
            weight: Param::he_normal(cout * fan_in, fan_in, rng),
            bias: bias.then(|| Param::zeros(cout)),
        }
    }

    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let g = Geometry::new(self.cin, h, w, self.k, self.stride, self.pad);
        (g.oh, g.ow)
    }

    fn geometry(&self, x: &Tensor) -> Geometry {
        assert_eq!(x.c, self.cin, "conv input channels");
        Geometry::new(self.cin, x.h, x.w, self.k, self.stride, self.pad)
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let g = self.geometry(x);
        let mut out = Tensor::zeros(x.n, self.cout, g.oh, g.ow);
        let mut col = vec![0.0; g.rows() * g.cols()];
        for i in 0..x.n {
            im2col(x.sample(i), &g, &mut col);
            let o = out.sample_mut(i);
            gemm(
                self.cout,
                g.rows(),
                g.cols(),
                &self.weight.value,
                false,
                &col,
                false,
                0.0,
                o,
            );
            if let Some(b) = &self.bias {
                for (co, plane) in o.chunks_mut(g.cols()).enumerate() {
                    plane.iter_mut().for_each(|v| *v += b.value[co]);
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients; returns the input gradient when requested.
    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor, want_input_grad: bool) -> Option<Tensor> {
        let g = self.geometry(x);
        let mut col = vec![0.0; g.rows() * g.cols()];
        let mut dx = want_input_grad.then(|| Tensor::zeros(x.n, x.c, x.h, x.w));
        let mut dcol = if want_input_grad {
            vec![0.0; g.rows() * g.cols()]
        } else {
            Vec::new()
        };
        for i in 0..x.n {
            let go = grad_out.sample(i);
            im2col(x.sample(i), &g, &mut col);
            gemm(
                self.cout,
                g.cols(),
                g.rows(),
                go,
                false,
                &col,
                true,
                1.0,
                &mut self.weight.grad,
            );
            if let Some(b) = &mut self.bias {
                for (co, plane) in go.chunks(g.cols()).enumerate() {
                    b.grad[co] += plane.iter().sum::<f32>();
                }
            }
            if let Some(dx) = dx.as_mut() {
                gemm(
                    g.rows(),
                    self.cout,
                    g.cols(),
                    &self.weight.value,
                    true,
                    go,
                    false,
                    0.0,
                    &mut dcol,
                );
                col2im(&dcol, &g, dx.sample_mut(i));
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.weight];
        if let Some(b) = &mut self.bias {
            v.push(b);
        }
        v
    }
}

/// Transposed convolution (fractionally strided); weights are `cin × (cout·k·k)`.
#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Param,
}

impl ConvTranspose2d {
    pub fn new(cin: usize, cout: usize, k: usize, stride: usize, pad: usize, rng: &mut impl Rng) -> Self {
        // each output pixel receives about cin·k²/stride² contributions
        let fan_in = (cin * k * k / (stride * stride)).max(1);
        ConvTranspose2d {
            cin,
            cout,
            k,
            stride,
            pad,
            weight: Param::he_normal(cin * cout * k * k, fan_in, rng),
        }
    }

    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h - 1) * self.stride + self.k - 2 * self.pad,
            (w - 1) * self.stride + self.k - 2 * self.pad,
        )
    }

    /// Geometry of the equivalent forward convolution, which maps the output back onto the input.
    fn geometry(&self, x: &Tensor) -> Geometry {
        assert_eq!(x.c, self.cin, "transposed conv input channels");
        let (oh, ow) = self.output_dims(x.h, x.w);
        let g = Geometry::new(self.cout, oh, ow, self.k, self.stride, self.pad);
        debug_assert_eq!((g.oh, g.ow), (x.h, x.w));
        g
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let g = self.geometry(x);
        let mut out = Tensor::zeros(x.n, self.cout, g.h, g.w);
        let mut col = vec![0.0; g.rows() * g.cols()];
        for i in 0..x.n {
            gemm(
                g.rows(),
                self.cin,
                g.cols(),
                &self.weight.value,
                true,
                x.sample(i),
                false,
                0.0,
                &mut col,
            );
            col2im(&col, &g, out.sample_mut(i));
        }
        out
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor, want_input_grad: bool) -> Option<Tensor> {
        let g = self.geometry(x);
        let mut dcol = vec![0.0; g.rows() * g.cols()];
        let mut dx = want_input_grad.then(|| Tensor::zeros(x.n, x.c, x.h, x.w));
        for i in 0..x.n {
            im2col(grad_out.sample(i), &g, &mut dcol);
            gemm(
                self.cin,
                g.cols(),
                g.rows(),
                x.sample(i),
                false,
                &dcol,
                true,
                1.0,
                &mut self.weight.grad,
            );
            if let Some(dx) = dx.as_mut() {
                gemm(
                    self.cin,
                    g.rows(),
                    g.cols(),
                    &self.weight.value,
                    false,
                    &dcol,
                    false,
                    0.0,
                    dx.sample_mut(i),
                );
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight]
    }
}
