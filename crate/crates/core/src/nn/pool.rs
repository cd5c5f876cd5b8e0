use super::Tensor;

/// 2×2 max-pool with stride 2. Returns the output and the flat argmax index of each output.
pub fn max_pool2x2(x: &Tensor) -> (Tensor, Vec<u32>) {
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Tensor::zeros(x.n, x.c, oh, ow);
    let mut idx = vec![0u32; out.data.len()];
    for nc in 0..x.n * x.c {
        let src = &x.data[nc * x.h * x.w..(nc + 1) * x.h * x.w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (2 * oy) * x.w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = (2 * oy + dy) * x.w + 2 * ox + dx;
                    if src[i] > src[best] {
                        best = i;
                    }
                }
                let o = nc * oh * ow + oy * ow + ox;
                out.data[o] = src[best];
                idx[o] = (nc * x.h * x.w + best) as u32;
            }
        }
    }
    (out, idx)
}

pub fn max_pool2x2_backward(input_shape: [usize; 4], idx: &[u32], grad_out: &Tensor) -> Tensor {
    let [n, c, h, w] = input_shape;
    let mut dx = Tensor::zeros(n, c, h, w);
    for (g, &i) in grad_out.data.iter().zip(idx) {
        dx.data[i as usize] += *g;
    }
    dx
}
