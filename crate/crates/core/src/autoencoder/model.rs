use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::AutoencoderConfig;
use super::latent::LatentCode;
use crate::error::{Error, Result};
use crate::ingest::{
    is_model_compatible, weights_digest, Frame, ModelBundle, ModelManifest, CHANNELS,
    MANIFEST_FORMAT_VERSION,
};
use crate::nn::{
    max_pool2x2, max_pool2x2_backward, relu_backward_inplace, relu_inplace,
    sigmoid_backward_inplace, sigmoid_inplace, BatchNorm2d, BnCache, Conv2d, ConvTranspose2d,
    Param, Tensor,
};

pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;
const WEIGHTS_MAGIC: &[u8; 4] = b"VSAW";
const WEIGHTS_VERSION: u32 = 1;

#[derive(Clone, Debug)]
struct EncoderBlock {
    conv: Conv2d,
    bn: BatchNorm2d,
    pool: bool,
}

#[derive(Clone, Debug)]
struct DecoderBlock {
    deconv: ConvTranspose2d,
    bn: BatchNorm2d,
}

struct EncoderCache {
    input: Tensor,
    bn: BnCache,
    act: Tensor,
    pool_idx: Option<Vec<u32>>,
}

struct DecoderCache {
    input: Tensor,
    bn: BnCache,
    act: Tensor,
}

/// Activations kept by a training-mode forward pass.
pub(crate) struct ForwardCache {
    enc: Vec<EncoderCache>,
    dec: Vec<DecoderCache>,
    head_input: Tensor,
    output: Tensor,
}

impl ForwardCache {
    pub(crate) fn output(&self) -> &Tensor {
        &self.output
    }
}

/// Convolutional encoder `f` and decoder `g` without skip connections.
///
/// Encoder: four 5×5 stride-2 convolutions, then two 5×5 stride-1 convolutions
/// each followed by a 2×2 max-pool; every convolution is followed by batch-norm
/// and ReLU. Decoder: six 4×4 stride-2 transposed convolutions with batch-norm
/// and ReLU, then a 1×1 projection to RGB and a sigmoid.
#[derive(Clone, Debug)]
pub struct VideoAutoencoder {
    config: AutoencoderConfig,
    encoder: Vec<EncoderBlock>,
    decoder: Vec<DecoderBlock>,
    head: Conv2d,
    pub(crate) seed: u64,
    pub(crate) epochs_trained: usize,
    pub(crate) trained_frame_count: usize,
    pub(crate) source_labels: Vec<String>,
}

impl VideoAutoencoder {
    /// Builds a freshly initialized model.
    pub fn build(config: AutoencoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = config.channel_progression.clone();
        let encoder = (0..6)
            .map(|i| {
                let cin = if i == 0 { CHANNELS } else { p[i - 1] };
                let stride = if i < 4 { 2 } else { 1 };
                EncoderBlock {
                    conv: Conv2d::new(cin, p[i], 5, stride, 2, false, &mut rng),
                    bn: BatchNorm2d::new(p[i], BN_EPS, BN_MOMENTUM),
                    pool: i >= 4,
                }
            })
            .collect();
        let decoder = (0..6)
            .map(|j| {
                let cin = p[5 - j];
                let cout = if j < 5 { p[4 - j] } else { p[0] };
                DecoderBlock {
                    deconv: ConvTranspose2d::new(cin, cout, 4, 2, 1, &mut rng),
                    bn: BatchNorm2d::new(cout, BN_EPS, BN_MOMENTUM),
                }
            })
            .collect();
        let head = Conv2d::new(p[0], CHANNELS, 1, 1, 0, true, &mut rng);
        let model = VideoAutoencoder {
            config,
            encoder,
            decoder,
            head,
            seed,
            epochs_trained: 0,
            trained_frame_count: 0,
            source_labels: Vec::new(),
        };
        model.check_bookkeeping(model.config.input_h, model.config.input_w)?;
        Ok(model)
    }

    /// Walks layer geometry to confirm the encoder divides by exactly 64 and the decoder multiplies back.
    fn check_bookkeeping(&self, h: usize, w: usize) -> Result<()> {
        let (mut ch, mut cw) = (h, w);
        for b in &self.encoder {
            (ch, cw) = b.conv.output_dims(ch, cw);
            if b.pool {
                (ch, cw) = (ch / 2, cw / 2);
            }
        }
        if (ch * 64, cw * 64) != (h, w) {
            return Err(Error::InvalidConfig(format!(
                "encoder maps {h}x{w} to {ch}x{cw}, expected a /64 reduction"
            )));
        }
        for b in &self.decoder {
            (ch, cw) = b.deconv.output_dims(ch, cw);
        }
        if (ch, cw) != (h, w) {
            return Err(Error::InvalidConfig(format!(
                "decoder restores {ch}x{cw}, expected {h}x{w}"
            )));
        }
        Ok(())
    }

    pub fn config(&self) -> &AutoencoderConfig {
        &self.config
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    pub fn source_labels(&self) -> &[String] {
        &self.source_labels
    }

    pub fn parameter_count(&self) -> usize {
        let mut m = self.clone();
        m.params_mut().iter().map(|p| p.value.len()).sum()
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = Vec::new();
        for b in &mut self.encoder {
            v.extend(b.conv.params_mut());
            v.extend(b.bn.params_mut());
        }
        for b in &mut self.decoder {
            v.extend(b.deconv.params_mut());
            v.extend(b.bn.params_mut());
        }
        v.extend(self.head.params_mut());
        v
    }

    pub(crate) fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        if !is_model_compatible(frame.height(), frame.width()) {
            return Err(Error::shape(format!(
                "frame {}x{} is not divisible by 64",
                frame.height(),
                frame.width()
            )));
        }
        Ok(())
    }

    fn frame_tensor(frames: &[&Frame]) -> Tensor {
        let (h, w) = frames[0].dims();
        let samples: Vec<&[f32]> = frames.iter().map(|f| f.data()).collect();
        Tensor::stack(&samples, CHANNELS, h, w)
    }

    /// Eval-mode encoder; also returns each layer's post-ReLU activation (before pooling).
    pub(crate) fn encode_tensor(&self, x: &Tensor, keep_activations: bool) -> (Tensor, Vec<Tensor>) {
        let mut acts = Vec::new();
        let mut cur = x.clone();
        for b in &self.encoder {
            let mut y = b.bn.forward_eval(&b.conv.forward(&cur));
            relu_inplace(&mut y);
            if keep_activations {
                acts.push(y.clone());
            }
            cur = if b.pool { max_pool2x2(&y).0 } else { y };
        }
        (cur, acts)
    }

    pub(crate) fn decode_tensor(&self, z: &Tensor) -> Tensor {
        let mut cur = z.clone();
        for b in &self.decoder {
            cur = b.bn.forward_eval(&b.deconv.forward(&cur));
            relu_inplace(&mut cur);
        }
        let mut out = self.head.forward(&cur);
        sigmoid_inplace(&mut out);
        out
    }

    /// `f(x)`: deterministic, uses running batch-norm statistics.
    pub fn encode(&self, frame: &Frame) -> Result<LatentCode> {
        self.check_frame(frame)?;
        let (z, _) = self.encode_tensor(&Self::frame_tensor(&[frame]), false);
        let mut code = LatentCode::new(z.c, z.h, z.w, z.data)?;
        code.source_shape = frame.dims();
        Ok(code)
    }

    pub fn encode_all(&self, frames: &[Frame]) -> Result<Vec<LatentCode>> {
        frames.iter().map(|f| self.encode(f)).collect()
    }

    /// `g(z)`: output is `64·h' × 64·w'` with values in `[0, 1]`.
    pub fn decode(&self, code: &LatentCode) -> Result<Frame> {
        if code.channels != self.config.latent_channels() {
            return Err(Error::shape(format!(
                "latent has {} channels, model expects {}",
                code.channels,
                self.config.latent_channels()
            )));
        }
        if code.h == 0 || code.w == 0 {
            return Err(Error::shape("latent has zero spatial extent"));
        }
        let z = Tensor::from_vec(1, code.channels, code.h, code.w, code.values.clone());
        let out = self.decode_tensor(&z);
        Frame::from_clamped(out.h, out.w, out.data)
    }

    /// One encode–decode pass.
    pub fn reconstruct(&self, frame: &Frame) -> Result<Frame> {
        self.decode(&self.encode(frame)?)
    }

    /// Mean over frames of the per-frame mean squared pixel error.
    pub fn reconstruction_loss(&self, frames: &[Frame]) -> Result<f64> {
        if frames.is_empty() {
            return Err(Error::InsufficientData("no frames".into()));
        }
        let mut total = 0.0;
        for f in frames {
            total += self.reconstruct(f)?.mse(f)?;
        }
        Ok(total / frames.len() as f64)
    }

    /// Training-mode forward (batch statistics, running averages updated).
    pub(crate) fn forward_train(&mut self, x: &Tensor) -> ForwardCache {
        let mut enc = Vec::with_capacity(6);
        let mut cur = x.clone();
        for b in &mut self.encoder {
            let pre = b.conv.forward(&cur);
            let (mut act, bn) = b.bn.forward_train(&pre);
            relu_inplace(&mut act);
            let (next, pool_idx) = if b.pool {
                let (p, idx) = max_pool2x2(&act);
                (p, Some(idx))
            } else {
                (act.clone(), None)
            };
            enc.push(EncoderCache {
                input: std::mem::replace(&mut cur, next),
                bn,
                act,
                pool_idx,
            });
        }
        let mut dec = Vec::with_capacity(6);
        for b in &mut self.decoder {
            let pre = b.deconv.forward(&cur);
            let (mut act, bn) = b.bn.forward_train(&pre);
            relu_inplace(&mut act);
            dec.push(DecoderCache {
                input: std::mem::replace(&mut cur, act.clone()),
                bn,
                act,
            });
        }
        let mut output = self.head.forward(&cur);
        sigmoid_inplace(&mut output);
        ForwardCache {
            enc,
            dec,
            head_input: cur,
            output,
        }
    }

    /// Backpropagates `grad_out` (w.r.t. the sigmoid output), accumulating parameter gradients.
    pub(crate) fn backward(&mut self, cache: &ForwardCache, grad_out: &Tensor) {
        let mut g = grad_out.clone();
        sigmoid_backward_inplace(&mut g, &cache.output);
        let mut g = self
            .head
            .backward(&cache.head_input, &g, true)
            .expect("input grad");
        for (b, c) in self.decoder.iter_mut().zip(&cache.dec).rev() {
            relu_backward_inplace(&mut g, &c.act);
            let gpre = b.bn.backward(&c.bn, &g);
            g = b.deconv.backward(&c.input, &gpre, true).expect("input grad");
        }
        let n_enc = self.encoder.len();
        for (i, (b, c)) in self.encoder.iter_mut().zip(&cache.enc).enumerate().rev() {
            if let Some(idx) = &c.pool_idx {
                g = max_pool2x2_backward(c.act.shape(), idx, &g);
            }
            relu_backward_inplace(&mut g, &c.act);
            let gpre = b.bn.backward(&c.bn, &g);
            let want = i > 0;
            if let Some(dx) = b.conv.backward(&c.input, &gpre, want) {
                g = dx;
            }
            let _ = n_enc;
        }
    }

    /// MSE of a batch in training mode plus its gradient; gradients accumulate into the parameters.
    pub(crate) fn train_step_grads(&mut self, inputs: &Tensor, targets: &Tensor) -> f64 {
        let cache = self.forward_train(inputs);
        let count = targets.data.len() as f64;
        let mut loss = 0.0f64;
        let mut grad = Tensor::zeros(targets.n, targets.c, targets.h, targets.w);
        let scale = (2.0 / count) as f32;
        for ((g, y), t) in grad
            .data
            .iter_mut()
            .zip(&cache.output().data)
            .zip(&targets.data)
        {
            let d = y - t;
            loss += (d as f64) * (d as f64);
            *g = scale * d;
        }
        self.backward(&cache, &grad);
        loss / count
    }

    fn for_each_tensor(&self, mut f: impl FnMut(&[f32])) {
        for b in &self.encoder {
            f(&b.conv.weight.value);
            f(&b.bn.gamma.value);
            f(&b.bn.beta.value);
            f(&b.bn.running_mean);
            f(&b.bn.running_var);
        }
        for b in &self.decoder {
            f(&b.deconv.weight.value);
            f(&b.bn.gamma.value);
            f(&b.bn.beta.value);
            f(&b.bn.running_mean);
            f(&b.bn.running_var);
        }
        f(&self.head.weight.value);
        f(&self.head.bias.as_ref().expect("head bias").value);
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f32>> {
        let mut v: Vec<&mut Vec<f32>> = Vec::new();
        for b in &mut self.encoder {
            v.push(&mut b.conv.weight.value);
            v.push(&mut b.bn.gamma.value);
            v.push(&mut b.bn.beta.value);
            v.push(&mut b.bn.running_mean);
            v.push(&mut b.bn.running_var);
        }
        for b in &mut self.decoder {
            v.push(&mut b.deconv.weight.value);
            v.push(&mut b.bn.gamma.value);
            v.push(&mut b.bn.beta.value);
            v.push(&mut b.bn.running_mean);
            v.push(&mut b.bn.running_var);
        }
        v.push(&mut self.head.weight.value);
        v.push(&mut self.head.bias.as_mut().expect("head bias").value);
        v
    }

    /// Weights as `VSAW`, version, tensor count, then each tensor as a length-prefixed f32 LE array.
    pub fn weights_bytes(&self) -> Vec<u8> {
        let mut count = 0u32;
        self.for_each_tensor(|_| count += 1);
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHTS_MAGIC);
        out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        self.for_each_tensor(|t| {
            out.extend_from_slice(&(t.len() as u32).to_le_bytes());
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        });
        out
    }

    fn load_weights(&mut self, bytes: &[u8]) -> Result<()> {
        let corrupt = |m: &str| Error::CorruptBundle(m.to_string());
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes
                .get(pos..pos + n)
                .ok_or_else(|| corrupt("weights truncated"))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != WEIGHTS_MAGIC {
            return Err(corrupt("bad weights magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != WEIGHTS_VERSION {
            return Err(corrupt("unsupported weights version"));
        }
        let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut tensors = self.tensors_mut();
        if count != tensors.len() {
            return Err(corrupt("tensor count does not match architecture"));
        }
        for t in tensors.iter_mut() {
            let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            if len != t.len() {
                return Err(corrupt("tensor length does not match architecture"));
            }
            let raw = take(4 * len)?;
            for (v, chunk) in t.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        if pos != bytes.len() {
            return Err(corrupt("trailing bytes after weights"));
        }
        Ok(())
    }

    pub fn to_bundle(&self) -> ModelBundle {
        let weights = self.weights_bytes();
        let manifest = ModelManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            base_channels: self.config.base_channels,
            input_height: self.config.input_h,
            input_width: self.config.input_w,
            channel_progression: self.config.channel_progression.clone(),
            epochs_trained: self.epochs_trained,
            trained_frame_count: self.trained_frame_count,
            source_labels: self.source_labels.clone(),
            hflip_augmentation: self.config.hflip_augmentation,
            multires_augmentation: self.config.multires_augmentation,
            weights_digest: weights_digest(&weights),
            multires_scales: self.config.multires_scales.clone(),
            batchnorm_eps: BN_EPS,
            batchnorm_momentum: BN_MOMENTUM,
            weight_init: "he_normal(fan_in)".into(),
            optimizer: "adam(beta1=0.9,beta2=0.999,eps=1e-8)".into(),
            seed: self.seed,
        };
        ModelBundle { weights, manifest }
    }

    pub fn from_bundle(bundle: &ModelBundle) -> Result<Self> {
        bundle.verify()?;
        let m = &bundle.manifest;
        let config = AutoencoderConfig {
            base_channels: m.base_channels,
            channel_progression: m.channel_progression.clone(),
            input_h: m.input_height,
            input_w: m.input_width,
            hflip_augmentation: m.hflip_augmentation,
            multires_augmentation: m.multires_augmentation,
            multires_scales: if m.multires_scales.is_empty() {
                AutoencoderConfig::new(1, 64, 64).multires_scales
            } else {
                m.multires_scales.clone()
            },
        };
        let mut model = VideoAutoencoder::build(config, m.seed)?;
        model.load_weights(&bundle.weights)?;
        model.epochs_trained = m.epochs_trained;
        model.trained_frame_count = m.trained_frame_count;
        model.source_labels = m.source_labels.clone();
        Ok(model)
    }

    pub(crate) fn batch_tensor(frames: &[&Frame]) -> Tensor {
        Self::frame_tensor(frames)
    }
}
