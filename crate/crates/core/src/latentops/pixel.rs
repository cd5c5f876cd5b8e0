use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::autoencoder::VideoAutoencoder;
use crate::error::{Error, Result};
use crate::ingest::Frame;
use crate::nn::resize_plane;

pub const DEFAULT_SEARCH_RADIUS: usize = 16;

/// Per-pixel hypercolumns: every encoder activation map resized to frame resolution and stacked.
///
/// `codes` is pixel-major: the `dim` features of pixel `(y, x)` start at `(y·width + x)·dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelCodeField {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub codes: Vec<f32>,
}

impl PixelCodeField {
    pub fn code(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.width + x) * self.dim;
        &self.codes[i..i + self.dim]
    }
}

pub fn pixel_codes(model: &VideoAutoencoder, frame: &Frame) -> Result<PixelCodeField> {
    let (h, w) = frame.dims();
    if !crate::ingest::is_model_compatible(h, w) {
        return Err(Error::shape(format!("frame {h}x{w} is not divisible by 64")));
    }
    let x = crate::nn::Tensor::from_vec(1, 3, h, w, frame.data().to_vec());
    let (_, acts) = model.encode_tensor(&x, true);
    let dim: usize = acts.iter().map(|a| a.c).sum();
    debug_assert_eq!(dim, model.config().pixel_code_dim());
    let plane = h * w;
    let mut codes = vec![0.0f32; plane * dim];
    let mut resized = vec![0.0f32; plane];
    let mut offset = 0;
    for a in &acts {
        for c in 0..a.c {
            let src = &a.data[c * a.h * a.w..(c + 1) * a.h * a.w];
            resize_plane(src, a.h, a.w, h, w, &mut resized);
            for (p, v) in resized.iter().enumerate() {
                codes[p * dim + offset + c] = *v;
            }
        }
        offset += a.c;
    }
    Ok(PixelCodeField {
        height: h,
        width: w,
        dim,
        codes,
    })
}

/// Dense matches from field A into field B. `None` marks pixels whose code is all zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowMap {
    pub height: usize,
    pub width: usize,
    pub flow: Vec<Option<(i32, i32)>>,
}

impl FlowMap {
    /// `(dx, dy)` for pixel `(y, x)`.
    pub fn at(&self, y: usize, x: usize) -> Option<(i32, i32)> {
        self.flow[y * self.width + x]
    }

    pub fn is_identity(&self) -> bool {
        self.flow.iter().all(|f| matches!(f, Some((0, 0)) | None))
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, ra) = a.split_at(a.len() - a.len() % 8);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(8).zip(cb.chunks_exact(8)) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f32 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f32>() + tail
}

fn normalized(field: &PixelCodeField) -> (Vec<f32>, Vec<bool>) {
    let mut out = field.codes.clone();
    let mut nonzero = vec![false; field.height * field.width];
    for (p, chunk) in out.chunks_mut(field.dim).enumerate() {
        let n = dot(chunk, chunk).sqrt();
        if n > 0.0 {
            chunk.iter_mut().for_each(|v| *v /= n);
            nonzero[p] = true;
        }
    }
    (out, nonzero)
}

/// For each pixel of A, the most cosine-similar pixel of B within `search_radius` (a square window).
/// Ties go to the smallest displacement.
pub fn correspond(a: &PixelCodeField, b: &PixelCodeField, search_radius: i64) -> Result<FlowMap> {
    if search_radius < 0 {
        return Err(Error::InvalidRadius(search_radius));
    }
    if (a.height, a.width, a.dim) != (b.height, b.width, b.dim) {
        return Err(Error::shape("pixel code fields differ in shape"));
    }
    let r = search_radius as i32;
    let mut offsets: Vec<(i32, i32)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .collect();
    offsets.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy.abs(), dx.abs(), dy, dx));
    let (na, za) = normalized(a);
    let (nb, zb) = normalized(b);
    let (h, w, d) = (a.height as i32, a.width as i32, a.dim);
    let mut flow = vec![None; a.height * a.width];
    for y in 0..h {
        for x in 0..w {
            let p = (y * w + x) as usize;
            if !za[p] {
                continue;
            }
            let qa = &na[p * d..(p + 1) * d];
            let mut best: Option<(f32, (i32, i32))> = None;
            for &(dx, dy) in &offsets {
                let (tx, ty) = (x + dx, y + dy);
                if tx < 0 || ty < 0 || tx >= w || ty >= h {
                    continue;
                }
                let q = (ty * w + tx) as usize;
                if !zb[q] {
                    continue;
                }
                let s = dot(qa, &nb[q * d..(q + 1) * d]);
                if best.map_or(true, |(bs, _)| s > bs) {
                    best = Some((s, (dx, dy)));
                }
            }
            flow[p] = best.map(|(_, f)| f);
        }
    }
    Ok(FlowMap {
        height: a.height,
        width: a.width,
        flow,
    })
}

/// Integer label image (0 = background).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u8>,
}

impl LabelMap {
    pub fn empty(height: usize, width: usize) -> Self {
        LabelMap {
            height,
            width,
            labels: vec![0; height * width],
        }
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn is_empty(&self) -> bool {
        self.labels.iter().all(|&l| l == 0)
    }

    /// Intersection over union of the pixels carrying `label`.
    pub fn iou(&self, other: &LabelMap, label: u8) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.labels.iter().zip(&other.labels) {
            let (ia, ib) = (*a == label, *b == label);
            inter += (ia && ib) as usize;
            union += (ia || ib) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let img = GrayImage::from_raw(self.width as u32, self.height as u32, self.labels.clone())
            .ok_or_else(|| Error::shape("label buffer does not match dimensions"))?;
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)?.to_luma8();
        let (w, h) = img.dimensions();
        Ok(LabelMap {
            height: h as usize,
            width: w as usize,
            labels: img.into_raw(),
        })
    }
}

/// Carries `mask0` forward frame by frame: each pixel of frame t+1 takes the label of its match in frame t.
/// The result has one map per frame, starting with `mask0`.
pub fn propagate_mask(
    model: &VideoAutoencoder,
    frames: &[Frame],
    mask0: &LabelMap,
    search_radius: usize,
) -> Result<Vec<LabelMap>> {
    propagate_mask_with_progress(model, frames, mask0, search_radius, |_, _| {})
}

/// [`propagate_mask`] reporting `(done, total)` after each frame.
pub fn propagate_mask_with_progress(
    model: &VideoAutoencoder,
    frames: &[Frame],
    mask0: &LabelMap,
    search_radius: usize,
    mut progress: impl FnMut(usize, usize),
) -> Result<Vec<LabelMap>> {
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    if first.dims() != (mask0.height, mask0.width) {
        return Err(Error::shape(format!(
            "mask {}x{} does not match frames {:?}",
            mask0.height,
            mask0.width,
            first.dims()
        )));
    }
    let mut out = vec![mask0.clone()];
    if mask0.is_empty() {
        for f in &frames[1..] {
            first.check_same(f)?;
            out.push(mask0.clone());
        }
        return Ok(out);
    }
    let mut prev_field = pixel_codes(model, first)?;
    for f in &frames[1..] {
        first.check_same(f)?;
        let field = pixel_codes(model, f)?;
        let flow = correspond(&field, &prev_field, search_radius as i64)?;
        let prev = out.last().unwrap();
        let mut next = LabelMap::empty(mask0.height, mask0.width);
        for y in 0..mask0.height {
            for x in 0..mask0.width {
                next.labels[y * mask0.width + x] = match flow.at(y, x) {
                    Some((dx, dy)) => prev.get((y as i32 + dy) as usize, (x as i32 + dx) as usize),
                    None => prev.get(y, x),
                };
            }
        }
        out.push(next);
        progress(out.len(), frames.len());
        prev_field = field;
    }
    Ok(out)
}
