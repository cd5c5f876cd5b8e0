use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// An RGB frame with values in `[0, 1]`.
///
/// Pixels are stored planar (`channel, row, column`), row-major within each
/// plane, which is the layout the convolutional layers consume directly.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformMode {
    Bilinear,
    MirrorPad,
    ZeroPad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl Frame {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("frame dimensions must be positive"));
        }
        if data.len() != CHANNELS * height * width {
            return Err(Error::shape(format!(
                "expected {} values for a {height}x{width} frame, got {}",
                CHANNELS * height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::shape(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Frame {
            height,
            width,
            data,
        })
    }

    /// Builds a frame from arbitrary reals, clamping into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Frame::new(height, width, data)
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        assert!((0.0..=1.0).contains(&value));
        Frame {
            height,
            width,
            data: vec![value; CHANNELS * height * width],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Self {
        let plane = height * width;
        let mut data = vec![0.0; CHANNELS * plane];
        for y in 0..height {
            for x in 0..width {
                let px = f(y, x);
                for c in 0..CHANNELS {
                    data[c * plane + y * width + x] = px[c].clamp(0.0, 1.0);
                }
            }
        }
        Frame {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v.clamp(0.0, 1.0);
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let (w, h) = (w as usize, h as usize);
        let plane = w * h;
        let mut data = vec![0.0; CHANNELS * plane];
        for (i, px) in img.pixels().enumerate() {
            for c in 0..CHANNELS {
                data[c * plane + i] = px.0[c] as f32 / 255.0;
            }
        }
        Frame {
            height: h,
            width: w,
            data,
        }
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let plane = self.height * self.width;
        let mut img = RgbImage::new(self.width as u32, self.height as u32);
        for (i, px) in img.pixels_mut().enumerate() {
            for c in 0..CHANNELS {
                px.0[c] = quantize(self.data[c * plane + i]);
            }
        }
        img
    }

    /// Interleaved row-major RGB8 bytes.
    pub fn to_rgb8_bytes(&self) -> Vec<u8> {
        self.to_rgb8().into_raw()
    }

    pub fn from_rgb8_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        let img = RgbImage::from_raw(width as u32, height as u32, bytes.to_vec())
            .ok_or_else(|| Error::shape("rgb8 buffer does not match dimensions"))?;
        Ok(Frame::from_rgb8(&img))
    }

    /// Rounds every value to the nearest 8-bit level.
    pub fn quantized(&self) -> Frame {
        Frame {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .map(|&v| quantize(v) as f32 / 255.0)
                .collect(),
        }
    }

    /// Bilinear resampling with half-pixel centers. Same-size targets return an exact copy.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Frame {
        if (height, width) == self.dims() {
            return self.clone();
        }
        let sy = self.height as f32 / height as f32;
        let sx = self.width as f32 / width as f32;
        let xs: Vec<(usize, usize, f32)> = (0..width)
            .map(|x| sample_coord(x, sx, self.width))
            .collect();
        let plane = height * width;
        let mut data = vec![0.0; CHANNELS * plane];
        for y in 0..height {
            let (y0, y1, fy) = sample_coord(y, sy, self.height);
            for c in 0..CHANNELS {
                let src = self.plane(c);
                let r0 = &src[y0 * self.width..(y0 + 1) * self.width];
                let r1 = &src[y1 * self.width..(y1 + 1) * self.width];
                let dst = &mut data[c * plane + y * width..c * plane + (y + 1) * width];
                for (d, &(x0, x1, fx)) in dst.iter_mut().zip(&xs) {
                    let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                    let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
                    *d = (top + (bot - top) * fy).clamp(0.0, 1.0);
                }
            }
        }
        Frame {
            height,
            width,
            data,
        }
    }

    /// Averages non-overlapping `factor`×`factor` blocks. Dimensions must be divisible by `factor`.
    pub fn box_downsample(&self, factor: usize) -> Result<Frame> {
        if factor == 0 || self.height % factor != 0 || self.width % factor != 0 {
            return Err(Error::InvalidTarget(format!(
                "{}x{} is not divisible by factor {factor}",
                self.height, self.width
            )));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let (h, w) = (self.height / factor, self.width / factor);
        let norm = 1.0 / (factor * factor) as f32;
        let mut data = vec![0.0; CHANNELS * h * w];
        for c in 0..CHANNELS {
            let src = self.plane(c);
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for dy in 0..factor {
                        let row = (y * factor + dy) * self.width + x * factor;
                        acc += src[row..row + factor].iter().sum::<f32>();
                    }
                    data[(c * h + y) * w + x] = (acc * norm).clamp(0.0, 1.0);
                }
            }
        }
        Ok(Frame {
            height: h,
            width: w,
            data,
        })
    }

    /// Centers the frame in a larger canvas, filling margins by reflection or zeros.
    pub fn pad_to(&self, height: usize, width: usize, mirror: bool) -> Result<Frame> {
        if height < self.height || width < self.width {
            return Err(Error::InvalidTarget(format!(
                "pad target {height}x{width} is smaller than source {}x{}",
                self.height, self.width
            )));
        }
        let top = (height - self.height) / 2;
        let left = (width - self.width) / 2;
        let plane = height * width;
        let mut data = vec![0.0; CHANNELS * plane];
        for c in 0..CHANNELS {
            let src = self.plane(c);
            for y in 0..height {
                let sy = y as isize - top as isize;
                let sy = if mirror {
                    Some(reflect(sy, self.height))
                } else if sy >= 0 && (sy as usize) < self.height {
                    Some(sy as usize)
                } else {
                    None
                };
                let Some(sy) = sy else { continue };
                for x in 0..width {
                    let sx = x as isize - left as isize;
                    let v = if mirror {
                        src[sy * self.width + reflect(sx, self.width)]
                    } else if sx >= 0 && (sx as usize) < self.width {
                        src[sy * self.width + sx as usize]
                    } else {
                        0.0
                    };
                    data[c * plane + y * width + x] = v;
                }
            }
        }
        Ok(Frame {
            height,
            width,
            data,
        })
    }

    pub fn crop(&self, y: usize, x: usize, height: usize, width: usize) -> Result<Frame> {
        if y + height > self.height || x + width > self.width || height == 0 || width == 0 {
            return Err(Error::InvalidTarget(format!(
                "crop {height}x{width}+{y}+{x} outside {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(CHANNELS * height * width);
        for c in 0..CHANNELS {
            let src = self.plane(c);
            for row in y..y + height {
                data.extend_from_slice(&src[row * self.width + x..row * self.width + x + width]);
            }
        }
        Ok(Frame {
            height,
            width,
            data,
        })
    }

    pub fn hflip(&self) -> Frame {
        let mut out = self.clone();
        for c in 0..CHANNELS {
            for y in 0..self.height {
                let start = (c * self.height + y) * self.width;
                out.data[start..start + self.width].reverse();
            }
        }
        out
    }

    pub fn concat(frames: &[Frame], axis: Axis) -> Result<Frame> {
        let first = frames
            .first()
            .ok_or_else(|| Error::shape("cannot concatenate zero frames"))?;
        match axis {
            Axis::Horizontal => {
                if frames.iter().any(|f| f.height != first.height) {
                    return Err(Error::shape("horizontal concat requires equal heights"));
                }
                let width: usize = frames.iter().map(|f| f.width).sum();
                let h = first.height;
                let mut data = Vec::with_capacity(CHANNELS * h * width);
                for c in 0..CHANNELS {
                    for y in 0..h {
                        for f in frames {
                            let p = f.plane(c);
                            data.extend_from_slice(&p[y * f.width..(y + 1) * f.width]);
                        }
                    }
                }
                Ok(Frame {
                    height: h,
                    width,
                    data,
                })
            }
            Axis::Vertical => {
                if frames.iter().any(|f| f.width != first.width) {
                    return Err(Error::shape("vertical concat requires equal widths"));
                }
                let height: usize = frames.iter().map(|f| f.height).sum();
                let w = first.width;
                let mut data = Vec::with_capacity(CHANNELS * height * w);
                for c in 0..CHANNELS {
                    for f in frames {
                        data.extend_from_slice(f.plane(c));
                    }
                }
                Ok(Frame {
                    height,
                    width: w,
                    data,
                })
            }
        }
    }

    /// Copies a `h`×`w` block from `src` at (`sy`, `sx`) into `self` at (`dy`, `dx`).
    pub fn paste(
        &mut self,
        src: &Frame,
        (sy, sx): (usize, usize),
        (dy, dx): (usize, usize),
        (h, w): (usize, usize),
    ) -> Result<()> {
        if sy + h > src.height || sx + w > src.width || dy + h > self.height || dx + w > self.width
        {
            return Err(Error::InvalidRect("paste region out of bounds".into()));
        }
        let block = src.crop(sy, sx, h, w)?;
        for c in 0..CHANNELS {
            for row in 0..h {
                let s = &block.data[(c * h + row) * w..(c * h + row + 1) * w];
                let d = (c * self.height + dy + row) * self.width + dx;
                self.data[d..d + w].copy_from_slice(s);
            }
        }
        Ok(())
    }

    pub fn mse(&self, other: &Frame) -> Result<f64> {
        self.check_same(other)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let d = (*a - *b) as f64;
                d * d
            })
            .sum();
        Ok(sum / self.data.len() as f64)
    }

    pub fn mean_abs_diff(&self, other: &Frame) -> Result<f64> {
        self.check_same(other)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs() as f64)
            .sum();
        Ok(sum / self.data.len() as f64)
    }

    pub(crate) fn check_same(&self, other: &Frame) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "frame dims differ: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    /// Per-pixel mean of a set of equally sized frames.
    pub fn pixel_mean(frames: &[Frame]) -> Result<Frame> {
        let first = frames.first().ok_or(Error::EmptySelection)?;
        let mut acc = vec![0.0f64; first.data.len()];
        for f in frames {
            first.check_same(f)?;
            for (a, v) in acc.iter_mut().zip(&f.data) {
                *a += *v as f64;
            }
        }
        let n = frames.len() as f64;
        Frame::from_clamped(
            first.height,
            first.width,
            acc.into_iter().map(|a| (a / n) as f32).collect(),
        )
    }

    /// Mean squared finite-difference gradient magnitude, a simple sharpness measure.
    pub fn gradient_energy(&self) -> f64 {
        let (h, w) = self.dims();
        let mut acc = 0.0f64;
        let mut count = 0usize;
        for c in 0..CHANNELS {
            let p = self.plane(c);
            for y in 0..h {
                for x in 0..w {
                    let v = p[y * w + x] as f64;
                    if x + 1 < w {
                        let d = p[y * w + x + 1] as f64 - v;
                        acc += d * d;
                        count += 1;
                    }
                    if y + 1 < h {
                        let d = p[(y + 1) * w + x] as f64 - v;
                        acc += d * d;
                        count += 1;
                    }
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            acc / count as f64
        }
    }
}

pub(crate) fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
fn sample_coord(dst: usize, scale: f32, len: usize) -> (usize, usize, f32) {
    let src = ((dst as f32 + 0.5) * scale - 0.5).max(0.0);
    let i0 = (src.floor() as usize).min(len - 1);
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, src - i0 as f32)
}

/// Reflection without edge repetition, folded repeatedly for pads wider than the source.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// An ordered clip of equally sized frames.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    frame_ids: Vec<u32>,
    pub source_label: String,
    pub fps_hint: Option<f64>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, source_label: impl Into<String>) -> Result<Self> {
        let ids = (0..frames.len() as u32).collect();
        FrameSequence::with_ids(frames, ids, source_label)
    }

    pub fn with_ids(
        frames: Vec<Frame>,
        frame_ids: Vec<u32>,
        source_label: impl Into<String>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::NoFrames("sequence is empty".into()));
        }
        if frames.len() != frame_ids.len() {
            return Err(Error::shape("frame_ids length differs from frame count"));
        }
        if frame_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::shape("frame_ids must be strictly increasing"));
        }
        let dims = frames[0].dims();
        if let Some(f) = frames.iter().find(|f| f.dims() != dims) {
            return Err(Error::ResolutionMismatch {
                expected: dims,
                found: f.dims(),
                path: Default::default(),
            });
        }
        Ok(FrameSequence {
            frames,
            frame_ids,
            source_label: source_label.into(),
            fps_hint: None,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_ids(&self) -> &[u32] {
        &self.frame_ids
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    /// Resizes every frame with `conform`.
    pub fn conformed(&self, height: usize, width: usize, mode: ConformMode) -> Result<Self> {
        let frames = self
            .frames
            .iter()
            .map(|f| super::conform(f, height, width, mode))
            .collect::<Result<Vec<_>>>()?;
        let mut seq = FrameSequence::with_ids(frames, self.frame_ids.clone(), &self.source_label)?;
        seq.fps_hint = self.fps_hint;
        Ok(seq)
    }
}
