//! Procedural test clips: static backgrounds with crisp moving sprites,
//! rendered at arbitrary (fractional) times so ground-truth in-between frames exist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{Frame, FrameSequence};

const SUPERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Disc,
    Square,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sprite {
    pub shape: Shape,
    /// Radius for discs, half side for squares.
    pub size: f64,
    pub outer: [f32; 3],
    pub inner: [f32; 3],
}

impl Sprite {
    /// Color at offset `(dy, dx)` from the center, if covered.
    fn sample(&self, dy: f64, dx: f64) -> Option<[f32; 3]> {
        let r = match self.shape {
            Shape::Disc => (dx * dx + dy * dy).sqrt(),
            Shape::Square => dx.abs().max(dy.abs()),
        };
        if r > self.size {
            None
        } else if r < 0.5 * self.size && dx > -0.15 * self.size {
            Some(self.inner)
        } else {
            Some(self.outer)
        }
    }

    fn covers(&self, dy: f64, dx: f64) -> bool {
        self.sample(dy, dx).is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    /// `start + t·velocity`, positions as `(y, x)`.
    Linear { start: (f64, f64), velocity: (f64, f64) },
    /// Closed orbit with the given period in frames.
    Orbit { center: (f64, f64), radius: (f64, f64), period: f64 },
    /// Constant speed, reflecting off the box `lo..=hi` on each axis.
    Bounce {
        start: (f64, f64),
        velocity: (f64, f64),
        lo: (f64, f64),
        hi: (f64, f64),
    },
}

fn reflect(p: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let m = (p - lo).rem_euclid(2.0 * span);
    lo + if m > span { 2.0 * span - m } else { m }
}

impl Motion {
    pub fn position(&self, t: f64) -> (f64, f64) {
        match *self {
            Motion::Linear { start, velocity } => (start.0 + t * velocity.0, start.1 + t * velocity.1),
            Motion::Orbit { center, radius, period } => {
                let a = std::f64::consts::TAU * t / period;
                (center.0 + radius.0 * a.sin(), center.1 + radius.1 * a.cos())
            }
            Motion::Bounce { start, velocity, lo, hi } => (
                reflect(start.0 + t * velocity.0, lo.0, hi.0),
                reflect(start.1 + t * velocity.1, lo.1, hi.1),
            ),
        }
    }
}

/// A sprite moving over a fixed background.
#[derive(Clone, Debug)]
pub struct SpriteScene {
    pub background: Frame,
    pub sprite: Sprite,
    pub motion: Motion,
}

impl SpriteScene {
    pub fn height(&self) -> usize {
        self.background.height()
    }

    pub fn width(&self) -> usize {
        self.background.width()
    }

    /// Renders time `t` with supersampled sprite edges, quantized to 8 bits.
    pub fn render(&self, t: f64) -> Frame {
        let (cy, cx) = self.motion.position(t);
        let mut out = self.background.clone();
        let reach = self.sprite.size * std::f64::consts::SQRT_2 + 2.0;
        let (h, w) = out.dims();
        let y0 = (cy - reach).floor().max(0.0) as usize;
        let y1 = ((cy + reach).ceil().max(0.0) as usize).min(h);
        let x0 = (cx - reach).floor().max(0.0) as usize;
        let x1 = ((cx + reach).ceil().max(0.0) as usize).min(w);
        let n = (SUPERSAMPLE * SUPERSAMPLE) as f32;
        for y in y0..y1 {
            for x in x0..x1 {
                let mut acc = [0.0f32; 3];
                let mut hits = 0.0f32;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let py = y as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                        let px = x as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                        if let Some(c) = self.sprite.sample(py - cy - 0.5, px - cx - 0.5) {
                            for k in 0..3 {
                                acc[k] += c[k];
                            }
                            hits += 1.0;
                        }
                    }
                }
                if hits == 0.0 {
                    continue;
                }
                for (k, a) in acc.iter().enumerate() {
                    let bg = out.get(k, y, x);
                    out.set(k, y, x, (a + bg * (n - hits)) / n);
                }
            }
        }
        out.quantized()
    }

    /// Binary sprite mask at time `t` (pixel centers), label 1.
    pub fn mask(&self, t: f64) -> Vec<u8> {
        let (cy, cx) = self.motion.position(t);
        let (h, w) = self.background.dims();
        let mut m = vec![0u8; h * w];
        for y in 0..h {
            for x in 0..w {
                if self.sprite.covers(y as f64 - cy, x as f64 - cx) {
                    m[y * w + x] = 1;
                }
            }
        }
        m
    }

    /// Frames at integer times `0..n`.
    pub fn sequence(&self, n: usize, label: &str) -> Result<FrameSequence> {
        FrameSequence::new((0..n).map(|t| self.render(t as f64)).collect(), label)
    }
}

/// Color scheme for a background.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Palette {
    pub base_top: [f32; 3],
    pub base_bottom: [f32; 3],
    pub hue: f32,
}

impl Palette {
    pub fn warm() -> Self {
        Palette {
            base_top: [0.85, 0.75, 0.55],
            base_bottom: [0.55, 0.35, 0.25],
            hue: 0.0,
        }
    }

    pub fn cool() -> Self {
        Palette {
            base_top: [0.35, 0.55, 0.8],
            base_bottom: [0.1, 0.2, 0.4],
            hue: 0.33,
        }
    }

    pub fn green() -> Self {
        Palette {
            base_top: [0.6, 0.85, 0.5],
            base_bottom: [0.15, 0.4, 0.15],
            hue: 0.66,
        }
    }
}

fn hue_color(h: f32, light: f32) -> [f32; 3] {
    let f = |n: f32| {
        let k = (n + h * 6.0) % 6.0;
        light - 0.35 * (k.min(4.0 - k).clamp(0.0, 1.0) * 2.0 - 1.0).max(-1.0)
    };
    [f(5.0).clamp(0.0, 1.0), f(3.0).clamp(0.0, 1.0), f(1.0).clamp(0.0, 1.0)]
}

/// Vertical gradient with a few flat, sharp-edged rectangles.
pub fn background(height: usize, width: usize, palette: Palette, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rects: Vec<(usize, usize, usize, usize, [f32; 3])> = (0..6)
        .map(|_| {
            let rh = rng.gen_range(height / 8..height / 3);
            let rw = rng.gen_range(width / 10..width / 4);
            let y = rng.gen_range(0..height - rh);
            let x = rng.gen_range(0..width - rw);
            let c = hue_color(palette.hue + rng.gen_range(-0.12..0.12), rng.gen_range(0.4..0.65));
            (y, x, rh, rw, c)
        })
        .collect();
    Frame::from_fn(height, width, |y, x| {
        let t = y as f32 / (height.max(2) - 1) as f32;
        let mut px = [0.0; 3];
        for k in 0..3 {
            px[k] = palette.base_top[k] * (1.0 - t) + palette.base_bottom[k] * t;
        }
        for &(ry, rx, rh, rw, c) in &rects {
            if y >= ry && y < ry + rh && x >= rx && x < rx + rw {
                px = c;
            }
        }
        px
    })
    .quantized()
}

/// Gradient under a tile grid: 16 px tiles, 2 px grout, alternating tile tones.
/// Every period divides 64, the total stride of the autoencoder.
pub fn tiled_background(height: usize, width: usize, palette: Palette, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tone = hue_color(palette.hue + rng.gen_range(-0.05..0.05), 0.55);
    Frame::from_fn(height, width, |y, x| {
        let t = y as f32 / (height.max(2) - 1) as f32;
        let grout = y % 16 < 2 || x % 16 < 2;
        let dark = ((y / 16) + (x / 16)) % 2 == 1;
        let mut px = [0.0; 3];
        for k in 0..3 {
            let base = palette.base_top[k] * (1.0 - t) + palette.base_bottom[k] * t;
            px[k] = if grout {
                0.25 * base
            } else if dark {
                0.7 * base + 0.3 * tone[k]
            } else {
                base
            };
        }
        px
    })
    .quantized()
}

/// The reference scene: a large two-tone disc bouncing over tiles at about 3 px per frame (at height 128).
pub fn desk_clip(height: usize, width: usize, seed: u64) -> SpriteScene {
    let size = height as f64 / 6.0;
    let margin = size + 2.0;
    let scale = height as f64 / 128.0;
    SpriteScene {
        background: tiled_background(height, width, Palette::warm(), seed),
        sprite: default_sprite(Shape::Disc, size),
        motion: Motion::Bounce {
            start: (margin + 3.0, margin + 5.0),
            velocity: (1.9 * scale, 2.6 * scale),
            lo: (margin, margin),
            hi: (height as f64 - margin, width as f64 - margin),
        },
    }
}

fn default_sprite(shape: Shape, size: f64) -> Sprite {
    Sprite {
        shape,
        size,
        outer: [0.95, 0.9, 0.2],
        inner: [0.1, 0.1, 0.45],
    }
}

/// Constant-velocity sprite crossing the frame diagonally over `frames` frames.
pub fn linear_clip(height: usize, width: usize, frames: usize, palette: Palette, seed: u64) -> SpriteScene {
    let size = height as f64 / 7.0;
    let start = (size + 4.0, size + 4.0);
    let end = (height as f64 - size - 4.0, width as f64 - size - 4.0);
    let steps = (frames.max(2) - 1) as f64;
    SpriteScene {
        background: background(height, width, palette, seed),
        sprite: default_sprite(Shape::Disc, size),
        motion: Motion::Linear {
            start,
            velocity: ((end.0 - start.0) / steps, (end.1 - start.1) / steps),
        },
    }
}

/// Sprite on a closed orbit: frames `t` and `t + period` are identical.
pub fn periodic_clip(height: usize, width: usize, period: f64, seed: u64) -> SpriteScene {
    let size = height as f64 / 7.0;
    SpriteScene {
        background: background(height, width, Palette::warm(), seed),
        sprite: default_sprite(Shape::Disc, size),
        motion: Motion::Orbit {
            center: (height as f64 / 2.0, width as f64 / 2.0),
            radius: (height as f64 / 2.0 - size - 4.0, width as f64 / 2.0 - size - 4.0),
            period,
        },
    }
}

/// Square sprite translating horizontally by `speed` px per frame.
pub fn square_clip(height: usize, width: usize, speed: f64, seed: u64) -> SpriteScene {
    let size = height as f64 / 8.0;
    SpriteScene {
        background: background(height, width, Palette::cool(), seed),
        sprite: default_sprite(Shape::Square, size),
        motion: Motion::Linear {
            start: (height as f64 / 2.0, size + 6.0),
            velocity: (0.0, speed),
        },
    }
}

/// Two shots with unrelated backgrounds and motion, `per_shot` frames each.
pub fn two_shot(height: usize, width: usize, per_shot: usize, seed: u64) -> Result<FrameSequence> {
    let a = linear_clip(height, width, per_shot, Palette::warm(), seed);
    let mut b = linear_clip(height, width, per_shot, Palette::cool(), seed + 1);
    if let Motion::Linear { start, velocity } = b.motion {
        b.motion = Motion::Linear {
            start: (height as f64 - start.0, start.1),
            velocity: (-velocity.0, velocity.1),
        };
    }
    b.sprite.shape = Shape::Square;
    let frames = (0..per_shot)
        .map(|t| a.render(t as f64))
        .chain((0..per_shot).map(|t| b.render(t as f64)))
        .collect();
    FrameSequence::new(frames, "two_shot")
}

/// Three visually distinct clips (different palettes, layouts and motion).
pub fn distinct_videos(height: usize, width: usize, frames: usize, seed: u64) -> Result<Vec<FrameSequence>> {
    let palettes = [Palette::warm(), Palette::cool(), Palette::green()];
    palettes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut scene = linear_clip(height, width, frames, *p, seed + 10 * i as u64);
            if i == 1 {
                scene.sprite.shape = Shape::Square;
            }
            scene.sequence(frames, &format!("video_{i}"))
        })
        .collect()
}

/// A strongly left-right asymmetric scene: a bright wall on the left, dark ramp to the right.
pub fn asymmetric_clip(height: usize, width: usize, frames: usize, seed: u64) -> SpriteScene {
    let mut scene = linear_clip(height, width, frames, Palette::warm(), seed);
    let wall = width / 4;
    scene.background = Frame::from_fn(height, width, |y, x| {
        if x < wall {
            if (y / 8) % 2 == 0 {
                [0.95, 0.95, 0.9]
            } else {
                [0.85, 0.2, 0.2]
            }
        } else {
            let t = (x - wall) as f32 / (width - wall) as f32;
            [0.5 - 0.4 * t, 0.45 - 0.35 * t, 0.6 - 0.4 * t]
        }
    })
    .quantized();
    if let Motion::Linear { start, velocity } = scene.motion {
        scene.motion = Motion::Linear {
            start: (start.0, wall as f64 + scene.sprite.size + 4.0),
            velocity: (velocity.0, velocity.1 * (width - wall) as f64 / width as f64 * 0.9),
        };
    }
    scene
}

/// Smooth random color texture, `period`-free, for correspondence tests.
pub fn texture(height: usize, width: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f32, f32, f32, usize)> = (0..18)
        .map(|i| {
            (
                rng.gen_range(-0.45..0.45),
                rng.gen_range(-0.45..0.45),
                rng.gen_range(0.0..std::f32::consts::TAU),
                i % 3,
            )
        })
        .collect();
    Frame::from_fn(height, width, |y, x| {
        let mut px = [0.5f32; 3];
        for &(fy, fx, ph, c) in &waves {
            px[c] += 0.12 * (fy * y as f32 + fx * x as f32 + ph).sin();
        }
        px
    })
    .quantized()
}

/// Shifts a frame right by `dx` pixels, replicating the left edge.
pub fn shift_right(frame: &Frame, dx: usize) -> Frame {
    Frame::from_fn(frame.height(), frame.width(), |y, x| {
        let sx = x.saturating_sub(dx);
        [frame.get(0, y, sx), frame.get(1, y, sx), frame.get(2, y, sx)]
    })
}
