//! Manifold reprojection: `g(f(x))` and its iterates, super-resolution by
//! reprojection, sampling the manifold from the 2D embedding, and aligning
//! foreign videos.

use serde::Serialize;

use crate::autoencoder::{LatentCode, VideoAutoencoder};
use crate::error::{Error, Result};
use crate::ingest::{is_model_compatible, Frame, FrameSequence};
use crate::latentops::{EmbeddingModel, Point2D};

pub const DEFAULT_ITERATIONS: usize = 5;
pub const ALIGN_ITERATIONS: usize = 25;
pub const STRETCH_ITERATIONS: usize = 30;

/// Anything with an encoder `f` and decoder `g` over frames.
pub trait Reprojector {
    fn encode(&self, frame: &Frame) -> Result<LatentCode>;
    fn decode(&self, code: &LatentCode) -> Result<Frame>;
}

impl Reprojector for VideoAutoencoder {
    fn encode(&self, frame: &Frame) -> Result<LatentCode> {
        VideoAutoencoder::encode(self, frame)
    }

    fn decode(&self, code: &LatentCode) -> Result<Frame> {
        VideoAutoencoder::decode(self, code)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionStep {
    pub frame: Frame,
    pub code: LatentCode,
    pub point: Option<Point2D>,
}

/// Per-iteration outputs of an iterated projection; `residuals[i]` is the
/// squared L2 change of step `i` relative to its input.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProjectionTrace {
    pub iterations: Vec<ProjectionStep>,
    pub residuals: Vec<f64>,
}

#[derive(Serialize)]
struct TraceJson<'a> {
    residuals: &'a [f64],
    points: Vec<Option<[f64; 2]>>,
}

impl ProjectionTrace {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(TraceJson {
            residuals: &self.residuals,
            points: self
                .iterations
                .iter()
                .map(|s| s.point.as_ref().map(|p| [p.x, p.y]))
                .collect(),
        })
        .expect("trace serializes")
    }

    /// Attaches 2D coordinates to every recorded step.
    pub fn embed_with(&mut self, em: &EmbeddingModel, frame_id: u32, label: &str) -> Result<()> {
        for s in &mut self.iterations {
            s.point = Some(em.embed(&s.code, frame_id, label)?);
        }
        Ok(())
    }
}

fn check_dims(frame: &Frame) -> Result<()> {
    if !is_model_compatible(frame.height(), frame.width()) {
        return Err(Error::shape(format!(
            "{}x{} is not divisible by 64",
            frame.height(),
            frame.width()
        )));
    }
    Ok(())
}

/// `Project₀(x) = g(f(x))`.
pub fn project<M: Reprojector + ?Sized>(model: &M, frame: &Frame) -> Result<Frame> {
    model.decode(&model.encode(frame)?)
}

/// `Projectₙ`: `n`-fold composition of [`project`]; `n = 0` returns the input.
pub fn iterate_project<M: Reprojector + ?Sized>(model: &M, frame: &Frame, n: usize) -> Result<Frame> {
    let mut cur = frame.clone();
    for _ in 0..n {
        cur = project(model, &cur)?;
    }
    Ok(cur)
}

/// Signed-count variant for callers that take user input.
pub fn iterate_project_checked<M: Reprojector + ?Sized>(model: &M, frame: &Frame, n: i64) -> Result<Frame> {
    if n < 0 {
        return Err(Error::InvalidIterations(n));
    }
    iterate_project(model, frame, n as usize)
}

pub fn iterate_project_traced<M: Reprojector + ?Sized>(
    model: &M,
    frame: &Frame,
    n: usize,
) -> Result<(Frame, ProjectionTrace)> {
    let mut trace = ProjectionTrace::default();
    let mut cur = frame.clone();
    for _ in 0..n {
        let code = model.encode(&cur)?;
        let next = model.decode(&code)?;
        trace.residuals.push(next.mse(&cur)? * next.data().len() as f64);
        trace.iterations.push(ProjectionStep {
            frame: next.clone(),
            code,
            point: None,
        });
        cur = next;
    }
    Ok((cur, trace))
}

/// Bilinear upsample to the target size, then `n` reprojections.
pub fn spatial_superres<M: Reprojector + ?Sized>(
    model: &M,
    lowres: &Frame,
    target_h: usize,
    target_w: usize,
    n: usize,
) -> Result<Frame> {
    if !is_model_compatible(target_h, target_w) {
        return Err(Error::shape(format!(
            "target {target_h}x{target_w} is not divisible by 64"
        )));
    }
    let up = lowres.resize_bilinear(target_h, target_w);
    iterate_project(model, &up, n)
}

/// Box-downsample by `factor`, then bilinear back to the original size: the evaluation degradation.
pub fn degrade(frame: &Frame, factor: usize) -> Result<Frame> {
    let (h, w) = frame.dims();
    Ok(frame.box_downsample(factor)?.resize_bilinear(h, w))
}

/// Decodes 2D embedding points back through the PCA basis.
pub fn sample_manifold<M: Reprojector + ?Sized>(
    model: &M,
    em: Option<&EmbeddingModel>,
    points: &[(f64, f64)],
) -> Result<Vec<Frame>> {
    let em = em.ok_or(Error::NotFitted)?;
    points
        .iter()
        .map(|&(x, y)| model.decode(&em.back_project(x, y)))
        .collect()
}

/// Iteratively reprojects every frame of an unseen video, keeping each trace.
pub fn align_foreign<M: Reprojector + ?Sized>(
    model: &M,
    foreign: &FrameSequence,
    n: usize,
) -> Result<(FrameSequence, Vec<ProjectionTrace>)> {
    let mut outs = Vec::with_capacity(foreign.len());
    let mut traces = Vec::with_capacity(foreign.len());
    for f in foreign.frames() {
        check_dims(f)?;
        let (out, trace) = iterate_project_traced(model, f, n)?;
        outs.push(out);
        traces.push(trace);
    }
    let mut seq = FrameSequence::with_ids(outs, foreign.frame_ids().to_vec(), &foreign.source_label)?;
    seq.fps_hint = foreign.fps_hint;
    Ok((seq, traces))
}

/// A linear autoencoder learned by PCA: `f(x) = Uᵀ(x − μ)`, `g(z) = μ + Uz`.
///
/// Its reprojection is an orthogonal projection onto an affine subspace, so it
/// is idempotent: iterating changes nothing after the first step.
#[derive(Clone, Debug)]
pub struct LinearAutoencoder {
    height: usize,
    width: usize,
    pca: crate::latentops::Pca,
}

impl LinearAutoencoder {
    pub fn fit(frames: &[Frame], components: usize) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InsufficientData("no frames".into()))?;
        if components == 0 || components >= frames.len() {
            return Err(Error::InsufficientData(format!(
                "{components} components from {} frames",
                frames.len()
            )));
        }
        let rows: Vec<Vec<f64>> = frames
            .iter()
            .map(|f| {
                first.check_same(f)?;
                Ok(f.data().iter().map(|&v| v as f64).collect())
            })
            .collect::<Result<_>>()?;
        Ok(LinearAutoencoder {
            height: first.height(),
            width: first.width(),
            pca: crate::latentops::pca_fit(&rows, components),
        })
    }

    pub fn project_f64(&self, x: &[f64]) -> Vec<f64> {
        self.pca.reconstruct(&self.pca.project(x))
    }
}

impl Reprojector for LinearAutoencoder {
    fn encode(&self, frame: &Frame) -> Result<LatentCode> {
        if frame.dims() != (self.height, self.width) {
            return Err(Error::shape("linear autoencoder input size mismatch"));
        }
        let x: Vec<f64> = frame.data().iter().map(|&v| v as f64).collect();
        let z: Vec<f32> = self.pca.project(&x).into_iter().map(|v| v as f32).collect();
        let n = z.len();
        let mut code = LatentCode::new(n, 1, 1, z)?;
        code.source_shape = frame.dims();
        Ok(code)
    }

    fn decode(&self, code: &LatentCode) -> Result<Frame> {
        let z: Vec<f64> = code.values.iter().map(|&v| v as f64).collect();
        let x = self.pca.reconstruct(&z);
        Frame::from_clamped(self.height, self.width, x.into_iter().map(|v| v as f32).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn low_rank_frames(n: usize, seed: u64) -> Vec<Frame> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis: Vec<Frame> = (0..3)
            .map(|k| {
                Frame::from_fn(8, 8, move |y, x| {
                    let v = 0.5 + 0.5 * ((x + 2 * y + 5 * k) as f32 * 0.4).sin();
                    [v, 1.0 - v, 0.5]
                })
            })
            .collect();
        (0..n)
            .map(|_| {
                let w: Vec<f32> = (0..3).map(|_| rng.gen_range(-0.1..0.1)).collect();
                let data: Vec<f32> = (0..basis[0].data().len())
                    .map(|i| 0.5 + basis.iter().zip(&w).map(|(b, c)| c * (b.data()[i] - 0.5)).sum::<f32>())
                    .collect();
                Frame::new(8, 8, data).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_iterations_return_input() {
        let frames = low_rank_frames(10, 0);
        let lin = LinearAutoencoder::fit(&frames, 3).unwrap();
        assert_eq!(iterate_project(&lin, &frames[0], 0).unwrap(), frames[0]);
        assert!(matches!(
            iterate_project_checked(&lin, &frames[0], -1),
            Err(Error::InvalidIterations(-1))
        ));
    }

    #[test]
    fn linear_projection_is_idempotent() {
        let frames = low_rank_frames(12, 1);
        let lin = LinearAutoencoder::fit(&frames, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let x = Frame::from_fn(8, 8, |_, _| {
                let v = rng.gen_range(0.3..0.7);
                [v, v, v]
            });
            let p0 = project(&lin, &x).unwrap();
            let p1 = iterate_project(&lin, &x, 2).unwrap();
            let scale = p0.data().iter().map(|v| v.abs()).fold(0.0f32, f32::max);
            let diff = p0
                .data()
                .iter()
                .zip(p1.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(diff <= 1e-5 * scale, "{diff}");
        }
    }

    #[test]
    fn trace_records_every_step() {
        let frames = low_rank_frames(6, 3);
        let lin = LinearAutoencoder::fit(&frames, 2).unwrap();
        let (out, trace) = iterate_project_traced(&lin, &frames[0], 4).unwrap();
        assert_eq!(trace.iterations.len(), 4);
        assert_eq!(trace.residuals.len(), 4);
        assert!(trace.residuals.iter().all(|r| *r >= 0.0));
        assert_eq!(&trace.iterations[3].frame, &out);
        assert!(trace.to_json()["residuals"].as_array().unwrap().len() == 4);
    }

    #[test]
    fn sample_manifold_requires_embedding() {
        let frames = low_rank_frames(6, 3);
        let lin = LinearAutoencoder::fit(&frames, 2).unwrap();
        assert!(matches!(
            sample_manifold(&lin, None, &[(0.0, 0.0)]),
            Err(Error::NotFitted)
        ));
    }
}
