//! Edits realized through latent similarity and reprojection: video textures,
//! patch removal and insertion, stitching, stretching and extrapolation.

use serde::{Deserialize, Serialize};

use crate::autoencoder::LatentCode;
use crate::error::{Error, Result};
use crate::ingest::{is_model_compatible, Axis, Frame, FrameSequence};
use crate::latentops::EmbeddingModel;
use crate::projection::{iterate_project, Reprojector};

/// One stop on a texture path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Waypoint {
    /// A single frame, by index.
    Frame(u32),
    /// An original run of frames, played from `from` to `to` (backwards if `to < from`).
    Range { from: u32, to: u32 },
    /// A point in the 2D embedding, resolved to the nearest frame.
    Point { x: f64, y: f64 },
}

fn default_bridge() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub waypoints: Vec<Waypoint>,
    #[serde(default = "default_bridge")]
    pub bridge_frames: usize,
    #[serde(default, rename = "loop")]
    pub looped: bool,
}

impl PathSpec {
    pub fn new(waypoints: Vec<Waypoint>, bridge_frames: usize, looped: bool) -> Self {
        PathSpec {
            waypoints,
            bridge_frames,
            looped,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "a path needs at least 2 waypoints, got {}",
                self.waypoints.len()
            )));
        }
        Ok(())
    }
}

/// One output slot of a texture: an original frame or an interpolated bridge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TextureStep {
    Original(usize),
    /// `alpha` weights `from`, the frame before the jump.
    Bridge { from: usize, to: usize, alpha: f32 },
}

fn resolve(
    wp: &Waypoint,
    n: usize,
    points: Option<&[(f64, f64)]>,
) -> Result<Vec<usize>> {
    let check = |i: u32| -> Result<usize> {
        if (i as usize) < n {
            Ok(i as usize)
        } else {
            Err(Error::InvalidPath(format!("frame {i} out of range (0..{n})")))
        }
    };
    match *wp {
        Waypoint::Frame(i) => Ok(vec![check(i)?]),
        Waypoint::Range { from, to } => {
            let (a, b) = (check(from)?, check(to)?);
            Ok(if a <= b {
                (a..=b).collect()
            } else {
                (b..=a).rev().collect()
            })
        }
        Waypoint::Point { x, y } => {
            let pts = points.ok_or(Error::NotFitted)?;
            let best = pts
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (a.1 .0 - x).powi(2) + (a.1 .1 - y).powi(2);
                    let db = (b.1 .0 - x).powi(2) + (b.1 .1 - y).powi(2);
                    da.total_cmp(&db).then(a.0.cmp(&b.0))
                })
                .ok_or_else(|| Error::InvalidPath("no frames to resolve a point against".into()))?;
            Ok(vec![best.0])
        }
    }
}

fn bridge(from: usize, to: usize, count: usize, out: &mut Vec<TextureStep>) {
    for j in 1..=count {
        out.push(TextureStep::Bridge {
            from,
            to,
            alpha: 1.0 - j as f32 / (count + 1) as f32,
        });
    }
}

/// Lays out a texture over `n` frames without decoding anything.
///
/// `points` are the embedding coordinates of the frames, needed only for point waypoints.
pub fn texture_plan(path: &PathSpec, n: usize, points: Option<&[(f64, f64)]>) -> Result<Vec<TextureStep>> {
    path.validate()?;
    let segments: Vec<Vec<usize>> = path
        .waypoints
        .iter()
        .map(|w| resolve(w, n, points))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            let prev = *segments[i - 1].last().expect("segments are nonempty");
            bridge(prev, seg[0], path.bridge_frames, &mut out);
        }
        out.extend(seg.iter().map(|&f| TextureStep::Original(f)));
    }
    if path.looped {
        let last = *segments.last().unwrap().last().unwrap();
        bridge(last, segments[0][0], path.bridge_frames, &mut out);
    }
    Ok(out)
}

/// Concatenates reconstructed segments with latent-interpolated bridges at every jump.
pub fn make_texture<M: Reprojector + ?Sized>(
    model: &M,
    codes: &[LatentCode],
    path: &PathSpec,
    embedding: Option<&EmbeddingModel>,
) -> Result<FrameSequence> {
    let points = match embedding {
        Some(em) => Some(
            codes
                .iter()
                .map(|c| em.coords(c))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let plan = texture_plan(path, codes.len(), points.as_deref())?;
    let mut frames = Vec::with_capacity(plan.len());
    for step in plan {
        let code = match step {
            TextureStep::Original(i) => codes[i].clone(),
            TextureStep::Bridge { from, to, alpha } => codes[from].lerp(&codes[to], alpha)?,
        };
        frames.push(model.decode(&code)?);
    }
    FrameSequence::new(frames, "texture")
}

fn cosine(a: &LatentCode, b: &LatentCode) -> f64 {
    let d = a.norm() * b.norm();
    if d == 0.0 {
        0.0
    } else {
        a.dot(b) / d
    }
}

/// Frames ranked by cosine similarity of their codes to `query`, most similar first.
/// Frames within `min_gap` positions of the query (and the query itself) are excluded.
pub fn nearest_frames_excluding(
    codes: &[LatentCode],
    query: usize,
    top_k: i64,
    min_gap: usize,
) -> Result<Vec<(u32, f64)>> {
    if top_k <= 0 {
        return Err(Error::InvalidK(format!("top_k must be positive, got {top_k}")));
    }
    let q = codes.get(query).ok_or(Error::UnknownFrame(query as u32))?;
    let mut ranked: Vec<(u32, f64)> = codes
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(query) > min_gap && *i != query)
        .map(|(i, c)| Ok((i as u32, cosine(q, c))))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(top_k as usize);
    Ok(ranked)
}

/// [`nearest_frames_excluding`] with only the query itself excluded.
pub fn nearest_frames(codes: &[LatentCode], query: usize, top_k: i64) -> Result<Vec<(u32, f64)>> {
    nearest_frames_excluding(codes, query, top_k, 0)
}

/// Pixel rectangle, `(x, y)` top-left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    fn check_inside(&self, height: usize, width: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 || self.x + self.w > width || self.y + self.h > height {
            return Err(Error::InvalidRect(format!(
                "{self:?} outside {height}x{width} frame"
            )));
        }
        Ok(())
    }
}

/// Copy `src_rect` (from `src_frame_id`, or the edited frame itself) onto `dst_rect`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchEdit {
    pub src_rect: Rect,
    pub dst_rect: Rect,
    #[serde(default)]
    pub src_frame_id: Option<u32>,
}

impl PatchEdit {
    pub fn new(src_rect: Rect, dst_rect: Rect) -> Self {
        PatchEdit {
            src_rect,
            dst_rect,
            src_frame_id: None,
        }
    }
}

/// Applies the raw copy-paste edits in order, without reprojection.
pub fn apply_edits(frame: &Frame, edits: &[PatchEdit], library: Option<&FrameSequence>) -> Result<Frame> {
    let mut out = frame.clone();
    for e in edits {
        if (e.src_rect.w, e.src_rect.h) != (e.dst_rect.w, e.dst_rect.h) {
            return Err(Error::InvalidRect(format!(
                "source {}x{} and destination {}x{} differ in size",
                e.src_rect.w, e.src_rect.h, e.dst_rect.w, e.dst_rect.h
            )));
        }
        e.dst_rect.check_inside(frame.height(), frame.width())?;
        let src = match e.src_frame_id {
            None => frame,
            Some(id) => {
                let lib = library.ok_or(Error::UnknownFrame(id))?;
                let pos = lib
                    .frame_ids()
                    .iter()
                    .position(|&f| f == id)
                    .ok_or(Error::UnknownFrame(id))?;
                &lib.frames()[pos]
            }
        };
        e.src_rect.check_inside(src.height(), src.width())?;
        out.paste(
            src,
            (e.src_rect.y, e.src_rect.x),
            (e.dst_rect.y, e.dst_rect.x),
            (e.src_rect.h, e.src_rect.w),
        )?;
    }
    Ok(out)
}

/// Raw copy-paste followed by `n` reprojections.
pub fn patch_edit_project<M: Reprojector + ?Sized>(
    model: &M,
    frame: &Frame,
    edits: &[PatchEdit],
    library: Option<&FrameSequence>,
    n: usize,
) -> Result<Frame> {
    iterate_project(model, &apply_edits(frame, edits, library)?, n)
}

/// Concatenates frames along `axis` and reprojects the result.
pub fn stitch<M: Reprojector + ?Sized>(model: &M, frames: &[Frame], axis: Axis, n: usize) -> Result<Frame> {
    let joined = Frame::concat(frames, axis)?;
    if !is_model_compatible(joined.height(), joined.width()) {
        return Err(Error::shape(format!(
            "stitched size {}x{} is not divisible by 64",
            joined.height(),
            joined.width()
        )));
    }
    iterate_project(model, &joined, n)
}

/// Horizontal bilinear resample to `target_w`, then `n` reprojections.
pub fn stretch<M: Reprojector + ?Sized>(model: &M, frame: &Frame, target_w: usize, n: usize) -> Result<Frame> {
    if target_w % 64 != 0 || target_w < frame.width() {
        return Err(Error::InvalidTarget(format!(
            "stretch width {target_w} must be a multiple of 64 and at least {}",
            frame.width()
        )));
    }
    if frame.height() % 64 != 0 {
        return Err(Error::shape(format!("height {} is not divisible by 64", frame.height())));
    }
    iterate_project(model, &frame.resize_bilinear(frame.height(), target_w), n)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadMode {
    #[default]
    Mirror,
    Zero,
}

/// Pads to the target size (centered), then `n` reprojections.
pub fn extrapolate<M: Reprojector + ?Sized>(
    model: &M,
    frame: &Frame,
    target_h: usize,
    target_w: usize,
    pad: PadMode,
    n: usize,
) -> Result<Frame> {
    if !is_model_compatible(target_h, target_w) {
        return Err(Error::InvalidTarget(format!(
            "target {target_h}x{target_w} is not divisible by 64"
        )));
    }
    let padded = frame.pad_to(target_h, target_w, pad == PadMode::Mirror)?;
    iterate_project(model, &padded, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::LinearAutoencoder;

    fn code(v: &[f32]) -> LatentCode {
        LatentCode::new(v.len(), 1, 1, v.to_vec()).unwrap()
    }

    #[test]
    fn path_json_schema() {
        let p = PathSpec::from_json(r#"{"waypoints":[3,{"from":5,"to":2},{"x":0.5,"y":-1}],"loop":true}"#).unwrap();
        assert_eq!(p.bridge_frames, 1);
        assert!(p.looped);
        assert_eq!(p.waypoints[0], Waypoint::Frame(3));
        assert_eq!(p.waypoints[1], Waypoint::Range { from: 5, to: 2 });
        assert_eq!(p.waypoints[2], Waypoint::Point { x: 0.5, y: -1.0 });
        let back: PathSpec = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn single_bridge_is_midpoint() {
        let plan = texture_plan(&PathSpec::new(vec![Waypoint::Frame(1), Waypoint::Frame(7)], 1, false), 10, None).unwrap();
        assert_eq!(
            plan,
            vec![
                TextureStep::Original(1),
                TextureStep::Bridge { from: 1, to: 7, alpha: 0.5 },
                TextureStep::Original(7)
            ]
        );
    }

    #[test]
    fn plan_length_contract() {
        let p = PathSpec::new(
            vec![
                Waypoint::Range { from: 0, to: 4 },
                Waypoint::Range { from: 9, to: 6 },
                Waypoint::Frame(2),
            ],
            3,
            true,
        );
        let plan = texture_plan(&p, 10, None).unwrap();
        assert_eq!(plan.len(), 5 + 4 + 1 + 3 * 2 + 3);
        assert_eq!(plan[5], TextureStep::Bridge { from: 4, to: 9, alpha: 0.75 });
        assert_eq!(plan[8], TextureStep::Original(9));
        assert_eq!(*plan.last().unwrap(), TextureStep::Bridge { from: 2, to: 0, alpha: 0.25 });
    }

    #[test]
    fn invalid_paths() {
        assert!(matches!(
            texture_plan(&PathSpec::new(vec![], 1, false), 4, None),
            Err(Error::InvalidPath(_))
        ));
        assert!(matches!(
            texture_plan(&PathSpec::new(vec![Waypoint::Frame(0), Waypoint::Frame(4)], 1, false), 4, None),
            Err(Error::InvalidPath(_))
        ));
        assert!(matches!(
            texture_plan(
                &PathSpec::new(vec![Waypoint::Frame(0), Waypoint::Point { x: 0.0, y: 0.0 }], 1, false),
                4,
                None
            ),
            Err(Error::NotFitted)
        ));
    }

    #[test]
    fn points_resolve_to_nearest_frame() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (5.0, 5.0)];
        let p = PathSpec::new(vec![Waypoint::Point { x: 4.0, y: 4.5 }, Waypoint::Point { x: 0.9, y: 1.2 }], 0, false);
        assert_eq!(
            texture_plan(&p, 3, Some(&pts)).unwrap(),
            vec![TextureStep::Original(2), TextureStep::Original(1)]
        );
    }

    #[test]
    fn nearest_frames_ranking() {
        let codes = vec![code(&[1.0, 0.0]), code(&[0.0, 1.0]), code(&[1.0, 0.1]), code(&[1.0, 0.0])];
        let r = nearest_frames(&codes, 0, 3).unwrap();
        assert_eq!(r[0].0, 3);
        assert!((r[0].1 - 1.0).abs() < 1e-12);
        let mut ids: Vec<u32> = r.iter().map(|x| x.0).collect();
        ids.sort();
        assert_eq!(ids, vec![1, 2, 3]);
        assert!(matches!(nearest_frames(&codes, 0, 0), Err(Error::InvalidK(_))));
        assert!(matches!(nearest_frames(&codes, 9, 1), Err(Error::UnknownFrame(9))));
        let masked = nearest_frames_excluding(&codes, 0, 5, 2).unwrap();
        assert_eq!(masked.iter().map(|x| x.0).collect::<Vec<_>>(), vec![3]);
    }

    proptest::proptest! {
        #[test]
        fn similarity_is_symmetric(a in proptest::collection::vec(-1.0f32..1.0, 6), b in proptest::collection::vec(-1.0f32..1.0, 6)) {
            let codes = vec![code(&a), code(&b)];
            let ab = nearest_frames(&codes, 0, 1).unwrap()[0].1;
            let ba = nearest_frames(&codes, 1, 1).unwrap()[0].1;
            proptest::prop_assert!((ab - ba).abs() < 1e-6);
        }
    }

    fn lin() -> (LinearAutoencoder, Vec<Frame>) {
        let frames: Vec<Frame> = (0..6)
            .map(|i| Frame::from_fn(64, 64, |y, x| {
                let v = 0.5 + 0.3 * (((x + 3 * i) as f32) * 0.2).sin() * ((y as f32) * 0.1).cos();
                [v, 0.5, 1.0 - v]
            }))
            .collect();
        (LinearAutoencoder::fit(&frames, 3).unwrap(), frames)
    }

    #[test]
    fn patch_edits() {
        let (m, frames) = lin();
        let f = &frames[0];
        let plain = iterate_project(&m, f, 2).unwrap();
        assert_eq!(patch_edit_project(&m, f, &[], None, 2).unwrap(), plain);
        let r = Rect::new(4, 4, 8, 8);
        let identity = PatchEdit::new(r, r);
        assert_eq!(patch_edit_project(&m, f, &[identity], None, 2).unwrap(), plain);
        let oob = PatchEdit::new(r, Rect::new(60, 0, 8, 8));
        assert!(matches!(patch_edit_project(&m, f, &[oob], None, 2), Err(Error::InvalidRect(_))));
        let uneven = PatchEdit::new(r, Rect::new(0, 0, 4, 8));
        assert!(matches!(apply_edits(f, &[uneven], None), Err(Error::InvalidRect(_))));

        let lib = FrameSequence::new(frames.clone(), "lib").unwrap();
        let mut insert = PatchEdit::new(Rect::new(0, 0, 16, 16), Rect::new(20, 20, 16, 16));
        insert.src_frame_id = Some(3);
        let pasted = apply_edits(f, &[insert.clone()], Some(&lib)).unwrap();
        assert_eq!(pasted.get(1, 20, 20), frames[3].get(1, 0, 0));
        insert.src_frame_id = Some(42);
        assert!(matches!(apply_edits(f, &[insert], Some(&lib)), Err(Error::UnknownFrame(42))));
    }

    #[test]
    fn geometry_edits_validate_targets() {
        let (m, frames) = lin();
        let f = &frames[1];
        assert!(matches!(stretch(&m, f, 96, 1), Err(Error::InvalidTarget(_))));
        assert!(matches!(stretch(&m, f, 32, 1), Err(Error::InvalidTarget(_))));
        assert!(matches!(extrapolate(&m, f, 32, 64, PadMode::Mirror, 1), Err(Error::InvalidTarget(_))));
        assert!(matches!(extrapolate(&m, f, 100, 64, PadMode::Zero, 1), Err(Error::InvalidTarget(_))));
        assert_eq!(stretch(&m, f, 64, 2).unwrap(), iterate_project(&m, f, 2).unwrap());
        assert_eq!(
            extrapolate(&m, f, 64, 64, PadMode::Mirror, 2).unwrap(),
            iterate_project(&m, f, 2).unwrap()
        );
        let wide = Frame::concat(&[f.clone(), f.clone()], Axis::Horizontal).unwrap();
        assert!(matches!(stitch(&m, &[f.clone(), f.clone()], Axis::Horizontal, 1), Err(Error::Shape(_))));
        assert_eq!(wide.dims(), (64, 128));
        let odd = Frame::filled(32, 64, 0.5);
        assert!(matches!(stitch(&m, &[f.clone(), odd], Axis::Vertical, 1), Err(Error::Shape(_))));
    }
}
