use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::autoencoder::{LatentCode, VideoAutoencoder};
use crate::error::{Error, Result};
use crate::ingest::{
    list_frames, load_frames, load_model, ConformMode, FrameSequence, ModelManifest, MANIFEST_FILE,
};
use crate::latentops::{embed_all, fit_embedding, EmbeddingModel, Point2D};

pub const FRAMES_DIR: &str = "frames";
pub const MODEL_DIR: &str = "model";
const CODES_MAGIC: &[u8; 4] = b"VSAC";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub height: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VideoSummary {
    pub video_id: String,
    pub frame_count: usize,
    pub resolution: Resolution,
    pub trained: bool,
}

/// Lookup failures distinct from compute errors, so handlers can pick a status.
#[derive(Debug)]
pub enum Lookup {
    UnknownVideo(String),
    Untrained(String),
    Failed(Error),
}

impl From<Error> for Lookup {
    fn from(e: Error) -> Self {
        Lookup::Failed(e)
    }
}

/// A loaded bundle with its frames' latent codes.
pub struct Trained {
    pub digest: String,
    pub model: VideoAutoencoder,
    pub frames: FrameSequence,
    pub codes: Vec<LatentCode>,
    embedding: Mutex<Option<Arc<(EmbeddingModel, Vec<Point2D>)>>>,
}

impl Trained {
    /// Fitted once per bundle, then reused.
    pub fn embedding(&self) -> Result<Arc<(EmbeddingModel, Vec<Point2D>)>> {
        let mut slot = self.embedding.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(e) = slot.as_ref() {
            return Ok(e.clone());
        }
        let em = fit_embedding(&self.codes)?;
        let labels = vec![self.frames.source_label.clone(); self.codes.len()];
        let points = embed_all(&em, &self.codes, self.frames.frame_ids(), &labels)?;
        let e = Arc::new((em, points));
        *slot = Some(e.clone());
        Ok(e)
    }

    pub fn frame_index(&self, frame_id: u32) -> Result<usize> {
        self.frames
            .frame_ids()
            .iter()
            .position(|&id| id == frame_id)
            .ok_or(Error::UnknownFrame(frame_id))
    }
}

type Slot = Arc<Mutex<Option<Arc<Trained>>>>;

/// Videos under a root directory: `<root>/<id>/frames/*` plus an optional `<root>/<id>/model` bundle.
pub struct Catalog {
    root: PathBuf,
    pattern: String,
    slots: Mutex<HashMap<String, Slot>>,
}

impl Catalog {
    pub fn new(root: impl Into<PathBuf>, pattern: impl Into<String>) -> Self {
        Catalog {
            root: root.into(),
            pattern: pattern.into(),
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn video_dir(&self, id: &str) -> Option<PathBuf> {
        let valid = !id.is_empty() && !id.starts_with('.') && !id.contains(['/', '\\']);
        let dir = self.root.join(id);
        (valid && dir.join(FRAMES_DIR).is_dir()).then_some(dir)
    }

    /// Sorted by id; unreadable entries are skipped.
    pub fn list(&self) -> Result<Vec<VideoSummary>> {
        let Ok(read) = std::fs::read_dir(&self.root) else {
            return Ok(Vec::new());
        };
        let mut ids: Vec<String> = read
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|id| self.video_dir(id).is_some())
            .collect();
        ids.sort();
        let mut out = Vec::new();
        for id in ids {
            let dir = self.root.join(&id);
            let Ok(files) = list_frames(dir.join(FRAMES_DIR), &self.pattern) else {
                continue;
            };
            let Some(first) = files.first() else { continue };
            let Ok((w, h)) = image::image_dimensions(first) else {
                continue;
            };
            out.push(VideoSummary {
                video_id: id,
                frame_count: files.len(),
                resolution: Resolution {
                    height: h as usize,
                    width: w as usize,
                },
                trained: read_manifest(&dir.join(MODEL_DIR)).is_some(),
            });
        }
        Ok(out)
    }

    /// The trained state for `id`, rebuilt whenever the bundle digest changes.
    pub fn trained(&self, id: &str) -> std::result::Result<Arc<Trained>, Lookup> {
        let dir = self.video_dir(id).ok_or_else(|| Lookup::UnknownVideo(id.to_string()))?;
        let bundle_dir = dir.join(MODEL_DIR);
        let manifest = read_manifest(&bundle_dir).ok_or_else(|| Lookup::Untrained(id.to_string()))?;
        let slot = {
            let mut slots = self.slots.lock().unwrap_or_else(|p| p.into_inner());
            slots.entry(id.to_string()).or_default().clone()
        };
        // held across loading: one writer initializes, concurrent readers wait
        let mut guard = slot.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(t) = guard.as_ref() {
            if t.digest == manifest.weights_digest {
                return Ok(t.clone());
            }
        }
        let t = Arc::new(self.load(id, &dir, &bundle_dir)?);
        *guard = Some(t.clone());
        Ok(t)
    }

    fn load(&self, id: &str, dir: &Path, bundle_dir: &Path) -> Result<Trained> {
        let bundle = load_model(bundle_dir)?;
        let model = VideoAutoencoder::from_bundle(&bundle)?;
        let digest = bundle.manifest.weights_digest.clone();
        let mut frames = load_frames(dir.join(FRAMES_DIR), &self.pattern)?;
        let (mh, mw) = (model.config().input_h, model.config().input_w);
        if frames.dims() != (mh, mw) {
            frames = frames.conformed(mh, mw, ConformMode::Bilinear)?;
        }
        frames.source_label = id.to_string();
        let cache = dir.join(codes_file_name(&digest));
        let codes = match read_codes(&cache) {
            Some(c) if c.len() == frames.len() => c,
            _ => {
                let c = model.encode_all(frames.frames())?;
                if let Err(e) = write_codes(&cache, &c) {
                    log::warn!("could not write codes cache {}: {e}", cache.display());
                }
                c
            }
        };
        log::info!("loaded {id} ({} frames, digest {})", frames.len(), &digest[..16]);
        Ok(Trained {
            digest,
            model,
            frames,
            codes,
            embedding: Mutex::new(None),
        })
    }
}

fn read_manifest(bundle_dir: &Path) -> Option<ModelManifest> {
    let bytes = std::fs::read(bundle_dir.join(MANIFEST_FILE)).ok()?;
    serde_json::from_slice(&bytes).ok()
}

pub fn codes_file_name(digest: &str) -> String {
    format!("codes-{}.bin", &digest[..digest.len().min(16)])
}

fn write_codes(path: &Path, codes: &[LatentCode]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CODES_MAGIC);
    out.extend_from_slice(&(codes.len() as u32).to_le_bytes());
    for c in codes {
        for v in [c.channels, c.h, c.w, c.source_shape.0, c.source_shape.1] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &c.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, out)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

fn read_codes(path: &Path) -> Option<Vec<LatentCode>> {
    let data = std::fs::read(path).ok()?;
    let mut words = data.get(4..)?.chunks_exact(4).map(|b| [b[0], b[1], b[2], b[3]]);
    if data.get(..4)? != CODES_MAGIC {
        return None;
    }
    let mut next = || words.next().map(u32::from_le_bytes);
    let n = next()? as usize;
    let mut codes = Vec::with_capacity(n);
    for _ in 0..n {
        let (c, h, w, sh, sw) = (next()?, next()?, next()?, next()?, next()?);
        let len = (c as usize).checked_mul(h as usize)?.checked_mul(w as usize)?;
        let values = (0..len).map(|_| next().map(f32::from_bits)).collect::<Option<Vec<_>>>()?;
        let mut code = LatentCode::new(c as usize, h as usize, w as usize, values).ok()?;
        code.source_shape = (sh as usize, sw as usize);
        codes.push(code);
    }
    next().is_none().then_some(codes)
}
