//! Frame directories, frame conforming and model bundle persistence.

mod bundle;
mod frame;

use std::path::{Path, PathBuf};

pub use bundle::{
    load_model, save_model, weights_digest, ModelBundle, ModelManifest, MANIFEST_FILE,
    MANIFEST_FORMAT_VERSION, WEIGHTS_FILE,
};
pub use frame::{Axis, ConformMode, Frame, FrameSequence, CHANNELS};

use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Loads every PNG/JPEG in `dir` whose file name matches `pattern`, in lexicographic order.
pub fn load_frames(dir: impl AsRef<Path>, pattern: &str) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let pattern = glob::Pattern::new(pattern)
        .map_err(|e| Error::InvalidConfig(format!("bad frame pattern {pattern:?}: {e}")))?;
    let paths = list_images(dir, &pattern)?;
    if paths.is_empty() {
        return Err(Error::NoFrames(format!(
            "{} has no images matching {}",
            dir.display(),
            pattern
        )));
    }
    let mut frames = Vec::with_capacity(paths.len());
    let mut expected = None;
    for path in &paths {
        let img = image::open(path)?.to_rgb8();
        let frame = Frame::from_rgb8(&img);
        match expected {
            None => expected = Some(frame.dims()),
            Some(dims) if dims != frame.dims() => {
                return Err(Error::ResolutionMismatch {
                    expected: dims,
                    found: frame.dims(),
                    path: path.clone(),
                })
            }
            _ => {}
        }
        frames.push(frame);
    }
    let label = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FrameSequence::new(frames, label)
}

/// Image files in `dir` matching `pattern`, in the order [`load_frames`] reads them.
pub fn list_frames(dir: impl AsRef<Path>, pattern: &str) -> Result<Vec<PathBuf>> {
    let pattern = glob::Pattern::new(pattern)
        .map_err(|e| Error::InvalidConfig(format!("bad frame pattern {pattern:?}: {e}")))?;
    list_images(dir.as_ref(), &pattern)
}

fn list_images(dir: &Path, pattern: &glob::Pattern) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::NoFrames(format!("{} is not a directory", dir.display())));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
            let ext_ok = p
                .extension()
                .map(|e| {
                    let e = e.to_string_lossy().to_ascii_lowercase();
                    IMAGE_EXTENSIONS.contains(&e.as_str())
                })
                .unwrap_or(false);
            ext_ok && pattern.matches(&name)
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Writes a sequence as `frame_%06d.png` files (numbered by position).
pub fn save_frames(dir: impl AsRef<Path>, frames: &[Frame]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let path = dir.join(frame_file_name(i));
            f.to_rgb8().save(&path)?;
            Ok(path)
        })
        .collect()
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

pub fn decode_image_bytes(bytes: &[u8]) -> Result<Frame> {
    let img = image::load_from_memory(bytes)?.to_rgb8();
    Ok(Frame::from_rgb8(&img))
}

pub fn encode_png(frame: &Frame) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    frame
        .to_rgb8()
        .write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Resamples or pads `frame` to `target_h`×`target_w`.
///
/// Pad modes center the original; the central crop is preserved exactly.
pub fn conform(frame: &Frame, target_h: usize, target_w: usize, mode: ConformMode) -> Result<Frame> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::InvalidTarget("target dimensions must be positive".into()));
    }
    match mode {
        ConformMode::Bilinear => Ok(frame.resize_bilinear(target_h, target_w)),
        ConformMode::MirrorPad => frame.pad_to(target_h, target_w, true),
        ConformMode::ZeroPad => frame.pad_to(target_h, target_w, false),
    }
}

pub fn is_model_compatible(h: usize, w: usize) -> bool {
    h > 0 && w > 0 && h % 64 == 0 && w % 64 == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(h: usize, w: usize) -> Frame {
        Frame::from_fn(h, w, |y, x| {
            let v = if (y / 3 + x / 5) % 2 == 0 { 0.9 } else { 0.1 };
            [v, x as f32 / w as f32, y as f32 / h as f32]
        })
        .quantized()
    }

    #[test]
    fn load_frames_orders_lexicographically() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..3)
            .map(|i| Frame::filled(16, 24, i as f32 / 4.0).quantized())
            .collect();
        save_frames(dir.path(), &frames).unwrap();
        std::fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();
        let seq = load_frames(dir.path(), "*").unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.frame_ids(), &[0, 1, 2]);
        assert_eq!(seq.frames(), frames.as_slice());
    }

    #[test]
    fn single_frame_directory() {
        let dir = tempfile::tempdir().unwrap();
        save_frames(dir.path(), &[checker(128, 192)]).unwrap();
        let seq = load_frames(dir.path(), "frame_*.png").unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.dims(), (128, 192));
    }

    #[test]
    fn empty_directory_is_no_frames() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_frames(dir.path(), "*"), Err(Error::NoFrames(_))));
        assert!(matches!(
            load_frames(dir.path().join("missing"), "*"),
            Err(Error::NoFrames(_))
        ));
    }

    #[test]
    fn mixed_resolutions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        checker(8, 8).to_rgb8().save(dir.path().join("a.png")).unwrap();
        checker(8, 16).to_rgb8().save(dir.path().join("b.png")).unwrap();
        assert!(matches!(
            load_frames(dir.path(), "*"),
            Err(Error::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn bilinear_identity_target_is_exact() {
        let f = checker(256, 512);
        assert_eq!(conform(&f, 256, 512, ConformMode::Bilinear).unwrap(), f);
    }

    #[test]
    fn mirror_pad_centers_and_reflects() {
        let f = checker(256, 512);
        let p = conform(&f, 512, 1024, ConformMode::MirrorPad).unwrap();
        assert_eq!(p.dims(), (512, 1024));
        assert_eq!(p.crop(128, 256, 256, 512).unwrap(), f);
        // one pixel left of the original's column 0 mirrors column 1
        for c in 0..3 {
            assert_eq!(p.get(c, 128 + 10, 255), f.get(c, 10, 1));
            assert_eq!(p.get(c, 127, 256 + 7), f.get(c, 1, 7));
        }
    }

    #[test]
    fn zero_pad_fills_margins_with_zero() {
        let f = checker(8, 8);
        let p = conform(&f, 16, 12, ConformMode::ZeroPad).unwrap();
        assert_eq!(p.crop(4, 2, 8, 8).unwrap(), f);
        assert_eq!(p.get(0, 0, 0), 0.0);
        assert_eq!(p.get(2, 15, 11), 0.0);
    }

    #[test]
    fn pad_smaller_target_is_invalid() {
        let f = checker(8, 8);
        assert!(matches!(
            conform(&f, 4, 8, ConformMode::MirrorPad),
            Err(Error::InvalidTarget(_))
        ));
    }

    #[test]
    fn upsampling_tiny_frame_stays_in_range() {
        let f = checker(8, 16);
        let u = conform(&f, 256, 512, ConformMode::Bilinear).unwrap();
        assert_eq!(u.dims(), (256, 512));
        assert!(u.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
