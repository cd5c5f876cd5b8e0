//! C ABI over `visa-core`.
//!
//! Frames cross the boundary as planar `float` buffers (`3 x height x width`,
//! channel-major, values in `[0, 1]`). Latent codes are flat `float` buffers in
//! the model's `channels x rows x cols` order. Every fallible call returns a
//! [`VisaStatus`]; on failure, [`visa_last_error_message`] describes what went
//! wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use visa_core::autoencoder::{LatentCode, VideoAutoencoder};
use visa_core::ingest::{is_model_compatible, load_model, Frame, CHANNELS};
use visa_core::projection::{iterate_project, spatial_superres};
use visa_core::transmit::{decode_packet, psnr};
use visa_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VisaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Io = 4,
    CorruptBundle = 5,
    NotAPacket = 6,
    CorruptPacket = 7,
    WrongModel = 8,
    Panic = 9,
    Internal = 10,
}

/// Opaque handle to a loaded model.
pub struct VisaModel {
    model: VideoAutoencoder,
    digest16: [u8; 16],
}

/// Fixed facts about a loaded model.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct VisaModelInfo {
    pub input_height: usize,
    pub input_width: usize,
    pub base_channels: usize,
    pub latent_channels: usize,
    /// Latent floats for one frame at the input size.
    pub code_len: usize,
    pub epochs_trained: usize,
    /// First 16 bytes of the weights digest; packets carry the same bytes.
    pub digest16: [u8; 16],
}

/// Header fields of one transmission packet.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct VisaPacketInfo {
    pub frame_index: u32,
    pub is_final: bool,
    pub orig_height: u16,
    pub orig_width: u16,
    pub payload_height: u16,
    pub payload_width: u16,
    pub payload_len: usize,
    pub model_digest16: [u8; 16],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Fail {
    Null(&'static str),
    Invalid(String),
    TooSmall { need: usize, have: usize },
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

impl Fail {
    fn status(&self) -> VisaStatus {
        match self {
            Fail::Null(_) => VisaStatus::NullPointer,
            Fail::Invalid(_) => VisaStatus::InvalidArgument,
            Fail::TooSmall { .. } => VisaStatus::BufferTooSmall,
            Fail::Core(e) => match e {
                Error::Io(_) => VisaStatus::Io,
                Error::CorruptBundle(_) | Error::Json(_) => VisaStatus::CorruptBundle,
                Error::NotAPacket(_) => VisaStatus::NotAPacket,
                Error::CorruptPacket(_) => VisaStatus::CorruptPacket,
                Error::WrongModel => VisaStatus::WrongModel,
                Error::Image(_) => VisaStatus::Internal,
                _ => VisaStatus::InvalidArgument,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Fail::Null(what) => format!("{what} is null"),
            Fail::Invalid(m) => m.clone(),
            Fail::TooSmall { need, have } => {
                format!("output buffer holds {have} values, {need} needed")
            }
            Fail::Core(e) => format!("{}: {e}", e.code()),
        }
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> VisaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => VisaStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(fail.message());
            fail.status()
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {what}"));
            VisaStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail::Null(what))
    } else {
        Ok(())
    }
}

unsafe fn model_ref<'a>(m: *const VisaModel) -> Result<&'a VisaModel, Fail> {
    nonnull(m, "model")?;
    Ok(&*m)
}

fn frame_len(height: usize, width: usize) -> Result<usize, Fail> {
    CHANNELS
        .checked_mul(height)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| Fail::Invalid(format!("{height}x{width} frame is too large")))
}

unsafe fn read_frame(pixels: *const f32, height: usize, width: usize) -> Result<Frame, Fail> {
    nonnull(pixels, "pixels")?;
    let n = frame_len(height, width)?;
    let data = std::slice::from_raw_parts(pixels, n).to_vec();
    Ok(Frame::new(height, width, data)?)
}

unsafe fn write_out(values: &[f32], out: *mut f32, capacity: usize) -> Result<(), Fail> {
    nonnull(out, "output buffer")?;
    if capacity < values.len() {
        return Err(Fail::TooSmall {
            need: values.len(),
            have: capacity,
        });
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

fn latent_shape(model: &VideoAutoencoder, height: usize, width: usize) -> Result<(usize, usize, usize), Fail> {
    if !is_model_compatible(height, width) {
        return Err(Fail::Invalid(format!("{height}x{width} is not divisible by 64")));
    }
    Ok(model.config().latent_shape(height, width))
}

unsafe fn read_code(
    model: &VideoAutoencoder,
    code: *const f32,
    code_len: usize,
    height: usize,
    width: usize,
) -> Result<LatentCode, Fail> {
    nonnull(code, "code")?;
    let (c, h, w) = latent_shape(model, height, width)?;
    if code_len != c * h * w {
        return Err(Fail::Invalid(format!(
            "code has {code_len} values, a {height}x{width} frame needs {}",
            c * h * w
        )));
    }
    let values = std::slice::from_raw_parts(code, code_len).to_vec();
    let mut out = LatentCode::new(c, h, w, values)?;
    out.source_shape = (height, width);
    Ok(out)
}

/// Stable lowercase name for a status, e.g. `"buffer_too_small"`.
#[no_mangle]
pub extern "C" fn visa_status_name(status: VisaStatus) -> *const c_char {
    let s: &'static CStr = match status {
        VisaStatus::Ok => c"ok",
        VisaStatus::NullPointer => c"null_pointer",
        VisaStatus::InvalidArgument => c"invalid_argument",
        VisaStatus::BufferTooSmall => c"buffer_too_small",
        VisaStatus::Io => c"io",
        VisaStatus::CorruptBundle => c"corrupt_bundle",
        VisaStatus::NotAPacket => c"not_a_packet",
        VisaStatus::CorruptPacket => c"corrupt_packet",
        VisaStatus::WrongModel => c"wrong_model",
        VisaStatus::Panic => c"panic",
        VisaStatus::Internal => c"internal",
    };
    s.as_ptr()
}

/// Message for the latest failure on this thread, or null if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn visa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a bundle directory. On success `*out` owns a handle that must be
/// released with [`visa_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn visa_model_load(path: *const c_char, out: *mut *mut VisaModel) -> VisaStatus {
    guard(|| {
        nonnull(path, "path")?;
        nonnull(out, "out")?;
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail::Invalid("path is not UTF-8".into()))?;
        let bundle = load_model(path)?;
        let handle = VisaModel {
            model: VideoAutoencoder::from_bundle(&bundle)?,
            digest16: bundle.manifest.digest16()?,
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`visa_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn visa_model_free(model: *mut VisaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn visa_model_info(model: *const VisaModel, out: *mut VisaModelInfo) -> VisaStatus {
    guard(|| {
        let m = model_ref(model)?;
        nonnull(out, "out")?;
        let cfg = m.model.config();
        let (c, h, w) = cfg.latent_shape(cfg.input_h, cfg.input_w);
        *out = VisaModelInfo {
            input_height: cfg.input_h,
            input_width: cfg.input_w,
            base_channels: cfg.base_channels,
            latent_channels: cfg.latent_channels(),
            code_len: c * h * w,
            epochs_trained: m.model.epochs_trained(),
            digest16: m.digest16,
        };
        Ok(())
    })
}

/// Latent length for a frame of the given size (both multiples of 64).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn visa_code_len(
    model: *const VisaModel,
    height: usize,
    width: usize,
    out: *mut usize,
) -> VisaStatus {
    guard(|| {
        let m = model_ref(model)?;
        nonnull(out, "out")?;
        let (c, h, w) = latent_shape(&m.model, height, width)?;
        *out = c * h * w;
        Ok(())
    })
}

/// Encodes one frame. `*written` receives the code length.
///
/// # Safety
/// `pixels` holds `3*height*width` floats; `code_out` holds `code_capacity`.
#[no_mangle]
pub unsafe extern "C" fn visa_encode(
    model: *const VisaModel,
    pixels: *const f32,
    height: usize,
    width: usize,
    code_out: *mut f32,
    code_capacity: usize,
    written: *mut usize,
) -> VisaStatus {
    guard(|| {
        let m = model_ref(model)?;
        nonnull(written, "written")?;
        let frame = read_frame(pixels, height, width)?;
        let code = m.model.encode(&frame)?;
        write_out(&code.values, code_out, code_capacity)?;
        *written = code.values.len();
        Ok(())
    })
}

/// Decodes a code produced for a `height x width` frame.
///
/// # Safety
/// `code` holds `code_len` floats; `pixels_out` holds `pixels_capacity`.
#[no_mangle]
pub unsafe extern "C" fn visa_decode(
    model: *const VisaModel,
    code: *const f32,
    code_len: usize,
    height: usize,
    width: usize,
    pixels_out: *mut f32,
    pixels_capacity: usize,
) -> VisaStatus {
    guard(|| {
        let m = model_ref(model)?;
        let code = read_code(&m.model, code, code_len, height, width)?;
        let frame = m.model.decode(&code)?;
        write_out(frame.data(), pixels_out, pixels_capacity)
    })
}

/// Encode/decode round trip repeated `iterations` times; 0 copies the input.
///
/// # Safety
/// Buffers hold `3*height*width` floats.
#[no_mangle]
pub unsafe extern "C" fn visa_project(
    model: *const VisaModel,
    pixels: *const f32,
    height: usize,
    width: usize,
    iterations: usize,
    pixels_out: *mut f32,
    pixels_capacity: usize,
) -> VisaStatus {
    guard(|| {
        let m = model_ref(model)?;
        let frame = read_frame(pixels, height, width)?;
        let out = iterate_project(&m.model, &frame, iterations)?;
        write_out(out.data(), pixels_out, pixels_capacity)
    })
}

/// Upsamples a low-resolution frame to the model input size, then reprojects
/// `iterations` times. The output holds `3*input_height*input_width` floats.
///
/// # Safety
/// `pixels` holds `3*height*width` floats; `pixels_out` holds `pixels_capacity`.
#[no_mangle]
pub unsafe extern "C" fn visa_superres(
    model: *const VisaModel,
    pixels: *const f32,
    height: usize,
    width: usize,
    iterations: usize,
    pixels_out: *mut f32,
    pixels_capacity: usize,
) -> VisaStatus {
    guard(|| {
        let m = model_ref(model)?;
        let low = read_frame(pixels, height, width)?;
        let cfg = m.model.config();
        let out = spatial_superres(&m.model, &low, cfg.input_h, cfg.input_w, iterations)?;
        write_out(out.data(), pixels_out, pixels_capacity)
    })
}

/// Decodes `alpha*a + (1-alpha)*b`; `alpha` must lie in `[0, 1]`.
///
/// # Safety
/// Both codes hold `code_len` floats; `pixels_out` holds `pixels_capacity`.
#[no_mangle]
pub unsafe extern "C" fn visa_interpolate(
    model: *const VisaModel,
    code_a: *const f32,
    code_b: *const f32,
    code_len: usize,
    height: usize,
    width: usize,
    alpha: f32,
    pixels_out: *mut f32,
    pixels_capacity: usize,
) -> VisaStatus {
    guard(|| {
        let m = model_ref(model)?;
        let a = read_code(&m.model, code_a, code_len, height, width)?;
        let b = read_code(&m.model, code_b, code_len, height, width)?;
        let mixed = visa_core::latentops::interpolate(&m.model, &a, &b, alpha)?;
        write_out(mixed.data(), pixels_out, pixels_capacity)
    })
}

/// PSNR in dB between two frames of equal size, capped for identical frames.
///
/// # Safety
/// Both buffers hold `3*height*width` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn visa_psnr(
    a: *const f32,
    b: *const f32,
    height: usize,
    width: usize,
    out: *mut f64,
) -> VisaStatus {
    guard(|| {
        nonnull(out, "out")?;
        let fa = read_frame(a, height, width)?;
        let fb = read_frame(b, height, width)?;
        *out = psnr(&fa, &fb)?;
        Ok(())
    })
}

/// Parses the header of one wire packet and checks its CRC.
///
/// # Safety
/// `bytes` holds `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn visa_packet_info(bytes: *const u8, len: usize, out: *mut VisaPacketInfo) -> VisaStatus {
    guard(|| {
        nonnull(bytes, "bytes")?;
        nonnull(out, "out")?;
        let p = decode_packet(std::slice::from_raw_parts(bytes, len))?;
        *out = VisaPacketInfo {
            frame_index: p.frame_index,
            is_final: p.is_final(),
            orig_height: p.orig_h,
            orig_width: p.orig_w,
            payload_height: p.payload_h,
            payload_width: p.payload_w,
            payload_len: p.payload.len(),
            model_digest16: p.model_digest16,
        };
        Ok(())
    })
}

/// Decodes a packet payload into a planar frame of
/// `3*payload_height*payload_width` floats.
///
/// # Safety
/// `bytes` holds `len` bytes; `pixels_out` holds `pixels_capacity` floats.
#[no_mangle]
pub unsafe extern "C" fn visa_packet_frame(
    bytes: *const u8,
    len: usize,
    pixels_out: *mut f32,
    pixels_capacity: usize,
) -> VisaStatus {
    guard(|| {
        nonnull(bytes, "bytes")?;
        let p = decode_packet(std::slice::from_raw_parts(bytes, len))?;
        write_out(p.frame()?.data(), pixels_out, pixels_capacity)
    })
}
