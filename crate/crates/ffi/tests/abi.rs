use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use visa_core::autoencoder::build_model;
use visa_core::autoencoder::AutoencoderConfig;
use visa_core::ingest::{save_model, Frame};
use visa_core::transmit::{encode_packet, send, TransmissionPlan};
use visa_core::synth::{linear_clip, Palette};
use visa_ffi::*;

struct Loaded {
    _dir: tempfile::TempDir,
    path: CString,
    model: *mut VisaModel,
    core: visa_core::autoencoder::VideoAutoencoder,
    digest16: [u8; 16],
}

impl Drop for Loaded {
    fn drop(&mut self) {
        unsafe { visa_model_free(self.model) };
    }
}

fn loaded() -> Loaded {
    let dir = tempfile::tempdir().unwrap();
    let core = build_model(AutoencoderConfig::new(2, 64, 128), 3).unwrap();
    let bundle = core.to_bundle();
    save_model(&bundle, dir.path().join("m")).unwrap();
    let path = CString::new(dir.path().join("m").to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { visa_model_load(path.as_ptr(), &mut model) }, VisaStatus::Ok);
    assert!(!model.is_null());
    Loaded {
        _dir: dir,
        path,
        model,
        core,
        digest16: bundle.manifest.digest16().unwrap(),
    }
}

fn frame() -> Frame {
    linear_clip(64, 128, 4, Palette::warm(), 1).render(1.0)
}

fn last_error() -> String {
    let p = visa_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

#[test]
fn info_matches_the_bundle() {
    let m = loaded();
    let mut info = VisaModelInfo::default();
    assert_eq!(unsafe { visa_model_info(m.model, &mut info) }, VisaStatus::Ok);
    assert_eq!((info.input_height, info.input_width, info.base_channels), (64, 128, 2));
    // 12 * k channels over a 1 x 2 grid
    assert_eq!((info.latent_channels, info.code_len), (24, 48));
    assert_eq!(info.digest16, m.digest16);
    let mut len = 0;
    assert_eq!(unsafe { visa_code_len(m.model, 128, 192, &mut len) }, VisaStatus::Ok);
    assert_eq!(len, 24 * 2 * 3);
    assert_eq!(unsafe { visa_code_len(m.model, 100, 192, &mut len) }, VisaStatus::InvalidArgument);
}

#[test]
fn encode_decode_match_the_rust_api() {
    let m = loaded();
    let f = frame();
    let mut code = vec![0.0f32; 48];
    let mut written = 0;
    let st = unsafe { visa_encode(m.model, f.data().as_ptr(), 64, 128, code.as_mut_ptr(), code.len(), &mut written) };
    assert_eq!(st, VisaStatus::Ok);
    let expected = m.core.encode(&f).unwrap();
    assert_eq!(written, 48);
    assert_eq!(code, expected.values);

    let mut out = vec![0.0f32; f.data().len()];
    let st = unsafe { visa_decode(m.model, code.as_ptr(), 48, 64, 128, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, VisaStatus::Ok);
    assert_eq!(out, m.core.decode(&expected).unwrap().data());

    let mut projected = vec![0.0f32; out.len()];
    let st = unsafe { visa_project(m.model, f.data().as_ptr(), 64, 128, 1, projected.as_mut_ptr(), projected.len()) };
    assert_eq!(st, VisaStatus::Ok);
    assert_eq!(projected, out);
    let st = unsafe { visa_project(m.model, f.data().as_ptr(), 64, 128, 0, projected.as_mut_ptr(), projected.len()) };
    assert_eq!(st, VisaStatus::Ok);
    assert_eq!(projected, f.data());

    // endpoint of the blend is the plain decode
    let st = unsafe {
        visa_interpolate(m.model, code.as_ptr(), code.as_ptr(), 48, 64, 128, 0.3, projected.as_mut_ptr(), projected.len())
    };
    assert_eq!(st, VisaStatus::Ok);
    assert_eq!(projected, out);
    let st = unsafe {
        visa_interpolate(m.model, code.as_ptr(), code.as_ptr(), 48, 64, 128, 1.5, projected.as_mut_ptr(), projected.len())
    };
    assert_eq!(st, VisaStatus::InvalidArgument);
    assert!(last_error().starts_with("invalid_alpha"));
}

#[test]
fn superres_fills_the_model_size() {
    let m = loaded();
    let low = frame().box_downsample(4).unwrap();
    let mut out = vec![0.0f32; 3 * 64 * 128];
    let st = unsafe { visa_superres(m.model, low.data().as_ptr(), 16, 32, 2, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, VisaStatus::Ok);
    assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn argument_errors_are_reported() {
    let m = loaded();
    let f = frame();
    let mut out = vec![0.0f32; f.data().len()];
    let mut written = 0;

    let st = unsafe { visa_encode(ptr::null(), f.data().as_ptr(), 64, 128, out.as_mut_ptr(), out.len(), &mut written) };
    assert_eq!(st, VisaStatus::NullPointer);
    assert_eq!(last_error(), "model is null");

    let st = unsafe { visa_encode(m.model, f.data().as_ptr(), 64, 128, out.as_mut_ptr(), 10, &mut written) };
    assert_eq!(st, VisaStatus::BufferTooSmall);
    assert_eq!(last_error(), "output buffer holds 10 values, 48 needed");

    let mut bad = f.data().to_vec();
    bad[5] = 2.0;
    let st = unsafe { visa_encode(m.model, bad.as_ptr(), 64, 128, out.as_mut_ptr(), out.len(), &mut written) };
    assert_eq!(st, VisaStatus::InvalidArgument);

    let st = unsafe { visa_decode(m.model, out.as_ptr(), 47, 64, 128, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, VisaStatus::InvalidArgument);

    let mut handle = ptr::null_mut();
    let missing = CString::new("/definitely/not/here").unwrap();
    assert_eq!(unsafe { visa_model_load(missing.as_ptr(), &mut handle) }, VisaStatus::Io);
    assert!(handle.is_null());
    assert_eq!(unsafe { visa_model_load(ptr::null(), &mut handle) }, VisaStatus::NullPointer);
    unsafe { visa_model_free(ptr::null_mut()) };
}

#[test]
fn psnr_matches_the_rust_metric() {
    let a = frame();
    let b = linear_clip(64, 128, 4, Palette::warm(), 1).render(2.0);
    let mut db = 0.0;
    let st = unsafe { visa_psnr(a.data().as_ptr(), b.data().as_ptr(), 64, 128, &mut db) };
    assert_eq!(st, VisaStatus::Ok);
    assert_eq!(db, visa_core::transmit::psnr(&a, &b).unwrap());
}

#[test]
fn packets_parse_and_corruption_is_caught() {
    let m = loaded();
    let seq = linear_clip(64, 128, 3, Palette::warm(), 1).sequence(3, "c").unwrap();
    let plan = TransmissionPlan::new(2, 4, 1).unwrap();
    let packets = send(&seq, &plan, m.digest16).unwrap();
    let last = packets.last().unwrap();
    let mut wire = encode_packet(last).unwrap();

    let mut info = VisaPacketInfo::default();
    assert_eq!(unsafe { visa_packet_info(wire.as_ptr(), wire.len(), &mut info) }, VisaStatus::Ok);
    assert_eq!((info.frame_index, info.is_final), (2, true));
    assert_eq!((info.orig_height, info.orig_width, info.payload_height, info.payload_width), (64, 128, 16, 32));
    assert_eq!(info.payload_len, 16 * 32 * 3);
    assert_eq!(info.model_digest16, m.digest16);

    let mut px = vec![0.0f32; 3 * 16 * 32];
    assert_eq!(unsafe { visa_packet_frame(wire.as_ptr(), wire.len(), px.as_mut_ptr(), px.len()) }, VisaStatus::Ok);
    assert_eq!(px, last.frame().unwrap().data());

    let n = wire.len();
    wire[n - 1] ^= 0xff;
    assert_eq!(unsafe { visa_packet_info(wire.as_ptr(), n, &mut info) }, VisaStatus::CorruptPacket);
    assert_eq!(unsafe { visa_packet_info(b"nope".as_ptr(), 4, &mut info) }, VisaStatus::NotAPacket);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/visa.h")).unwrap();
    for name in [
        "visa_status_name",
        "visa_last_error_message",
        "visa_model_load",
        "visa_model_free",
        "visa_model_info",
        "visa_code_len",
        "visa_encode",
        "visa_decode",
        "visa_project",
        "visa_superres",
        "visa_interpolate",
        "visa_psnr",
        "visa_packet_info",
        "visa_packet_frame",
        "typedef struct VisaModel VisaModel;",
        "VISA_STATUS_BUFFER_TOO_SMALL = 3",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Builds the C smoke program against the header and the shared library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let m = loaded();
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    assert!(lib_dir.join("libvisa_ffi.so").is_file(), "shared library not found in {}", lib_dir.display());
    let bin = m._dir.path().join("smoke");
    let out = Command::new(cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lvisa_ffi")
        .arg("-o")
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "compile failed: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).arg(m.path.to_str().unwrap()).output().unwrap();
    assert!(run.status.success(), "smoke failed: {}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "64x128 k=2 code=48 psnr=99.0");
}
