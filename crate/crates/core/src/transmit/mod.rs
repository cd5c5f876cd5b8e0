//! Low-bitrate transmission simulator. The sender ships sparse, downsampled
//! keyframes; the receiver restores resolution by reprojection and frame rate
//! by latent interpolation.

mod metrics;
mod packet;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use metrics::{mean_psnr, psnr, ssim, PSNR_CAP_DB};
pub use packet::{
    decode_packet, decode_packet_for, encode_packet, read_vsat, write_vsat, TransmissionPacket,
    CRC_LEN, ENCODING_RAW_RGB8, FLAG_FINAL, HEADER_LEN, MAGIC, VERSION,
};

use crate::autoencoder::LatentCode;
use crate::error::{Error, Result};
use crate::ingest::{Frame, FrameSequence, ModelBundle, CHANNELS};
use crate::projection::{iterate_project, Reprojector, DEFAULT_ITERATIONS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionPlan {
    pub temporal_stride: usize,
    pub spatial_factor: usize,
    pub reprojection_n: usize,
}

impl Default for TransmissionPlan {
    fn default() -> Self {
        TransmissionPlan {
            temporal_stride: 1,
            spatial_factor: 1,
            reprojection_n: DEFAULT_ITERATIONS,
        }
    }
}

impl TransmissionPlan {
    pub fn new(temporal_stride: usize, spatial_factor: usize, reprojection_n: usize) -> Result<Self> {
        let p = TransmissionPlan {
            temporal_stride,
            spatial_factor,
            reprojection_n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temporal_stride == 0 || self.spatial_factor == 0 {
            return Err(Error::InvalidConfig(format!(
                "stride and factor must be positive, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Indices sent for a clip of `n` frames: every stride-th frame plus the last.
    pub fn keyframe_indices(&self, n: usize) -> Vec<usize> {
        if n == 0 {
            return Vec::new();
        }
        let mut idx: Vec<usize> = (0..n).step_by(self.temporal_stride).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        idx
    }
}

/// Parses `stride=2,factor=4,n=5`; omitted keys keep their defaults.
impl FromStr for TransmissionPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut plan = TransmissionPlan::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got {part:?}")))?;
            let v: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{key} must be a non-negative integer")))?;
            match key.trim() {
                "stride" => plan.temporal_stride = v,
                "factor" => plan.spatial_factor = v,
                "n" => plan.reprojection_n = v,
                other => return Err(Error::InvalidConfig(format!("unknown plan key {other:?}"))),
            }
        }
        plan.validate()?;
        Ok(plan)
    }
}

impl std::fmt::Display for TransmissionPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "stride={},factor={},n={}",
            self.temporal_stride, self.spatial_factor, self.reprojection_n
        )
    }
}

fn to_u16(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::InvalidTarget(format!("{what} {v} exceeds the packet limit")))
}

/// Selects, downsamples and quantizes keyframes into packets.
pub fn send(
    sequence: &FrameSequence,
    plan: &TransmissionPlan,
    model_digest16: [u8; 16],
) -> Result<Vec<TransmissionPacket>> {
    plan.validate()?;
    if sequence.is_empty() {
        return Err(Error::NoFrames("nothing to send".into()));
    }
    let (h, w) = sequence.dims();
    let n = sequence.len();
    plan.keyframe_indices(n)
        .into_iter()
        .map(|i| {
            let low = sequence.frames()[i].box_downsample(plan.spatial_factor)?;
            Ok(TransmissionPacket {
                version: VERSION,
                flags: if i == n - 1 { FLAG_FINAL } else { 0 },
                model_digest16,
                frame_index: u32::try_from(i).map_err(|_| Error::InvalidTarget("clip too long".into()))?,
                orig_h: to_u16(h, "height")?,
                orig_w: to_u16(w, "width")?,
                payload_h: to_u16(low.height(), "height")?,
                payload_w: to_u16(low.width(), "width")?,
                channels: CHANNELS as u8,
                encoding: ENCODING_RAW_RGB8,
                payload: low.to_rgb8_bytes(),
            })
        })
        .collect()
}

/// Output time positions for `n` received frame slots at `factor` times the frame rate.
pub fn output_times(n: usize, factor: f64) -> Result<Vec<f64>> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidFactor(factor));
    }
    let m = ((factor * n as f64).ceil() as usize).max(1);
    if m == 1 || n == 1 {
        return Ok(vec![0.0; m]);
    }
    Ok((0..m)
        .map(|i| i as f64 * (n - 1) as f64 / (m - 1) as f64)
        .collect())
}

/// Rebuilds hi-res, full-rate video: each keyframe is upsampled and reprojected,
/// frames between keyframes come from latent interpolation.
pub fn receive<M: Reprojector + ?Sized>(
    model: &M,
    model_digest16: &[u8; 16],
    packets: &[TransmissionPacket],
    plan: &TransmissionPlan,
    target_fps_factor: f64,
) -> Result<FrameSequence> {
    if packets.iter().any(|p| &p.model_digest16 != model_digest16) {
        return Err(Error::WrongModel);
    }
    let mut sorted: Vec<&TransmissionPacket> = packets.iter().collect();
    sorted.sort_by_key(|p| p.frame_index);
    sorted.dedup_by_key(|p| p.frame_index);
    let last = sorted
        .last()
        .ok_or_else(|| Error::NoFrames("no keyframes received".into()))?;
    let n = last.frame_index as usize + 1;
    let times = output_times(n, target_fps_factor)?;

    let mut keys: Vec<(f64, Frame, LatentCode)> = Vec::with_capacity(sorted.len());
    for p in &sorted {
        let low = p.frame()?;
        let up = low.resize_bilinear(p.orig_h as usize, p.orig_w as usize);
        let hi = iterate_project(model, &up, plan.reprojection_n)?;
        let code = model.encode(&hi)?;
        keys.push((p.frame_index as f64, hi, code));
    }

    let mut out = Vec::with_capacity(times.len());
    for &t in &times {
        let after = keys.partition_point(|k| k.0 < t - 1e-9);
        let frame = match keys.get(after) {
            Some(k) if (k.0 - t).abs() <= 1e-9 => k.1.clone(),
            Some(b) if after > 0 => {
                let a = &keys[after - 1];
                let alpha = ((b.0 - t) / (b.0 - a.0)) as f32;
                model.decode(&a.2.lerp(&b.2, alpha)?)?
            }
            Some(first) => first.1.clone(),
            None => keys.last().unwrap().1.clone(),
        };
        out.push(frame);
    }
    FrameSequence::new(out, "received")
}

/// The naive receiver: bilinear upsampling of the nearest earlier keyframe.
pub fn keyframe_copy_baseline(packets: &[TransmissionPacket], n: usize) -> Result<FrameSequence> {
    let mut sorted: Vec<&TransmissionPacket> = packets.iter().collect();
    sorted.sort_by_key(|p| p.frame_index);
    if sorted.is_empty() {
        return Err(Error::NoFrames("no keyframes received".into()));
    }
    let ups: Vec<Frame> = sorted
        .iter()
        .map(|p| Ok(p.frame()?.resize_bilinear(p.orig_h as usize, p.orig_w as usize)))
        .collect::<Result<_>>()?;
    let frames = (0..n)
        .map(|t| {
            let k = sorted.partition_point(|p| p.frame_index as usize <= t).max(1) - 1;
            ups[k].clone()
        })
        .collect();
    FrameSequence::new(frames, "baseline")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitrateReport {
    pub packet_count: usize,
    pub frame_count: usize,
    pub duration_s: f64,
    pub online_payload_bits: u64,
    pub online_header_bits: u64,
    pub online_bits: u64,
    pub online_bps: f64,
    pub offline_bits: u64,
    pub total_bits: u64,
    pub raw_bits: u64,
    pub raw_bps: f64,
    /// `raw_bits / online_bits`.
    pub online_compression: f64,
}

/// Bits on the wire for the packets, bits for shipping the model once, and a raw RGB8 baseline.
pub fn bitrate_report(packets: &[TransmissionPacket], bundle: &ModelBundle, duration_s: f64) -> Result<BitrateReport> {
    if !(duration_s > 0.0) {
        return Err(Error::InvalidConfig(format!("duration must be positive, got {duration_s}")));
    }
    let payload: u64 = packets.iter().map(|p| p.payload.len() as u64 * 8).sum();
    let header: u64 = packets.len() as u64 * ((HEADER_LEN + CRC_LEN) as u64 * 8);
    let online = payload + header;
    let manifest_len = serde_json::to_vec(&bundle.manifest)?.len() as u64;
    let offline = (bundle.weights.len() as u64 + manifest_len) * 8;
    let frame_count = packets.iter().map(|p| p.frame_index as usize + 1).max().unwrap_or(0);
    let frame_bits = packets
        .first()
        .map_or(0, |p| p.orig_h as u64 * p.orig_w as u64 * CHANNELS as u64 * 8);
    let raw = frame_bits * frame_count as u64;
    Ok(BitrateReport {
        packet_count: packets.len(),
        frame_count,
        duration_s,
        online_payload_bits: payload,
        online_header_bits: header,
        online_bits: online,
        online_bps: online as f64 / duration_s,
        offline_bits: offline,
        total_bits: online + offline,
        raw_bits: raw,
        raw_bps: raw as f64 / duration_s,
        online_compression: if online == 0 { 0.0 } else { raw as f64 / online as f64 },
    })
}
