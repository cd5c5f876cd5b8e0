use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{Frame, CHANNELS};

pub const MAGIC: &[u8; 4] = b"VSAT";
pub const VERSION: u8 = 1;
pub const ENCODING_RAW_RGB8: u8 = 0;
/// Flag bit set on the packet carrying the last frame of the clip.
pub const FLAG_FINAL: u8 = 0x01;
/// Fixed bytes before the payload.
pub const HEADER_LEN: usize = 40;
pub const CRC_LEN: usize = 4;

/// One keyframe on the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransmissionPacket {
    pub version: u8,
    pub flags: u8,
    pub model_digest16: [u8; 16],
    pub frame_index: u32,
    pub orig_h: u16,
    pub orig_w: u16,
    pub payload_h: u16,
    pub payload_w: u16,
    pub channels: u8,
    pub encoding: u8,
    /// Raw RGB8, row-major, interleaved.
    pub payload: Vec<u8>,
}

impl TransmissionPacket {
    pub fn is_final(&self) -> bool {
        self.flags & FLAG_FINAL != 0
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + CRC_LEN
    }

    fn expected_payload_len(&self) -> usize {
        self.payload_h as usize * self.payload_w as usize * self.channels as usize
    }

    fn check(&self) -> Result<()> {
        if self.encoding == ENCODING_RAW_RGB8 && self.payload.len() != self.expected_payload_len() {
            return Err(Error::CorruptPacket(format!(
                "payload is {} bytes, header implies {}",
                self.payload.len(),
                self.expected_payload_len()
            )));
        }
        Ok(())
    }

    /// Decodes the payload into a low-resolution frame.
    pub fn frame(&self) -> Result<Frame> {
        if self.encoding != ENCODING_RAW_RGB8 || self.channels as usize != CHANNELS {
            return Err(Error::CorruptPacket(format!(
                "unsupported encoding {} with {} channels",
                self.encoding, self.channels
            )));
        }
        self.check()?;
        Frame::from_rgb8_bytes(self.payload_h as usize, self.payload_w as usize, &self.payload)
    }
}

pub fn encode_packet(p: &TransmissionPacket) -> Result<Vec<u8>> {
    p.check()?;
    let payload_len = u32::try_from(p.payload.len())
        .map_err(|_| Error::CorruptPacket("payload exceeds 4 GiB".into()))?;
    let mut out = Vec::with_capacity(p.wire_len());
    out.extend_from_slice(MAGIC);
    out.push(p.version);
    out.push(p.flags);
    out.extend_from_slice(&p.model_digest16);
    out.extend_from_slice(&p.frame_index.to_le_bytes());
    for v in [p.orig_h, p.orig_w, p.payload_h, p.payload_w] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(p.channels);
    out.push(p.encoding);
    out.extend_from_slice(&payload_len.to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);
    out.extend_from_slice(&p.payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

pub fn decode_packet(bytes: &[u8]) -> Result<TransmissionPacket> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::NotAPacket("missing VSAT magic".into()));
    }
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(Error::CorruptPacket(format!("truncated: {} bytes", bytes.len())));
    }
    let payload_len = u32_at(bytes, 36) as usize;
    if bytes.len() != HEADER_LEN + payload_len + CRC_LEN {
        return Err(Error::CorruptPacket(format!(
            "length {} does not match payload_len {payload_len}",
            bytes.len()
        )));
    }
    let body = &bytes[..HEADER_LEN + payload_len];
    let crc = u32_at(bytes, HEADER_LEN + payload_len);
    if crc32fast::hash(body) != crc {
        return Err(Error::CorruptPacket("crc mismatch".into()));
    }
    let version = bytes[4];
    if version != VERSION {
        return Err(Error::CorruptPacket(format!("unsupported version {version}")));
    }
    let p = TransmissionPacket {
        version,
        flags: bytes[5],
        model_digest16: bytes[6..22].try_into().expect("16 bytes"),
        frame_index: u32_at(bytes, 22),
        orig_h: u16_at(bytes, 26),
        orig_w: u16_at(bytes, 28),
        payload_h: u16_at(bytes, 30),
        payload_w: u16_at(bytes, 32),
        channels: bytes[34],
        encoding: bytes[35],
        payload: bytes[HEADER_LEN..HEADER_LEN + payload_len].to_vec(),
    };
    p.check()?;
    Ok(p)
}

/// [`decode_packet`], additionally rejecting packets addressed to another model.
pub fn decode_packet_for(bytes: &[u8], model_digest16: &[u8; 16]) -> Result<TransmissionPacket> {
    let p = decode_packet(bytes)?;
    if &p.model_digest16 != model_digest16 {
        return Err(Error::WrongModel);
    }
    Ok(p)
}

/// Length-prefixed (u32 LE) concatenation of encoded packets.
pub fn write_vsat(path: impl AsRef<Path>, packets: &[TransmissionPacket]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for p in packets {
        let bytes = encode_packet(p)?;
        out.write_all(&(bytes.len() as u32).to_le_bytes())?;
        out.write_all(&bytes)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_vsat(path: impl AsRef<Path>) -> Result<Vec<TransmissionPacket>> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let mut packets = Vec::new();
    let mut i = 0;
    while i < data.len() {
        if i + 4 > data.len() {
            return Err(Error::CorruptPacket("truncated length prefix".into()));
        }
        let len = u32_at(&data, i) as usize;
        i += 4;
        let chunk = data
            .get(i..i + len)
            .ok_or_else(|| Error::CorruptPacket("truncated packet in stream".into()))?;
        packets.push(decode_packet(chunk)?);
        i += len;
    }
    Ok(packets)
}
