//! Binary framing shared by checkpoints (`RNDC`) and image caches (`RNDD`).
//!
//! Layout: 4-byte magic, u32 LE format version, u32 LE header length, the
//! UTF-8 JSON header, then the payload: raw f32 LE values of every tensor
//! back to back, in the order the header lists them. The header always
//! carries `payload_sha256`, so a flipped payload bit is caught on load.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{check_shape, Tensor};

const PREAMBLE: usize = 12;
const CHECKSUM_KEY: &str = "payload_sha256";

fn digest(payload: &[u8]) -> String {
    format!("{:x}", Sha256::digest(payload))
}

/// Where one tensor lives in the payload. `offset` is in bytes from the
/// start of the payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub len: usize,
}

pub(crate) fn layout<'a>(tensors: impl IntoIterator<Item = (String, &'a Tensor)>) -> Vec<TensorEntry> {
    let mut offset = 0u64;
    tensors
        .into_iter()
        .map(|(name, t)| {
            let entry = TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
                len: t.len(),
            };
            offset += 4 * t.len() as u64;
            entry
        })
        .collect()
}

/// Writes a frame; `header` must serialize to a JSON object.
pub(crate) fn write_frame<'a, H: Serialize>(
    out: &mut impl Write,
    magic: &[u8; 4],
    version: u32,
    header: &H,
    tensors: impl IntoIterator<Item = &'a Tensor>,
) -> Result<()> {
    let mut payload = Vec::new();
    for t in tensors {
        payload.reserve(t.len() * 4);
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut header = serde_json::to_value(header).map_err(|e| Error::format(PREAMBLE as u64, e.to_string()))?;
    let Some(fields) = header.as_object_mut() else {
        return Err(Error::format(PREAMBLE as u64, "header must be a JSON object"));
    };
    fields.insert(CHECKSUM_KEY.into(), digest(&payload).into());
    let header = serde_json::to_string_pretty(&header).expect("JSON value serializes");

    out.write_all(magic)?;
    out.write_all(&version.to_le_bytes())?;
    let len = u32::try_from(header.len()).map_err(|_| Error::format(8, "header too large"))?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(header.as_bytes())?;
    out.write_all(&payload)?;
    Ok(())
}

pub(crate) struct Frame<'a> {
    pub header: &'a str,
    pub payload: &'a [u8],
    pub payload_offset: u64,
}

pub(crate) fn read_frame<'a>(bytes: &'a [u8], magic: &[u8; 4], version: u32) -> Result<Frame<'a>> {
    if bytes.len() < PREAMBLE {
        return Err(Error::format(bytes.len() as u64, "truncated preamble"));
    }
    if &bytes[0..4] != magic {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected {:?}", &bytes[0..4], std::str::from_utf8(magic).unwrap_or("?")),
        ));
    }
    let found = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if found != version {
        return Err(Error::format(4, format!("unsupported version {found}, expected {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header_end = PREAMBLE
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::format(bytes.len() as u64, format!("truncated header, declared {header_len} bytes")))?;
    let header = std::str::from_utf8(&bytes[PREAMBLE..header_end])
        .map_err(|e| Error::format((PREAMBLE + e.valid_up_to()) as u64, "header is not UTF-8"))?;
    let frame = Frame {
        header,
        payload: &bytes[header_end..],
        payload_offset: header_end as u64,
    };
    let value: serde_json::Value = frame.parse_header()?;
    match value.get(CHECKSUM_KEY).and_then(|v| v.as_str()) {
        None => Err(Error::format(PREAMBLE as u64, format!("header lacks {CHECKSUM_KEY}"))),
        Some(want) if want != digest(frame.payload) => {
            Err(Error::format(frame.payload_offset, "payload checksum mismatch"))
        }
        Some(_) => Ok(frame),
    }
}

impl Frame<'_> {
    pub fn parse_header<H: serde::de::DeserializeOwned>(&self) -> Result<H> {
        serde_json::from_str(self.header).map_err(|e| Error::format(PREAMBLE as u64, format!("bad header: {e}")))
    }

    /// Decodes every listed tensor. Entries must tile the payload exactly.
    pub fn tensors(&self, entries: &[TensorEntry]) -> Result<Vec<Tensor>> {
        let mut expected_offset = 0u64;
        let mut out = Vec::with_capacity(entries.len());
        for e in entries {
            let at = self.payload_offset + e.offset;
            if e.offset != expected_offset {
                return Err(Error::format(at, format!("tensor {} at unexpected offset", e.name)));
            }
            let len = check_shape(&e.shape).map_err(|err| Error::format(at, format!("tensor {}: {err}", e.name)))?;
            if len != e.len {
                return Err(Error::format(at, format!("tensor {} length disagrees with its shape", e.name)));
            }
            let start = e.offset as usize;
            let end = start + 4 * len;
            if end > self.payload.len() {
                return Err(Error::format(
                    self.payload_offset + self.payload.len() as u64,
                    format!("truncated payload in tensor {}", e.name),
                ));
            }
            let data = self.payload[start..end]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            out.push(Tensor::new(&e.shape, data)?);
            expected_offset = end as u64;
        }
        if expected_offset as usize != self.payload.len() {
            return Err(Error::format(
                self.payload_offset + expected_offset,
                format!("{} trailing payload bytes", self.payload.len() - expected_offset as usize),
            ));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Header {
        tensors: Vec<TensorEntry>,
    }

    fn sample() -> Vec<u8> {
        let t = Tensor::new(&[2], vec![1.5f32, -2.0]).unwrap();
        let header = Header {
            tensors: layout([("t".to_string(), &t)]),
        };
        let mut buf = Vec::new();
        write_frame(&mut buf, b"TEST", 3, &header, [&t]).unwrap();
        buf
    }

    #[test]
    fn round_trip() {
        let bytes = sample();
        let frame = read_frame(&bytes, b"TEST", 3).unwrap();
        let header: Header = frame.parse_header().unwrap();
        let ts = frame.tensors(&header.tensors).unwrap();
        assert_eq!(ts[0].data(), &[1.5, -2.0]);
    }

    #[test]
    fn rejects_magic_version_and_truncation() {
        let mut bytes = sample();
        assert!(matches!(read_frame(&bytes, b"NOPE", 3), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(read_frame(&bytes, b"TEST", 4), Err(Error::Format { offset: 4, .. })));
        assert!(read_frame(&bytes[..6], b"TEST", 3).is_err());
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(read_frame(&bytes, b"TEST", 3), Err(Error::Format { .. })));
    }

    #[test]
    fn payload_bit_flip_is_caught() {
        let mut bytes = sample();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x01;
        let err = read_frame(&bytes, b"TEST", 3).err().unwrap();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn tiling_is_enforced() {
        let bytes = sample();
        let frame = read_frame(&bytes, b"TEST", 3).unwrap();
        let mut header: Header = frame.parse_header().unwrap();
        header.tensors[0].shape = vec![1];
        header.tensors[0].len = 1;
        assert!(matches!(frame.tensors(&header.tensors), Err(Error::Format { .. })));
    }
}
