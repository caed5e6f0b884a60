//! Binary PGM (P5) / PPM (P6) reading and writing.
//!
//! Raw mosaics are stored as P5 with the CFA pattern, and the drop set of an
//! attacked image, carried in header comments:
//!
//! ```text
//! P5
//! # emistrip:pattern=GRBG
//! # emistrip:drops=10,20
//! 640 480
//! 255
//! <samples>
//! ```
//!
//! Samples wider than 8 bits are big-endian 16-bit, as Netpbm prescribes.

use std::fs;
use std::path::Path;

use crate::cfa::{CfaPattern, RawImage, RgbImage};
use crate::drops::DropSet;
use crate::error::{Error, Result};

const TAG: &str = "emistrip:";

/// A decoded Netpbm file of either kind.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Image {
    Raw(RawImage),
    Rgb(RgbImage),
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    max_value: u16,
    meta: Vec<(String, String)>,
    data_start: usize,
}

impl Header {
    fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn fmt_err(path: &str, message: impl Into<String>) -> Error {
    Error::Format { path: path.to_string(), message: message.into() }
}

fn parse_header(bytes: &[u8], path: &str) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(fmt_err(path, "missing Netpbm magic number"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    let mut meta = Vec::new();

    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    let end = bytes[pos..]
                        .iter()
                        .position(|&b| b == b'\n')
                        .map_or(bytes.len(), |i| pos + i);
                    let line = String::from_utf8_lossy(&bytes[pos + 1..end]);
                    if let Some(kv) = line.trim().strip_prefix(TAG) {
                        if let Some((k, v)) = kv.split_once('=') {
                            meta.push((k.trim().to_string(), v.trim().to_string()));
                        }
                    }
                    pos = end;
                }
                Some(_) => break,
                None => return Err(fmt_err(path, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(fmt_err(path, "expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|e| fmt_err(path, format!("header field: {e}")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(fmt_err(path, "missing whitespace after max value")),
    }
    let [width, height, max_value] = fields;
    if max_value == 0 || max_value > 65535 {
        return Err(fmt_err(path, format!("max value {max_value} out of range 1..=65535")));
    }
    Ok(Header { magic, width, height, max_value: max_value as u16, meta, data_start: pos })
}

fn read_samples(bytes: &[u8], header: &Header, count: usize, path: &str) -> Result<Vec<u16>> {
    let wide = header.max_value > 255;
    let need = count * if wide { 2 } else { 1 };
    let data = &bytes[header.data_start..];
    if data.len() < need {
        return Err(fmt_err(path, format!("expected {need} data bytes, found {}", data.len())));
    }
    let samples: Vec<u16> = if wide {
        data[..need].chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()
    } else {
        data[..need].iter().map(|&b| b as u16).collect()
    };
    if let Some(i) = samples.iter().position(|&v| v > header.max_value) {
        return Err(fmt_err(path, format!("sample {i} exceeds max value {}", header.max_value)));
    }
    Ok(samples)
}

fn push_samples(out: &mut Vec<u8>, samples: impl Iterator<Item = u16>, max_value: u16) {
    if max_value > 255 {
        for v in samples {
            out.extend_from_slice(&v.to_be_bytes());
        }
    } else {
        out.extend(samples.map(|v| v as u8));
    }
}

/// Decodes a P5 file into a raw mosaic. The CFA pattern comes from the
/// header comment, or `fallback` when the file has none.
pub fn decode_pgm(bytes: &[u8], fallback: Option<CfaPattern>, path: &str) -> Result<RawImage> {
    let header = parse_header(bytes, path)?;
    if &header.magic != b"P5" {
        return Err(fmt_err(path, "not a binary PGM (P5)"));
    }
    let pattern = match header.meta("pattern") {
        Some(p) => p.parse()?,
        None => fallback.ok_or_else(|| {
            fmt_err(path, "no `# emistrip:pattern=` comment and no pattern given")
        })?,
    };
    let samples = read_samples(bytes, &header, header.width * header.height, path)?;
    let raw = RawImage::new(header.width, header.height, pattern, header.max_value, samples)?;
    let drops = match header.meta("drops") {
        Some(text) => Some(DropSet::parse(text, header.height)?),
        None => None,
    };
    Ok(raw.with_applied_drops(drops))
}

pub fn encode_pgm(raw: &RawImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + raw.samples().len() * 2);
    out.extend_from_slice(b"P5\n");
    out.extend_from_slice(format!("# {TAG}pattern={}\n", raw.pattern()).as_bytes());
    if let Some(d) = raw.applied_drops() {
        out.extend_from_slice(format!("# {TAG}drops={d}\n").as_bytes());
    }
    out.extend_from_slice(
        format!("{} {}\n{}\n", raw.width(), raw.height(), raw.max_value()).as_bytes(),
    );
    push_samples(&mut out, raw.samples().iter().copied(), raw.max_value());
    out
}

pub fn decode_ppm(bytes: &[u8], path: &str) -> Result<RgbImage> {
    let header = parse_header(bytes, path)?;
    if &header.magic != b"P6" {
        return Err(fmt_err(path, "not a binary PPM (P6)"));
    }
    let flat = read_samples(bytes, &header, header.width * header.height * 3, path)?;
    let samples = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    RgbImage::new(header.width, header.height, header.max_value, samples)
}

pub fn encode_ppm(rgb: &RgbImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + rgb.samples().len() * 6);
    out.extend_from_slice(
        format!("P6\n{} {}\n{}\n", rgb.width(), rgb.height(), rgb.max_value()).as_bytes(),
    );
    push_samples(&mut out, rgb.samples().iter().flatten().copied(), rgb.max_value());
    out
}

/// Decodes either kind, dispatching on the magic number.
pub fn decode(bytes: &[u8], fallback: Option<CfaPattern>, path: &str) -> Result<Image> {
    match bytes.get(..2) {
        Some(b"P5") => decode_pgm(bytes, fallback, path).map(Image::Raw),
        Some(b"P6") => decode_ppm(bytes, path).map(Image::Rgb),
        _ => Err(fmt_err(path, "expected a P5 or P6 file")),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_image(path: impl AsRef<Path>, fallback: Option<CfaPattern>) -> Result<Image> {
    let path = path.as_ref();
    decode(&read_bytes(path)?, fallback, &path.display().to_string())
}

pub fn read_pgm(path: impl AsRef<Path>, fallback: Option<CfaPattern>) -> Result<RawImage> {
    let path = path.as_ref();
    decode_pgm(&read_bytes(path)?, fallback, &path.display().to_string())
}

pub fn write_pgm(path: impl AsRef<Path>, raw: &RawImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(raw))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    decode_ppm(&read_bytes(path)?, &path.display().to_string())
}

pub fn write_ppm(path: impl AsRef<Path>, rgb: &RgbImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_ppm(rgb))
}
