//! Flat-binary interchange for masks, graphs and gradient fields.
//!
//! Layout: `b"SSGF"`, format version (u32 LE), header length (u32 LE), a
//! UTF-8 JSON header, then the payload. Gradient and graph values are
//! little-endian f32; masks are one byte (0 or 1) per pixel.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::edge_mask::EdgeMask;
use crate::error::{Error, Result};
use crate::loss::GradientField;
use crate::ssg::{sample_offsets_for, Ssg};

pub const MAGIC: &[u8; 4] = b"SSGF";
pub const FORMAT_VERSION: u32 = 1;

/// A decoded field file.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Grad(GradientField),
    Ssg(Ssg),
    Mask(EdgeMask),
}

/// Borrowed view used for encoding.
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Grad(&'a GradientField),
    Ssg(&'a Ssg),
    Mask(&'a EdgeMask),
}

impl Field {
    pub fn kind(&self) -> &'static str {
        self.as_ref().kind()
    }

    pub fn as_ref(&self) -> FieldRef<'_> {
        match self {
            Field::Grad(g) => FieldRef::Grad(g),
            Field::Ssg(s) => FieldRef::Ssg(s),
            Field::Mask(m) => FieldRef::Mask(m),
        }
    }
}

impl FieldRef<'_> {
    pub fn kind(&self) -> &'static str {
        match self {
            FieldRef::Grad(_) => "grad",
            FieldRef::Ssg(_) => "ssg",
            FieldRef::Mask(_) => "mask",
        }
    }
}

pub fn write_field(path: impl AsRef<Path>, field: FieldRef<'_>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(field)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn encode(field: FieldRef<'_>) -> Vec<u8> {
    let mut header = Map::new();
    header.insert("kind".into(), json!(field.kind()));
    let mut payload = Vec::new();
    match field {
        FieldRef::Grad(g) => {
            header.insert("h".into(), json!(g.height));
            header.insert("w".into(), json!(g.width));
            header.insert("c".into(), json!(g.channels));
            payload.reserve(g.data.len() * 4);
            for v in &g.data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        FieldRef::Ssg(s) => {
            header.insert("h".into(), json!(s.height));
            header.insert("w".into(), json!(s.width));
            header.insert("c".into(), json!(s.channels));
            header.insert("Ks".into(), json!(s.search));
            header.insert("Kw".into(), json!(s.window));
            header.insert("h_sim".into(), json!(s.h));
            header.insert("stride".into(), json!(s.stride));
            header.insert("n_centers".into(), json!(s.centers.len()));
            header.insert("n_offsets".into(), json!(s.offsets.len()));
            header.insert("norm_constants".into(), json!(true));
            for &(r, c) in &s.centers {
                payload.extend_from_slice(&(r as u32).to_le_bytes());
                payload.extend_from_slice(&(c as u32).to_le_bytes());
            }
            for &w in s.weights.iter().chain(&s.norm_constants) {
                payload.extend_from_slice(&(w as f32).to_le_bytes());
            }
        }
        FieldRef::Mask(m) => {
            header.insert("h".into(), json!(m.height));
            header.insert("w".into(), json!(m.width));
            header.insert("c".into(), json!(1));
            header.insert("t".into(), json!(finite_or_null(m.threshold)));
            header.insert("Ks".into(), json!(m.search));
            header.insert("Kw".into(), json!(m.window));
            header.insert("edge_fraction".into(), json!(m.edge_fraction));
            payload.extend_from_slice(&m.bits);
        }
    }
    let header = serde_json::to_vec(&Value::Object(header)).expect("header serializes");
    let mut out = Vec::with_capacity(12 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Header(Map<String, Value>);

impl Header {
    fn usize(&self, key: &str) -> Result<usize> {
        self.0
            .get(key)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| format_err(format!("header key {key:?} missing or not an integer")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        match self.0.get(key) {
            Some(Value::Null) => Ok(f64::NAN),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| format_err(format!("header key {key:?} is not a number"))),
            None => Err(format_err(format!("header key {key:?} missing"))),
        }
    }
}

fn f32s(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
    bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn take<'a>(payload: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if payload.len() < n {
        return Err(format_err(format!(
            "payload truncated: need {n} more bytes, have {}",
            payload.len()
        )));
    }
    let (head, rest) = payload.split_at(n);
    *payload = rest;
    Ok(head)
}

pub fn decode(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(format_err("not an SSGF field file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported format version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let mut rest = &bytes[12..];
    let header: Value = serde_json::from_slice(take(&mut rest, header_len)?)
        .map_err(|e| format_err(format!("bad header: {e}")))?;
    let header = match header {
        Value::Object(map) => Header(map),
        _ => return Err(format_err("header is not a JSON object")),
    };
    let kind = header
        .0
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| format_err("header has no kind"))?
        .to_owned();
    let (h, w, c) = (header.usize("h")?, header.usize("w")?, header.usize("c")?);
    let field = match kind.as_str() {
        "grad" => {
            let data = f32s(take(&mut rest, h * w * c * 4)?).collect();
            Field::Grad(GradientField {
                height: h,
                width: w,
                channels: c,
                data,
            })
        }
        "ssg" => {
            let search = header.usize("Ks")?;
            let window = header.usize("Kw")?;
            let stride = header.usize("stride")?;
            let n_centers = header.usize("n_centers")?;
            let n_offsets = header.usize("n_offsets")?;
            if search % 2 == 0 || stride == 0 {
                return Err(format_err("invalid graph geometry"));
            }
            let offsets = sample_offsets_for(search, stride);
            if offsets.len() != n_offsets {
                return Err(format_err(format!(
                    "n_offsets {n_offsets} disagrees with Ks={search}, stride={stride}"
                )));
            }
            let centers = take(&mut rest, n_centers * 8)?
                .chunks_exact(8)
                .map(|b| {
                    let r = u32::from_le_bytes(b[..4].try_into().unwrap());
                    let c = u32::from_le_bytes(b[4..].try_into().unwrap());
                    (r as usize, c as usize)
                })
                .collect();
            let weights = f32s(take(&mut rest, n_centers * n_offsets * 4)?)
                .map(f64::from)
                .collect();
            let has_norm = header.0.get("norm_constants").and_then(Value::as_bool) == Some(true);
            let norm_constants = if has_norm {
                f32s(take(&mut rest, n_centers * 4)?)
                    .map(f64::from)
                    .collect()
            } else {
                Vec::new()
            };
            Field::Ssg(Ssg {
                height: h,
                width: w,
                channels: c,
                search,
                window,
                h: header.f64("h_sim")?,
                stride,
                centers,
                offsets,
                weights,
                norm_constants,
            })
        }
        "mask" => {
            let bits = take(&mut rest, h * w)?.to_vec();
            let mask = EdgeMask::from_bits(
                h,
                w,
                bits,
                header.f64("t")?,
                header.usize("Ks")?,
                header.usize("Kw")?,
            )?;
            Field::Mask(mask)
        }
        other => return Err(format_err(format!("unknown field kind {other:?}"))),
    };
    if !rest.is_empty() {
        return Err(format_err(format!("{} trailing bytes", rest.len())));
    }
    Ok(field)
}
