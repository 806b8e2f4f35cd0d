//! Binary dumps of predicted histogram fields.
//!
//! Layout: magic `HFLD`, `u32` version, width, height and channel count, then
//! per channel its name, K and bin spec (kind name, spec K, sigma, mu, range
//! as `f64`), then row-major per-pixel distributions as `f32`, channels
//! interleaved per pixel. Integers are little-endian `u32`.

use std::path::Path;

use crate::coding::Coding;
use crate::error::{Error, Result};
use crate::field::{FieldChannel, HistogramField};
use crate::histo::{BinKind, BinSpec};

pub const FIELD_MAGIC: &[u8; 4] = b"HFLD";
pub const FIELD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub field: HistogramField,
    /// Bin layout of each channel, in channel order.
    pub specs: Vec<BinSpec>,
}

impl FieldDump {
    pub fn from_coding(field: HistogramField, coding: &Coding) -> Result<Self> {
        let specs: Vec<BinSpec> = coding.tables().iter().map(|t| *t.spec()).collect();
        if specs.len() != field.channels().len() {
            return Err(Error::LengthMismatch {
                what: "field channels",
                expected: specs.len(),
                found: field.channels().len(),
            });
        }
        Ok(Self { field, specs })
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_field(dump: &FieldDump) -> Vec<u8> {
    let f = &dump.field;
    let mut out = FIELD_MAGIC.to_vec();
    put_u32(&mut out, FIELD_VERSION as usize);
    put_u32(&mut out, f.width());
    put_u32(&mut out, f.height());
    put_u32(&mut out, f.channels().len());
    for (ch, spec) in f.channels().iter().zip(&dump.specs) {
        put_u32(&mut out, ch.name.len());
        out.extend_from_slice(ch.name.as_bytes());
        put_u32(&mut out, ch.k);
        let kind = spec.kind.name();
        put_u32(&mut out, kind.len());
        out.extend_from_slice(kind.as_bytes());
        put_u32(&mut out, spec.k);
        for v in [spec.sigma, spec.mu, spec.range.0, spec.range.1] {
            put_f64(&mut out, v);
        }
    }
    for p in 0..f.len() {
        for ch in f.channels() {
            for v in ch.dist(p) {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::UnexpectedEof)?;
        let s = self.bytes.get(self.pos..end).ok_or(Error::UnexpectedEof)?;
        self.pos = end;
        Ok(s)
    }

    fn len(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as f64)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::ShapeMismatch("header text is not UTF-8".into()))
    }
}

pub fn decode_field(bytes: &[u8]) -> Result<FieldDump> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != FIELD_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.len()? as u32;
    if version != FIELD_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FIELD_VERSION,
        });
    }
    let (w, h, n) = (r.len()?, r.len()?, r.len()?);
    let mut channels = Vec::new();
    let mut specs = Vec::new();
    for _ in 0..n {
        let name = r.string()?;
        let k = r.len()?;
        let kind_name = r.string()?;
        let kind = BinKind::from_name(&kind_name)
            .ok_or_else(|| Error::ShapeMismatch(format!("unknown bin kind `{kind_name}`")))?;
        let spec_k = r.len()?;
        let (sigma, mu, lo, hi) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        specs.push(BinSpec {
            kind,
            k: spec_k,
            sigma,
            mu,
            range: (lo, hi),
        });
        let cells = w.checked_mul(h).and_then(|c| c.checked_mul(k)).ok_or(Error::UnexpectedEof)?;
        if cells > bytes.len() {
            return Err(Error::UnexpectedEof);
        }
        channels.push(FieldChannel {
            name,
            k,
            data: Vec::with_capacity(cells),
        });
    }
    for _ in 0..w * h {
        for ch in channels.iter_mut() {
            for _ in 0..ch.k {
                ch.data.push(r.f32()?);
            }
        }
    }
    Ok(FieldDump {
        field: HistogramField::new(w, h, channels)?,
        specs,
    })
}

pub fn save_field(dump: &FieldDump, path: &Path) -> Result<()> {
    std::fs::write(path, encode_field(dump)).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn load_field(path: &Path) -> Result<FieldDump> {
    let bytes = std::fs::read(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_field(&bytes)
}
