//! Binary model checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//! magic `HCLR`, version, config length + config text, tensor count, then per
//! tensor its name length + name, rank and dims, and finally every parameter
//! as little-endian `f32` in declaration order.

use std::path::Path;

use super::config::{parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::net::{Model, Param};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HCLR";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model together with the run configuration it was trained under.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(config: RunConfig, model: Model) -> Result<Self> {
        if model.config() != &config.net {
            return Err(Error::ShapeMismatch("model does not match the run config".into()));
        }
        Ok(Self { config, model })
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut out = CHECKPOINT_MAGIC.to_vec();
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let text = ckpt.config.to_text();
    put_u32(&mut out, text.len());
    out.extend_from_slice(text.as_bytes());
    let params = ckpt.model.params();
    put_u32(&mut out, params.len());
    for p in params {
        put_u32(&mut out, p.name.len());
        out.extend_from_slice(p.name.as_bytes());
        put_u32(&mut out, p.shape.len());
        for d in &p.shape {
            put_u32(&mut out, *d);
        }
    }
    for p in params {
        for v in &p.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::UnexpectedEof)?;
        let s = self.bytes.get(self.pos..end).ok_or(Error::UnexpectedEof)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        self.u32().map(|v| v as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::ShapeMismatch("header text is not UTF-8".into()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let config = parse_config(&c.string()?)?;
    let count = c.len()?;
    let mut headers = Vec::new();
    for _ in 0..count.min(bytes.len()) {
        let name = c.string()?;
        let rank = c.len()?;
        let shape = (0..rank).map(|_| c.len()).collect::<Result<Vec<_>>>()?;
        headers.push((name, shape));
    }
    if headers.len() != count {
        return Err(Error::UnexpectedEof);
    }
    let template = crate::net::init_model(&config.net, 0)?;
    if template.params().len() != count {
        return Err(Error::ShapeMismatch(format!(
            "config implies {} tensors, file has {count}",
            template.params().len()
        )));
    }
    for (t, (name, shape)) in template.params().iter().zip(&headers) {
        if &t.name != name || &t.shape != shape {
            return Err(Error::ShapeMismatch(format!(
                "tensor `{name}` {shape:?} where `{}` {:?} was expected",
                t.name, t.shape
            )));
        }
    }
    let mut params = Vec::with_capacity(count);
    for (name, shape) in headers {
        let n: usize = shape.iter().product();
        let raw = c.take(n.checked_mul(4).ok_or(Error::UnexpectedEof)?)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect();
        params.push(Param { name, shape, data });
    }
    let model = Model::from_params(config.net.clone(), params)?;
    Checkpoint::new(config, model)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ckpt)).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_checkpoint(&bytes)
}
