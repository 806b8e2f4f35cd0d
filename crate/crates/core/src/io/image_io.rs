//! 8-bit PNG and binary PPM/PGM codecs.

use std::io::Cursor;
use std::path::Path;

use crate::colorspace::desaturate;
use crate::error::{Error, Result};
use crate::image::{GrayImage, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Rgb(RgbImage),
    Gray(GrayImage),
}

impl Image {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Image::Rgb(i) => i.dims(),
            Image::Gray(i) => i.dims(),
        }
    }

    /// Gray images are replicated into all three channels.
    pub fn into_rgb(self) -> RgbImage {
        match self {
            Image::Rgb(i) => i,
            Image::Gray(g) => RgbImage::from_gray(&g),
        }
    }

    /// Color images are reduced to their lightness `(R+G+B)/3`.
    pub fn into_gray(self) -> GrayImage {
        match self {
            Image::Rgb(i) => desaturate(&i),
            Image::Gray(g) => g,
        }
    }
}

impl From<RgbImage> for Image {
    fn from(i: RgbImage) -> Self {
        Image::Rgb(i)
    }
}

impl From<GrayImage> for Image {
    fn from(i: GrayImage) -> Self {
        Image::Gray(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Png,
    Pnm,
}

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn format_for(path: &Path) -> Result<Format> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(Format::Png),
        "ppm" | "pgm" | "pnm" => Ok(Format::Pnm),
        _ => Err(format_error(path, format!("unsupported format `.{ext}`"))),
    }
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn from_bytes(path: &Path, w: usize, h: usize, channels: usize, bytes: &[u8], maxval: f64) -> Result<Image> {
    let data: Vec<f64> = bytes.iter().map(|b| (*b as f64 / maxval).min(1.0)).collect();
    let img = match channels {
        1 => GrayImage::new(w, h, data).map(Image::Gray),
        _ => RgbImage::new(w, h, data).map(Image::Rgb),
    };
    img.map_err(|e| format_error(path, e.to_string()))
}

/// Loads a PNG, PPM (P6) or PGM (P5) file, sniffing the format from its
/// leading bytes.
pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| format_error(path, e.to_string()))?;
    decode_image(&bytes, path)
}

/// Decodes an in-memory file. `path` is only used in error messages.
pub fn decode_image(bytes: &[u8], path: &Path) -> Result<Image> {
    if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes, path)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes, path)
    } else {
        Err(format_error(path, "unsupported format"))
    }
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<Image> {
    let mut reader = png::Decoder::new(Cursor::new(bytes))
        .read_info()
        .map_err(|e| format_error(path, e.to_string()))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(format_error(path, "unsupported bit depth"));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => return Err(format_error(path, format!("unsupported color type {other:?}"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_error(path, "image too large"))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| format_error(path, e.to_string()))?;
    buf.truncate(frame.buffer_size());
    from_bytes(path, w, h, channels, &buf, 255.0)
}

/// Reads the next header token, skipping whitespace and `#` comments.
fn pnm_token<'a>(bytes: &'a [u8], pos: &mut usize, path: &Path) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|b| *b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(format_error(path, "truncated header")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn pnm_number(bytes: &[u8], pos: &mut usize, path: &Path) -> Result<usize> {
    let tok = pnm_token(bytes, pos, path)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_error(path, "malformed header"))
}

fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Image> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut pos = 2;
    let w = pnm_number(bytes, &mut pos, path)?;
    let h = pnm_number(bytes, &mut pos, path)?;
    let maxval = pnm_number(bytes, &mut pos, path)?;
    if maxval == 0 || maxval > 255 {
        return Err(format_error(path, "unsupported bit depth"));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(format_error(path, "truncated file"));
    }
    pos += 1;
    let need = w * h * channels;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| format_error(path, "truncated file"))?;
    from_bytes(path, w, h, channels, raster, maxval as f64)
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let (w, h) = img.dims();
    let (color, data) = match img {
        Image::Rgb(i) => (png::ColorType::Rgb, i.data()),
        Image::Gray(g) => (png::ColorType::Grayscale, g.data()),
    };
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let bytes: Vec<u8> = data.iter().map(|v| to_byte(*v)).collect();
    let encode = |e: png::EncodingError| Error::InvalidImage(e.to_string());
    let mut writer = enc.write_header().map_err(encode)?;
    writer.write_image_data(&bytes).map_err(encode)?;
    writer.finish().map_err(encode)?;
    Ok(out)
}

pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let (w, h) = img.dims();
    let (magic, data) = match img {
        Image::Rgb(i) => ("P6", i.data()),
        Image::Gray(g) => ("P5", g.data()),
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.extend(data.iter().map(|v| to_byte(*v)));
    out
}

/// Writes PNG or PPM/PGM depending on the extension.
pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    let bytes = match format_for(path)? {
        Format::Png => encode_png(img)?,
        Format::Pnm => encode_pnm(img),
    };
    std::fs::write(path, bytes).map_err(|e| format_error(path, e.to_string()))
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    save_image(&Image::Rgb(img.clone()), path)
}

pub fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    save_image(&Image::Gray(img.clone()), path)
}
