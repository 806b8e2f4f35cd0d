use crate::error::{Error, Result};

/// Tolerance on the per-pixel normalization of a field.
pub const FIELD_NORM_TOL: f64 = 1e-6;

/// One named channel of per-pixel `k`-bin distributions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldChannel {
    pub name: String,
    pub k: usize,
    pub data: Vec<f64>,
}

impl FieldChannel {
    pub fn dist(&self, pixel: usize) -> &[f64] {
        &self.data[pixel * self.k..(pixel + 1) * self.k]
    }

    pub fn dist_mut(&mut self, pixel: usize) -> &mut [f64] {
        &mut self.data[pixel * self.k..(pixel + 1) * self.k]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.k)
    }
}

/// Dense per-pixel color distributions for an image.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramField {
    width: usize,
    height: usize,
    channels: Vec<FieldChannel>,
}

impl HistogramField {
    pub fn new(width: usize, height: usize, channels: Vec<FieldChannel>) -> Result<Self> {
        let n = width * height;
        for ch in &channels {
            if ch.k == 0 || ch.data.len() != n * ch.k {
                return Err(Error::LengthMismatch {
                    what: "field channel",
                    expected: n * ch.k,
                    found: ch.data.len(),
                });
            }
            for dist in ch.pixels() {
                let sum: f64 = dist.iter().sum();
                if dist.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > FIELD_NORM_TOL {
                    return Err(Error::NotNormalized { sum });
                }
            }
        }
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> &[FieldChannel] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Result<&FieldChannel> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    pub fn into_channels(self) -> Vec<FieldChannel> {
        self.channels
    }
}
