use crate::error::{Error, Result};

/// Name of the tap that exposes the input image itself.
pub const DATA_TAP: &str = "data";

/// One convolution stage: `kernel × kernel` conv with zero padding, rectifier,
/// then `pool × pool` average pooling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pool: usize,
}

impl LayerSpec {
    pub fn new(name: &str, in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pool: usize) -> Self {
        Self {
            name: name.to_string(),
            in_channels,
            out_channels,
            kernel,
            stride,
            pool,
        }
    }

    pub fn padding(&self) -> usize {
        self.kernel / 2
    }

    /// Output size along one axis for an input of size `n`.
    pub fn output_len(&self, n: usize) -> usize {
        let conv = (n - 1) / self.stride + 1;
        conv / self.pool
    }

    pub fn conv_len(&self, n: usize) -> usize {
        (n - 1) / self.stride + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Softmax,
    /// Raw linear outputs (regression heads).
    Linear,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadSpec {
    pub name: String,
    pub k: usize,
    pub kind: HeadKind,
}

impl HeadSpec {
    pub fn softmax(name: &str, k: usize) -> Self {
        Self {
            name: name.to_string(),
            k,
            kind: HeadKind::Softmax,
        }
    }

    pub fn linear(name: &str, k: usize) -> Self {
        Self {
            name: name.to_string(),
            k,
            kind: HeadKind::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetConfig {
    pub layers: Vec<LayerSpec>,
    /// Layer names (plus [`DATA_TAP`]) concatenated into the hypercolumn, in order.
    pub taps: Vec<String>,
    pub head_width: usize,
    pub heads: Vec<HeadSpec>,
    pub samples_per_image: usize,
}

impl NetConfig {
    /// Four 3×3 conv layers (1→16→32→64→64) with ×2 pooling after the first
    /// three, every layer tapped, and a 64-wide hidden layer.
    pub fn desk_default(heads: Vec<HeadSpec>) -> Self {
        Self {
            layers: vec![
                LayerSpec::new("conv1", 1, 16, 3, 1, 2),
                LayerSpec::new("conv2", 16, 32, 3, 1, 2),
                LayerSpec::new("conv3", 32, 64, 3, 1, 2),
                LayerSpec::new("conv4", 64, 64, 3, 1, 1),
            ],
            taps: ["data", "conv1", "conv2", "conv3", "conv4"].map(String::from).to_vec(),
            head_width: 64,
            heads,
            samples_per_image: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let mut channels = 1;
        for (i, l) in self.layers.iter().enumerate() {
            if l.name.is_empty() || l.name == DATA_TAP {
                return bad(format!("layer {i} has a reserved or empty name"));
            }
            if self.layers[..i].iter().any(|p| p.name == l.name) {
                return bad(format!("duplicate layer name `{}`", l.name));
            }
            if l.in_channels != channels {
                return bad(format!(
                    "layer `{}` expects {} input channels but receives {channels}",
                    l.name, l.in_channels
                ));
            }
            if l.out_channels == 0 || l.kernel == 0 || l.kernel % 2 == 0 || l.stride == 0 || l.pool == 0 {
                return bad(format!("layer `{}` needs positive channels/stride/pool and an odd kernel", l.name));
            }
            channels = l.out_channels;
        }
        if self.taps.is_empty() {
            return bad("taps must not be empty".into());
        }
        for (i, t) in self.taps.iter().enumerate() {
            if self.tap_layer(t).is_none() {
                return bad(format!("unknown tap `{t}`"));
            }
            if self.taps[..i].contains(t) {
                return bad(format!("duplicate tap `{t}`"));
            }
        }
        if self.head_width == 0 {
            return bad("head_width must be positive".into());
        }
        if self.heads.is_empty() {
            return bad("at least one head is required".into());
        }
        for h in &self.heads {
            let min = if h.kind == HeadKind::Softmax { 2 } else { 1 };
            if h.k < min {
                return bad(format!("head `{}` has too few outputs ({})", h.name, h.k));
            }
        }
        if self.samples_per_image == 0 {
            return bad("samples_per_image must be positive".into());
        }
        Ok(())
    }

    /// `Some(None)` for the data tap, `Some(Some(i))` for layer `i`.
    pub fn tap_layer(&self, tap: &str) -> Option<Option<usize>> {
        if tap == DATA_TAP {
            return Some(None);
        }
        self.layers.iter().position(|l| l.name == tap).map(Some)
    }

    pub fn tap_channels(&self, tap: &str) -> usize {
        match self.tap_layer(tap) {
            Some(Some(i)) => self.layers[i].out_channels,
            _ => 1,
        }
    }

    pub fn descriptor_len(&self) -> usize {
        self.taps.iter().map(|t| self.tap_channels(t)).sum()
    }

    /// Offset of each tap's slice inside the hypercolumn descriptor.
    pub fn tap_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.taps
            .iter()
            .map(|t| {
                let o = off;
                off += self.tap_channels(t);
                o
            })
            .collect()
    }

    /// Receptive field `S` of the deepest layer, in input pixels.
    pub fn receptive_field(&self) -> usize {
        let mut rf = 1;
        let mut jump = 1;
        for l in &self.layers {
            rf += (l.kernel - 1) * jump;
            jump *= l.stride;
            rf += (l.pool - 1) * jump;
            jump *= l.pool;
        }
        rf
    }

    /// Smallest square input for which every layer produces at least one cell.
    pub fn min_input(&self) -> usize {
        (1..)
            .find(|&n| {
                let mut len = n;
                self.layers.iter().all(|l| {
                    len = l.output_len(len);
                    len >= 1
                })
            })
            .unwrap_or(1)
    }

    /// Affine map `image = scale · grid + offset` for the map at `layer`
    /// (`None` for the input).
    pub fn grid_transform(&self, layer: Option<usize>) -> (f64, f64) {
        let (mut scale, mut offset) = (1.0, 0.0);
        if let Some(last) = layer {
            for l in &self.layers[..=last] {
                scale *= l.stride as f64;
                offset += scale * (l.pool as f64 - 1.0) / 2.0;
                scale *= l.pool as f64;
            }
        }
        (scale, offset)
    }
}
