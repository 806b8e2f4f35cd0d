use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{HeadKind, NetConfig};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// A `channels × height × width` activation map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, width: usize, height: usize) -> Self {
        Self {
            channels,
            width,
            height,
            data: vec![0.0; channels * width * height],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }
}

/// A named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Network parameters in declaration order: for every conv layer its weight
/// `[out, in, k, k]` and bias `[out]`, then the hidden layer `[width, D]` /
/// `[width]`, then each head `[K, width]` / `[K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: NetConfig,
    params: Vec<Param>,
}

/// Per-tap feature maps of one forward pass, in layer order with the input
/// map first.
#[derive(Debug, Clone)]
pub struct Features {
    pub maps: Vec<FeatureMap>,
}

impl Features {
    /// Map for a tap index of the config (`None` is the input image).
    pub fn map(&self, layer: Option<usize>) -> &FeatureMap {
        match layer {
            None => &self.maps[0],
            Some(i) => &self.maps[i + 1],
        }
    }
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    /// Rectified conv outputs before pooling.
    pub rectified: Vec<FeatureMap>,
    pub features: Features,
}

/// Result of running the hidden layer and the heads on one descriptor.
#[derive(Debug, Clone)]
pub(crate) struct HeadPass {
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub outputs: Vec<Vec<f64>>,
}

fn xavier(name: String, shape: Vec<usize>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Param {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
    Param { name, shape, data }
}

fn zeros(name: String, len: usize) -> Param {
    Param {
        name,
        shape: vec![len],
        data: vec![0.0; len],
    }
}

/// Xavier-uniform weights and zero biases, deterministic in `seed`.
pub fn init_model(cfg: &NetConfig, seed: u64) -> Result<Model> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    for l in &cfg.layers {
        let kk = l.kernel * l.kernel;
        params.push(xavier(
            format!("{}.weight", l.name),
            vec![l.out_channels, l.in_channels, l.kernel, l.kernel],
            l.in_channels * kk,
            l.out_channels * kk,
            &mut rng,
        ));
        params.push(zeros(format!("{}.bias", l.name), l.out_channels));
    }
    let d = cfg.descriptor_len();
    params.push(xavier("hidden.weight".into(), vec![cfg.head_width, d], d, cfg.head_width, &mut rng));
    params.push(zeros("hidden.bias".into(), cfg.head_width));
    for h in &cfg.heads {
        params.push(xavier(
            format!("head.{}.weight", h.name),
            vec![h.k, cfg.head_width],
            cfg.head_width,
            h.k,
            &mut rng,
        ));
        params.push(zeros(format!("head.{}.bias", h.name), h.k));
    }
    Ok(Model {
        config: cfg.clone(),
        params,
    })
}

impl Model {
    /// Assembles a model from explicit parameters, checking every shape.
    pub fn from_params(config: NetConfig, params: Vec<Param>) -> Result<Self> {
        let template = init_model(&config, 0)?;
        if template.params.len() != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameter tensors, found {}",
                template.params.len(),
                params.len()
            )));
        }
        for (t, p) in template.params.iter().zip(&params) {
            if t.shape != p.shape || p.data.len() != t.data.len() {
                return Err(Error::ShapeMismatch(format!(
                    "`{}` expected shape {:?}, found {:?}",
                    t.name, t.shape, p.shape
                )));
            }
            if p.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!("`{}` has non-finite values", p.name)));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub(crate) fn conv_weight(&self, layer: usize) -> &[f64] {
        &self.params[2 * layer].data
    }

    pub(crate) fn conv_bias(&self, layer: usize) -> &[f64] {
        &self.params[2 * layer + 1].data
    }

    pub(crate) fn hidden_index(&self) -> usize {
        2 * self.config.layers.len()
    }

    pub(crate) fn head_index(&self, head: usize) -> usize {
        self.hidden_index() + 2 + 2 * head
    }

    /// Runs every conv layer and returns each tap's map at native resolution.
    pub fn forward_features(&self, img: &GrayImage) -> Result<Features> {
        Ok(self.forward_cached(img)?.features)
    }

    pub(crate) fn forward_cached(&self, img: &GrayImage) -> Result<ForwardCache> {
        let min = self.config.min_input();
        if img.width() < min || img.height() < min {
            return Err(Error::ImageTooSmall {
                width: img.width(),
                height: img.height(),
                min,
            });
        }
        let mut maps = vec![FeatureMap {
            channels: 1,
            width: img.width(),
            height: img.height(),
            data: img.data().to_vec(),
        }];
        let mut rectified = Vec::with_capacity(self.config.layers.len());
        for (li, layer) in self.config.layers.iter().enumerate() {
            let input = maps.last().expect("input map");
            let mut conv = conv_forward(input, layer, self.conv_weight(li), self.conv_bias(li));
            conv.data.iter_mut().for_each(|v| *v = v.max(0.0));
            let pooled = avg_pool(&conv, layer.pool);
            rectified.push(conv);
            maps.push(pooled);
        }
        Ok(ForwardCache {
            rectified,
            features: Features { maps },
        })
    }

    pub(crate) fn head_pass(&self, descriptor: &[f64]) -> Result<HeadPass> {
        let d = self.config.descriptor_len();
        if descriptor.len() != d {
            return Err(Error::LengthMismatch {
                what: "hypercolumn descriptor",
                expected: d,
                found: descriptor.len(),
            });
        }
        let hi = self.hidden_index();
        let w = &self.params[hi].data;
        let b = &self.params[hi + 1].data;
        let hidden_pre: Vec<f64> = (0..self.config.head_width)
            .map(|j| b[j] + dot(&w[j * d..(j + 1) * d], descriptor))
            .collect();
        let hidden: Vec<f64> = hidden_pre.iter().map(|v| v.max(0.0)).collect();
        let outputs = self
            .config
            .heads
            .iter()
            .enumerate()
            .map(|(h, spec)| {
                let idx = self.head_index(h);
                let hw = &self.params[idx].data;
                let hb = &self.params[idx + 1].data;
                let width = self.config.head_width;
                let logits: Vec<f64> = (0..spec.k)
                    .map(|k| hb[k] + dot(&hw[k * width..(k + 1) * width], &hidden))
                    .collect();
                match spec.kind {
                    HeadKind::Softmax => softmax(&logits),
                    HeadKind::Linear => logits,
                }
            })
            .collect();
        Ok(HeadPass {
            hidden_pre,
            hidden,
            outputs,
        })
    }

    /// Hidden rectified layer followed by one output vector per head.
    pub fn head_predict(&self, descriptor: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.head_pass(descriptor)?.outputs)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn conv_forward(
    input: &FeatureMap,
    layer: &super::config::LayerSpec,
    weight: &[f64],
    bias: &[f64],
) -> FeatureMap {
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding() as isize);
    let ow = layer.conv_len(input.width);
    let oh = layer.conv_len(input.height);
    let mut out = FeatureMap::zeros(layer.out_channels, ow, oh);
    let (iw, ih) = (input.width as isize, input.height as isize);
    for o in 0..layer.out_channels {
        let plane = out.plane_mut(o);
        plane.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..layer.in_channels {
            let src = input.plane(i);
            let wbase = (o * layer.in_channels + i) * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weight[wbase + ky * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= ih {
                            continue;
                        }
                        let row = &src[iy as usize * input.width..];
                        let dst = &mut plane[oy * ow..(oy + 1) * ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * s + kx) as isize - p;
                            if ix >= 0 && ix < iw {
                                *d += wv * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn avg_pool(input: &FeatureMap, factor: usize) -> FeatureMap {
    if factor == 1 {
        return input.clone();
    }
    let ow = input.width / factor;
    let oh = input.height / factor;
    let mut out = FeatureMap::zeros(input.channels, ow, oh);
    let norm = 1.0 / (factor * factor) as f64;
    for c in 0..input.channels {
        let src = input.plane(c);
        let dst = out.plane_mut(c);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for dy in 0..factor {
                    let row = (oy * factor + dy) * input.width + ox * factor;
                    acc += src[row..row + factor].iter().sum::<f64>();
                }
                dst[oy * ow + ox] = acc * norm;
            }
        }
    }
    out
}
