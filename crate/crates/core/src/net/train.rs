//! Sparse-sample training: a fixed number of pixel locations per image,
//! bilinear hypercolumns, the configured loss, and backpropagation that
//! scatters each descriptor gradient back onto the feature maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hypercolumn::{gather_with, scatter_with, Stencil};
use super::model::{FeatureMap, Model};
use crate::coding::Coding;
use crate::colorspace::{desaturate, rgb_to_huechroma, rgb_to_lab, HueChroma, Lab};
use crate::error::{Error, Result};
use crate::histo::{
    huechroma_loss, kl_hist_loss, kl_logit_grad, l2_grad, l2_loss, target_histogram, target_histogram_joint,
    LossVariant, TargetHistogram,
};
use crate::image::{GrayImage, RgbImage};

/// A color training image with its grayscale input and per-pixel targets.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub gray: GrayImage,
    pub color: RgbImage,
    huechroma: Vec<HueChroma>,
    lab: Vec<Lab>,
}

impl TrainingExample {
    pub fn new(color: RgbImage) -> Self {
        let gray = desaturate(&color);
        let huechroma = color.pixels().map(rgb_to_huechroma).collect();
        let lab = color.pixels().map(rgb_to_lab).collect();
        Self {
            gray,
            color,
            huechroma,
            lab,
        }
    }

    fn region(&self, x: usize, y: usize, r: usize) -> impl Iterator<Item = usize> + '_ {
        let (w, h) = self.gray.dims();
        let half = (r / 2) as isize;
        let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        (0..r).flat_map(move |dy| {
            (0..r).map(move |dx| {
                let xx = clampi(x as isize - half + dx as isize, w);
                let yy = clampi(y as isize - half + dy as isize, h);
                yy * w + xx
            })
        })
    }
}

/// Training targets of one sampled pixel.
#[derive(Debug, Clone)]
pub struct SampleTargets {
    /// One target histogram per head (empty for the regression variant).
    pub hists: Vec<TargetHistogram>,
    /// Chroma of the center pixel, weighting the hue term.
    pub chroma: f64,
    /// Lab `(a, b)` of the center pixel.
    pub ab: [f64; 2],
}

pub fn sample_targets(coding: &Coding, ex: &TrainingExample, x: usize, y: usize) -> Result<SampleTargets> {
    let center = y * ex.gray.width() + x;
    let r = coding.loss.region;
    let tables = coding.tables();
    let hists = match coding.variant() {
        LossVariant::HueChromaHist => {
            let hues: Vec<f64> = ex.region(x, y, r).map(|i| ex.huechroma[i].hue).collect();
            let chromas: Vec<f64> = ex.region(x, y, r).map(|i| ex.huechroma[i].chroma).collect();
            vec![target_histogram(&hues, &tables[0])?, target_histogram(&chromas, &tables[1])?]
        }
        LossVariant::LabMarginalHist => {
            let a: Vec<f64> = ex.region(x, y, r).map(|i| ex.lab[i].a).collect();
            let b: Vec<f64> = ex.region(x, y, r).map(|i| ex.lab[i].b).collect();
            vec![target_histogram(&a, &tables[0])?, target_histogram(&b, &tables[1])?]
        }
        LossVariant::LabJointHist => {
            let ab: Vec<(f64, f64)> = ex.region(x, y, r).map(|i| (ex.lab[i].a, ex.lab[i].b)).collect();
            vec![target_histogram_joint(&ab, &tables[0])?]
        }
        LossVariant::LabL2 => vec![],
    };
    Ok(SampleTargets {
        hists,
        chroma: ex.huechroma[center].chroma,
        ab: [ex.lab[center].a, ex.lab[center].b],
    })
}

/// Loss of one sample and its gradient with respect to each head's logits
/// (or raw outputs for regression heads).
pub fn sample_loss(coding: &Coding, outputs: &[Vec<f64>], t: &SampleTargets) -> Result<(f64, Vec<Vec<f64>>)> {
    match coding.variant() {
        LossVariant::HueChromaHist => {
            let lambda = coding.loss.lambda_h;
            let loss = huechroma_loss(&outputs[0], &outputs[1], &t.hists[0], &t.hists[1], t.chroma, &coding.loss)?;
            let mut g_hue = kl_logit_grad(&t.hists[0], &outputs[0]);
            g_hue.iter_mut().for_each(|g| *g *= lambda * t.chroma);
            let g_chroma = kl_logit_grad(&t.hists[1], &outputs[1]);
            Ok((loss, vec![g_hue, g_chroma]))
        }
        LossVariant::LabMarginalHist | LossVariant::LabJointHist => {
            let mut loss = 0.0;
            let mut grads = Vec::with_capacity(outputs.len());
            for (out, target) in outputs.iter().zip(&t.hists) {
                loss += kl_hist_loss(target, out)?;
                grads.push(kl_logit_grad(target, out));
            }
            Ok((loss, grads))
        }
        LossVariant::LabL2 => {
            let pred = [outputs[0][0], outputs[0][1]];
            Ok((l2_loss(pred, t.ab), vec![l2_grad(pred, t.ab).to_vec()]))
        }
    }
}

/// Pixel locations drawn for every image of a batch, in batch order.
pub fn sample_locations(batch: &[TrainingExample], per_image: usize, seed: u64) -> Vec<Vec<(usize, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    batch
        .iter()
        .map(|ex| {
            (0..per_image)
                .map(|_| (rng.random_range(0..ex.gray.width()), rng.random_range(0..ex.gray.height())))
                .collect()
        })
        .collect()
}

/// Mean sample loss of a batch, forward pass only.
pub fn batch_loss(model: &Model, batch: &[TrainingExample], coding: &Coding, seed: u64) -> Result<f64> {
    let cfg = model.config();
    let locations = sample_locations(batch, cfg.samples_per_image, seed);
    let mut total = 0.0;
    for (ex, locs) in batch.iter().zip(&locations) {
        let features = model.forward_features(&ex.gray)?;
        for &(x, y) in locs {
            let stencil = Stencil::new(cfg, &features, x as f64, y as f64)?;
            let outputs = model.head_predict(&gather_with(cfg, &features, &stencil))?;
            total += sample_loss(coding, &outputs, &sample_targets(coding, ex, x, y)?)?.0;
        }
    }
    Ok(total / (batch.len() * cfg.samples_per_image) as f64)
}

/// Rectifier on/off pattern of every conv cell and every sampled hidden unit.
/// Two parameter settings with equal patterns lie on the same linear piece of
/// the network.
pub fn activation_pattern(model: &Model, batch: &[TrainingExample], seed: u64) -> Result<Vec<bool>> {
    let cfg = model.config();
    let locations = sample_locations(batch, cfg.samples_per_image, seed);
    let mut pattern = Vec::new();
    for (ex, locs) in batch.iter().zip(&locations) {
        let cache = model.forward_cached(&ex.gray)?;
        for r in &cache.rectified {
            pattern.extend(r.data.iter().map(|v| *v > 0.0));
        }
        for &(x, y) in locs {
            let stencil = Stencil::new(cfg, &cache.features, x as f64, y as f64)?;
            let pass = model.head_pass(&gather_with(cfg, &cache.features, &stencil))?;
            pattern.extend(pass.hidden_pre.iter().map(|v| *v > 0.0));
        }
    }
    Ok(pattern)
}

/// Mean batch loss and its gradient for every parameter tensor.
pub fn compute_gradients(
    model: &Model,
    batch: &[TrainingExample],
    coding: &Coding,
    seed: u64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let cfg = model.config();
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    coding.check_heads(&cfg.heads)?;
    let params = model.params();
    let mut grads: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.data.len()]).collect();
    let locations = sample_locations(batch, cfg.samples_per_image, seed);
    let scale = 1.0 / (batch.len() * cfg.samples_per_image) as f64;
    let d = cfg.descriptor_len();
    let width = cfg.head_width;
    let hi = model.hidden_index();
    let mut loss_sum = 0.0;

    for (image, (ex, locs)) in batch.iter().zip(&locations).enumerate() {
        let cache = model.forward_cached(&ex.gray)?;
        let mut map_grads: Vec<FeatureMap> = cache
            .features
            .maps
            .iter()
            .map(|m| FeatureMap::zeros(m.channels, m.width, m.height))
            .collect();

        for (sample, &(x, y)) in locs.iter().enumerate() {
            let stencil = Stencil::new(cfg, &cache.features, x as f64, y as f64)?;
            let desc = gather_with(cfg, &cache.features, &stencil);
            let pass = model.head_pass(&desc)?;
            let targets = sample_targets(coding, ex, x, y)?;
            let (loss, logit_grads) = sample_loss(coding, &pass.outputs, &targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { image, sample, x, y });
            }
            loss_sum += loss;

            let mut dhidden = vec![0.0; width];
            for (h, lg) in logit_grads.iter().enumerate() {
                let idx = model.head_index(h);
                let w = &params[idx].data;
                for (k, g) in lg.iter().enumerate() {
                    let g = g * scale;
                    if g == 0.0 {
                        continue;
                    }
                    grads[idx + 1][k] += g;
                    let row = k * width;
                    for j in 0..width {
                        grads[idx][row + j] += g * pass.hidden[j];
                        dhidden[j] += g * w[row + j];
                    }
                }
            }

            let w1 = &params[hi].data;
            let mut ddesc = vec![0.0; d];
            for j in 0..width {
                if pass.hidden_pre[j] <= 0.0 || dhidden[j] == 0.0 {
                    continue;
                }
                let g = dhidden[j];
                grads[hi + 1][j] += g;
                let row = j * d;
                for i in 0..d {
                    grads[hi][row + i] += g * desc[i];
                    ddesc[i] += g * w1[row + i];
                }
            }
            scatter_with(cfg, &mut map_grads, &stencil, &ddesc);
        }

        for li in (0..cfg.layers.len()).rev() {
            let layer = &cfg.layers[li];
            let rect = &cache.rectified[li];
            let (lower, upper) = map_grads.split_at_mut(li + 1);
            let pooled_grad = &upper[0];
            let mut gconv = unpool(pooled_grad, layer.pool, rect.width, rect.height);
            for (g, a) in gconv.data.iter_mut().zip(&rect.data) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            let input = &cache.features.maps[li];
            let input_grad = if li > 0 { Some(&mut lower[li]) } else { None };
            let (wg, rest) = grads[2 * li..].split_at_mut(1);
            conv_backward(
                input,
                layer,
                model.conv_weight(li),
                &gconv,
                &mut wg[0],
                &mut rest[0],
                input_grad,
            );
        }
    }
    Ok((loss_sum * scale, grads))
}

/// Gradient of average pooling: each pooled cell's gradient is spread evenly
/// over its window; cells cut off by the floor division receive nothing.
fn unpool(grad: &FeatureMap, factor: usize, width: usize, height: usize) -> FeatureMap {
    if factor == 1 {
        return grad.clone();
    }
    let mut out = FeatureMap::zeros(grad.channels, width, height);
    let norm = 1.0 / (factor * factor) as f64;
    for c in 0..grad.channels {
        let src = grad.plane(c);
        let dst = out.plane_mut(c);
        for oy in 0..grad.height {
            for ox in 0..grad.width {
                let g = src[oy * grad.width + ox] * norm;
                for dy in 0..factor {
                    let row = (oy * factor + dy) * width + ox * factor;
                    dst[row..row + factor].iter_mut().for_each(|v| *v += g);
                }
            }
        }
    }
    out
}

fn conv_backward(
    input: &FeatureMap,
    layer: &super::config::LayerSpec,
    weight: &[f64],
    grad_out: &FeatureMap,
    weight_grad: &mut [f64],
    bias_grad: &mut [f64],
    mut input_grad: Option<&mut FeatureMap>,
) {
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding() as isize);
    let (ow, oh) = (grad_out.width, grad_out.height);
    let (iw, ih) = (input.width as isize, input.height as isize);
    for o in 0..layer.out_channels {
        let g = grad_out.plane(o);
        bias_grad[o] += g.iter().sum::<f64>();
        for i in 0..layer.in_channels {
            let src = input.plane(i);
            let mut src_grad = input_grad.as_deref_mut().map(|m| m.plane_mut(i));
            let wbase = (o * layer.in_channels + i) * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weight[wbase + ky * k + kx];
                    let mut acc = 0.0;
                    for oy in 0..oh {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= ih {
                            continue;
                        }
                        let row = iy as usize * input.width;
                        for ox in 0..ow {
                            let ix = (ox * s + kx) as isize - p;
                            if ix < 0 || ix >= iw {
                                continue;
                            }
                            let go = g[oy * ow + ox];
                            acc += go * src[row + ix as usize];
                            if let Some(sg) = src_grad.as_deref_mut() {
                                sg[row + ix as usize] += go * wv;
                            }
                        }
                    }
                    weight_grad[wbase + ky * k + kx] += acc;
                }
            }
        }
    }
}

/// One vanilla SGD step on a batch. Returns the batch loss measured before
/// the update.
pub fn train_step(model: &mut Model, batch: &[TrainingExample], coding: &Coding, lr: f64, seed: u64) -> Result<f64> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be nonnegative, got {lr}")));
    }
    let (loss, grads) = compute_gradients(model, batch, coding, seed)?;
    if lr > 0.0 {
        for (p, g) in model.params_mut().iter_mut().zip(&grads) {
            for (v, d) in p.data.iter_mut().zip(g) {
                *v -= lr * d;
            }
        }
    }
    Ok(loss)
}
