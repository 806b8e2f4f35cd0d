//! Pulling colorizations toward a reference histogram, and sampling
//! alternative colorizations through global per-bin biases.

use std::f64::consts::TAU;

use crate::coding::Coding;
use crate::colorspace::{rgb_to_huechroma, rgb_to_lab};
use crate::decode::{decode_scalar_channel, pixel_rng, render, DecodePolicy};
use crate::error::{Error, Result};
use crate::field::{FieldChannel, HistogramField};
use crate::histo::{target_histogram, target_histogram_joint, LossVariant, PROB_FLOOR};
use crate::image::{GrayImage, RgbImage};
use crate::net::softmax;

/// Lightness guard used when normalizing RGB by lightness.
pub const LIGHTNESS_EPS: f64 = 1e-4;

/// Sums below this are treated as empty bins by the χ² distance.
const CHI2_FLOOR: f64 = 1e-12;

/// Target histogram for each channel of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetHistogramSet {
    pub channels: Vec<(String, Vec<f64>)>,
}

impl TargetHistogramSet {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_slice())
    }
}

/// Global log-bias added to every pixel's distribution of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasVector {
    pub channel: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferConfig {
    /// Weight of the histogram-matching term.
    pub lambda: f64,
    /// Initial step size; halved on energy increase.
    pub lr: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            lr: 1.0,
            max_iters: 500,
            tol: 1e-6,
        }
    }
}

/// Maximum number of step halvings per descent iteration.
const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone)]
pub struct ChannelTransfer {
    pub bias: BiasVector,
    pub energy: f64,
    /// Energy after every accepted step, starting with `E(0)`.
    pub trace: Vec<f64>,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    pub posterior: HistogramField,
    pub channels: Vec<ChannelTransfer>,
}

impl TransferResult {
    pub fn energy(&self) -> f64 {
        self.channels.iter().map(|c| c.energy).sum()
    }

    pub fn biases(&self) -> Vec<BiasVector> {
        self.channels.iter().map(|c| c.bias.clone()).collect()
    }
}

/// `Σ_k (p_k − q_k)² / (p_k + q_k)`, skipping bins where both are empty.
pub fn symmetric_chi2(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, b)| *a + *b >= CHI2_FLOOR)
        .map(|(a, b)| (a - b) * (a - b) / (a + b))
        .sum()
}

fn chi2_grad(s: &[f64], t: &[f64]) -> Vec<f64> {
    s.iter()
        .zip(t)
        .map(|(s, t)| {
            let sum = s + t;
            if sum < CHI2_FLOOR {
                0.0
            } else {
                (s - t) * (s + 3.0 * t) / (sum * sum)
            }
        })
        .collect()
}

/// Energy of one channel as a function of the bias vector.
pub struct ChannelEnergy<'a> {
    log_pred: Vec<f64>,
    k: usize,
    target: &'a [f64],
    lambda: f64,
}

/// Posteriors, energy and gradient at one bias.
pub struct EnergyEval {
    pub posterior: Vec<f64>,
    pub energy: f64,
    pub grad: Vec<f64>,
}

impl<'a> ChannelEnergy<'a> {
    pub fn new(channel: &FieldChannel, target: &'a [f64], lambda: f64) -> Result<Self> {
        if target.len() != channel.k {
            return Err(Error::LengthMismatch {
                what: "target histogram",
                expected: channel.k,
                found: target.len(),
            });
        }
        let sum: f64 = target.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || target.iter().any(|t| *t < 0.0) {
            return Err(Error::NotNormalized { sum });
        }
        let log_pred = channel.data.iter().map(|p| p.max(PROB_FLOOR).ln()).collect();
        Ok(Self {
            log_pred,
            k: channel.k,
            target,
            lambda,
        })
    }

    pub fn pixels(&self) -> usize {
        self.log_pred.len() / self.k
    }

    pub fn eval(&self, bias: &[f64]) -> EnergyEval {
        let k = self.k;
        let n = self.pixels();
        let inv_n = 1.0 / n as f64;
        let mut posterior = vec![0.0; n * k];
        let mut unary = 0.0;
        let mut mean = vec![0.0; k];
        for (lp, q) in self.log_pred.chunks_exact(k).zip(posterior.chunks_exact_mut(k)) {
            let max = lp.iter().zip(bias).map(|(l, b)| l + b).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..k {
                q[j] = (lp[j] + bias[j] - max).exp();
                z += q[j];
            }
            let log_z = max + z.ln();
            for j in 0..k {
                q[j] /= z;
                // log q - log p = b - log Z
                unary += q[j] * (bias[j] - log_z);
                mean[j] += q[j] * inv_n;
            }
        }
        unary *= inv_n;
        let chi = symmetric_chi2(&mean, self.target);
        let g_chi = chi2_grad(&mean, self.target);
        let v: Vec<f64> = bias.iter().zip(&g_chi).map(|(b, g)| b + self.lambda * g).collect();
        let mut grad = vec![0.0; k];
        for q in posterior.chunks_exact(k) {
            let qv: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            for j in 0..k {
                grad[j] += q[j] * (v[j] - qv) * inv_n;
            }
        }
        EnergyEval {
            posterior,
            energy: unary + self.lambda * chi,
            grad,
        }
    }

    /// Gradient descent on the bias from zero with step halving on increase.
    pub fn minimize(&self, cfg: &TransferConfig) -> Result<(Vec<f64>, EnergyEval, Vec<f64>)> {
        let mut bias = vec![0.0; self.k];
        let mut current = self.eval(&bias);
        if !current.energy.is_finite() {
            return Err(Error::NonFiniteEnergy { iteration: 0 });
        }
        let mut trace = vec![current.energy];
        for iteration in 1..=cfg.max_iters {
            if norm(&current.grad) < cfg.tol {
                break;
            }
            let mut step = cfg.lr;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let candidate: Vec<f64> = bias.iter().zip(&current.grad).map(|(b, g)| b - step * g).collect();
                let eval = self.eval(&candidate);
                if !eval.energy.is_finite() {
                    return Err(Error::NonFiniteEnergy { iteration });
                }
                if eval.energy <= current.energy {
                    accepted = Some((candidate, eval));
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                Some((b, eval)) => {
                    let improved = eval.energy < current.energy;
                    bias = b;
                    current = eval;
                    trace.push(current.energy);
                    if !improved {
                        break;
                    }
                }
                None => break,
            }
        }
        Ok((bias, current, trace))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits a global bias per channel so that the mean posterior histogram
/// approaches the target while staying close to the per-pixel predictions.
pub fn energy_minimize(
    field: &HistogramField,
    targets: &TargetHistogramSet,
    cfg: &TransferConfig,
) -> Result<TransferResult> {
    if !(cfg.lambda >= 0.0) || !(cfg.lr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "transfer needs lambda >= 0 and lr > 0 (got {}, {})",
            cfg.lambda, cfg.lr
        )));
    }
    if field.is_empty() {
        return Err(Error::Empty("histogram field"));
    }
    let mut channels = Vec::new();
    let mut results = Vec::new();
    for ch in field.channels() {
        let Some(target) = targets.get(&ch.name) else {
            channels.push(ch.clone());
            continue;
        };
        let energy = ChannelEnergy::new(ch, target, cfg.lambda)?;
        let (bias, eval, trace) = energy.minimize(cfg)?;
        results.push(ChannelTransfer {
            bias: BiasVector {
                channel: ch.name.clone(),
                values: bias,
            },
            energy: eval.energy,
            grad_norm: norm(&eval.grad),
            trace,
        });
        channels.push(FieldChannel {
            name: ch.name.clone(),
            k: ch.k,
            data: eval.posterior,
        });
    }
    for (name, _) in &targets.channels {
        field.channel(name)?;
    }
    Ok(TransferResult {
        posterior: HistogramField::new(field.width(), field.height(), channels)?,
        channels: results,
    })
}

/// Reweights every pixel distribution as `softmax(log p + b)`.
pub fn apply_bias(field: &HistogramField, biases: &[BiasVector]) -> Result<HistogramField> {
    for b in biases {
        let ch = field.channel(&b.channel)?;
        if b.values.len() != ch.k {
            return Err(Error::LengthMismatch {
                what: "bias vector",
                expected: ch.k,
                found: b.values.len(),
            });
        }
    }
    let channels = field
        .channels()
        .iter()
        .map(|ch| match biases.iter().find(|b| b.channel == ch.name) {
            None => ch.clone(),
            Some(b) => {
                let mut data = Vec::with_capacity(ch.data.len());
                for dist in ch.pixels() {
                    let logits: Vec<f64> = dist
                        .iter()
                        .zip(&b.values)
                        .map(|(p, bv)| p.max(PROB_FLOOR).ln() + bv)
                        .collect();
                    data.extend(softmax(&logits));
                }
                FieldChannel {
                    name: ch.name.clone(),
                    k: ch.k,
                    data,
                }
            }
        })
        .collect();
    HistogramField::new(field.width(), field.height(), channels)
}

/// Renders one colorization per bias set.
pub fn biased_samples(
    field: &HistogramField,
    biases: &[Vec<BiasVector>],
    gray: &GrayImage,
    coding: &Coding,
    policy: &DecodePolicy,
) -> Result<Vec<RgbImage>> {
    biases
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let biased = apply_bias(field, b)?;
            let policy = DecodePolicy {
                seed: policy.seed.wrapping_add(i as u64),
                ..*policy
            };
            render(&biased, gray, coding, &policy)
        })
        .collect()
}

/// `n` bias sets that push the prediction toward directions evenly rotated
/// around the color wheel (hue bins, or the `(a, b)` plane for Lab codings).
pub fn rotation_biases(coding: &Coding, n: usize, strength: f64, phase: f64) -> Vec<Vec<BiasVector>> {
    (0..n)
        .map(|i| {
            let angle = phase + TAU * i as f64 / n as f64;
            let (ca, sa) = (angle.cos(), angle.sin());
            let tables = coding.tables();
            match coding.variant() {
                LossVariant::HueChromaHist => {
                    let hue = &tables[0];
                    vec![BiasVector {
                        channel: "hue".into(),
                        values: (0..hue.len()).map(|k| strength * (hue.angle(k) - angle).cos()).collect(),
                    }]
                }
                LossVariant::LabMarginalHist => ["a", "b"]
                    .iter()
                    .zip([ca, sa])
                    .zip(tables)
                    .map(|((name, dir), t)| BiasVector {
                        channel: name.to_string(),
                        values: t.centroids().iter().map(|c| strength * dir * c / coding.sigma).collect(),
                    })
                    .collect(),
                LossVariant::LabJointHist => {
                    let t = &tables[0];
                    vec![BiasVector {
                        channel: "ab".into(),
                        values: (0..t.len())
                            .map(|i| {
                                let (a, b) = t.centroid_pair(i);
                                strength * (ca * a + sa * b) / coding.sigma
                            })
                            .collect(),
                    }]
                }
                LossVariant::LabL2 => vec![],
            }
        })
        .collect()
}

/// Per-pixel hue entropy (natural log, divided by `ln K`) times the decoded
/// chroma without fading.
pub fn uncertainty_map(field: &HistogramField, coding: &Coding, policy: &DecodePolicy) -> Result<GrayImage> {
    let hue = field.channel("hue")?;
    let chroma = field.channel("chroma")?;
    if coding.variant() != LossVariant::HueChromaHist {
        return Err(Error::MissingChannel("hue".into()));
    }
    let table = &coding.tables()[1];
    let ln_k = (hue.k as f64).ln();
    let mut values = Vec::with_capacity(field.len());
    for p in 0..field.len() {
        let entropy: f64 = hue.dist(p).iter().filter(|w| **w > 0.0).map(|w| -w * w.ln()).sum();
        let mut rng = pixel_rng(policy.seed, p);
        let c = decode_scalar_channel(chroma.dist(p), table, policy.color, &mut rng)?;
        values.push((entropy / ln_k * c).clamp(0.0, 1.0));
    }
    GrayImage::new(field.width(), field.height(), values)
}

/// Histograms of a reference image in the channels of a coding.
pub fn image_targets(img: &RgbImage, coding: &Coding) -> Result<TargetHistogramSet> {
    if img.is_empty() {
        return Err(Error::Empty("reference image"));
    }
    let tables = coding.tables();
    let channels = match coding.variant() {
        LossVariant::HueChromaHist => {
            let hc: Vec<_> = img.pixels().map(rgb_to_huechroma).collect();
            let hues: Vec<f64> = hc.iter().map(|p| p.hue).collect();
            let chromas: Vec<f64> = hc.iter().map(|p| p.chroma).collect();
            vec![
                ("hue".to_string(), target_histogram(&hues, &tables[0])?.weights),
                ("chroma".to_string(), target_histogram(&chromas, &tables[1])?.weights),
            ]
        }
        LossVariant::LabMarginalHist => {
            let lab: Vec<_> = img.pixels().map(rgb_to_lab).collect();
            let a: Vec<f64> = lab.iter().map(|p| p.a).collect();
            let b: Vec<f64> = lab.iter().map(|p| p.b).collect();
            vec![
                ("a".to_string(), target_histogram(&a, &tables[0])?.weights),
                ("b".to_string(), target_histogram(&b, &tables[1])?.weights),
            ]
        }
        LossVariant::LabJointHist => {
            let ab: Vec<(f64, f64)> = img.pixels().map(rgb_to_lab).map(|p| (p.a, p.b)).collect();
            vec![("ab".to_string(), target_histogram_joint(&ab, &tables[0])?.weights)]
        }
        LossVariant::LabL2 => {
            return Err(Error::InvalidArgument("regression models have no histogram channels".into()))
        }
    };
    Ok(TargetHistogramSet { channels })
}

fn normalized_channels(img: &RgbImage) -> (Vec<f64>, [Vec<f64>; 3]) {
    let scale: Vec<f64> = img.pixels().map(|p| (p[0] + p[1] + p[2]) / 3.0 + LIGHTNESS_EPS).collect();
    let chans = [0, 1, 2].map(|c| img.pixels().zip(&scale).map(|(p, l)| p[c] / l).collect());
    (scale, chans)
}

/// Empirical quantile of every value: the mean rank of its ties, scaled to
/// `[0, 1]`.
fn quantiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 1 {
        return vec![0.5];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut q = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0 / (n - 1) as f64;
        for &i in &order[start..=end] {
            q[i] = rank;
        }
        start = end + 1;
    }
    q
}

/// Inverse empirical CDF with linear interpolation between order statistics.
fn inverse_cdf(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Lightness-normalized quantile matching of `source` onto `target`.
pub fn quantile_match(source: &RgbImage, target: &RgbImage) -> Result<RgbImage> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Empty("quantile matching image"));
    }
    let (src_scale, src) = normalized_channels(source);
    let (_, tgt) = normalized_channels(target);
    let mapped: Vec<Vec<f64>> = src
        .iter()
        .zip(tgt)
        .map(|(s, mut t)| {
            t.sort_by(f64::total_cmp);
            quantiles(s).into_iter().map(|q| inverse_cdf(&t, q)).collect()
        })
        .collect();
    let w = source.width();
    Ok(RgbImage::from_fn(w, source.height(), |x, y| {
        let p = y * w + x;
        [0, 1, 2].map(|c| mapped[c][p] * src_scale[p])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_examples() {
        assert_eq!(symmetric_chi2(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        assert_eq!(symmetric_chi2(&[1.0, 0.0], &[0.0, 1.0]), 2.0);
        let d = symmetric_chi2(&[0.5, 0.5], &[0.25, 0.75]);
        assert!((d - (0.0625 / 0.75 + 0.0625 / 1.25)).abs() < 1e-15);
        assert!((d - 0.133333).abs() < 1e-6);
        assert_eq!(symmetric_chi2(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn quantiles_average_ties() {
        assert_eq!(quantiles(&[3.0, 1.0, 3.0, 2.0]), vec![5.0 / 6.0, 0.0, 5.0 / 6.0, 1.0 / 3.0]);
        assert_eq!(inverse_cdf(&[0.0, 1.0, 3.0], 0.75), 2.0);
    }

    #[test]
    fn quantile_match_on_self_is_identity() {
        let img = RgbImage::from_fn(5, 4, |x, y| [x as f64 / 5.0, y as f64 / 4.0, 0.3]);
        let out = quantile_match(&img, &img).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_images() {
        let src = RgbImage::from_fn(3, 3, |_, _| [0.2, 0.4, 0.6]);
        let tgt = RgbImage::from_fn(2, 2, |_, _| [0.5, 0.3, 0.1]);
        let out = quantile_match(&src, &tgt).unwrap();
        let l_t = 0.3 + LIGHTNESS_EPS;
        let l_s = 0.4 + LIGHTNESS_EPS;
        let expected = [0.5 / l_t * l_s, 0.3 / l_t * l_s, 0.1 / l_t * l_s];
        for p in out.pixels() {
            for c in 0..3 {
                assert!((p[c] - expected[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_zero_keeps_predictions() {
        let ch = FieldChannel {
            name: "c".into(),
            k: 3,
            data: vec![0.2, 0.3, 0.5, 0.6, 0.3, 0.1],
        };
        let field = HistogramField::new(2, 1, vec![ch.clone()]).unwrap();
        let targets = TargetHistogramSet {
            channels: vec![("c".into(), vec![1.0, 0.0, 0.0])],
        };
        let cfg = TransferConfig {
            lambda: 0.0,
            ..TransferConfig::default()
        };
        let r = energy_minimize(&field, &targets, &cfg).unwrap();
        assert_eq!(r.channels[0].bias.values, vec![0.0; 3]);
        assert_eq!(r.energy(), 0.0);
        for (a, b) in r.posterior.channel("c").unwrap().data.iter().zip(&ch.data) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_target_channel_is_an_error() {
        let ch = FieldChannel {
            name: "c".into(),
            k: 2,
            data: vec![0.5, 0.5],
        };
        let field = HistogramField::new(1, 1, vec![ch]).unwrap();
        let targets = TargetHistogramSet {
            channels: vec![("hue".into(), vec![0.5, 0.5])],
        };
        assert!(energy_minimize(&field, &targets, &TransferConfig::default()).is_err());
    }
}
