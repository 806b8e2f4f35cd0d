//! Turning per-pixel color distributions plus the input lightness into an
//! RGB image.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coding::Coding;
use crate::colorspace::{huechroma_to_rgb, lab_to_rgb, lightness_correct, rgb_to_lab, HueChroma, Lab};
use crate::error::{Error, Result};
use crate::field::HistogramField;
use crate::histo::{BinTable, LossVariant};
use crate::image::{check_same_dims, GrayImage, RgbImage};

/// Hue magnitudes below this are treated as a fully cancelled expectation.
pub const HUE_MAGNITUDE_FLOOR: f64 = 1e-12;
pub const DEFAULT_ETA: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMethod {
    Sample,
    Mode,
    Median,
    Expectation,
}

impl DecodeMethod {
    pub fn name(self) -> &'static str {
        match self {
            DecodeMethod::Sample => "sample",
            DecodeMethod::Mode => "mode",
            DecodeMethod::Median => "median",
            DecodeMethod::Expectation => "expectation",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sample" => DecodeMethod::Sample,
            "mode" => DecodeMethod::Mode,
            "median" => DecodeMethod::Median,
            "expectation" => DecodeMethod::Expectation,
            _ => return None,
        })
    }
}

/// How each channel of a field is reduced to a single value.
///
/// `hue` applies to the circular hue channel (expectation means the complex
/// expectation); `color` applies to chroma and to the Lab axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodePolicy {
    pub hue: DecodeMethod,
    pub color: DecodeMethod,
    pub chromatic_fading: bool,
    pub eta: f64,
    pub seed: u64,
}

impl Default for DecodePolicy {
    fn default() -> Self {
        Self {
            hue: DecodeMethod::Expectation,
            color: DecodeMethod::Median,
            chromatic_fading: true,
            eta: DEFAULT_ETA,
            seed: 0,
        }
    }
}

impl DecodePolicy {
    /// Default policy for a coding: median chroma with fading for hue/chroma,
    /// expectation for Lab.
    pub fn for_variant(variant: LossVariant) -> Self {
        match variant {
            LossVariant::HueChromaHist => Self::default(),
            _ => Self {
                color: DecodeMethod::Expectation,
                ..Self::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {}", self.eta)));
        }
        if self.hue == DecodeMethod::Median {
            return Err(Error::CircularMedian);
        }
        Ok(())
    }
}

/// Circular mean of a hue distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HueEstimate {
    pub hue: f64,
    /// `|z|`, including the `1/K` prefactor, so at most `1/K`.
    pub magnitude: f64,
}

/// `z = (1/K) Σ_k f_k e^{iθ_k}` with `θ_k = 2π (k + 0.5) / K`.
pub fn circular_hue_expectation(dist: &[f64]) -> HueEstimate {
    let k = dist.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, w) in dist.iter().enumerate() {
        let theta = TAU * (i as f64 + 0.5) / k;
        re += w * theta.cos();
        im += w * theta.sin();
    }
    re /= k;
    im /= k;
    let magnitude = re.hypot(im);
    if magnitude < HUE_MAGNITUDE_FLOOR {
        return HueEstimate { hue: 0.0, magnitude };
    }
    let mut hue = im.atan2(re).rem_euclid(TAU) / TAU;
    if hue >= 1.0 {
        hue = 0.0;
    }
    HueEstimate { hue, magnitude }
}

/// Scales chroma by `min(|z| / η, 1)`.
pub fn chromatic_fade(chroma: f64, magnitude: f64, eta: f64) -> f64 {
    chroma * (magnitude / eta).min(1.0)
}

fn draw_bin(dist: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random::<f64>() * dist.iter().sum::<f64>();
    let mut acc = 0.0;
    for (k, w) in dist.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    dist.iter().rposition(|w| *w > 0.0).unwrap_or(dist.len() - 1)
}

fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (k, w) in dist.iter().enumerate() {
        if *w > dist[best] {
            best = k;
        }
    }
    best
}

fn median_on_axis(dist: &[f64], table: &BinTable) -> f64 {
    let mut prev = 0.0;
    for (k, w) in dist.iter().enumerate() {
        let cum = prev + w;
        if cum >= 0.5 && *w > 0.0 {
            let (mut lo, mut hi) = table.bin_bounds(k);
            if !lo.is_finite() {
                lo = table.centroids()[k];
            }
            if !hi.is_finite() {
                hi = table.centroids()[k];
            }
            let frac = ((0.5 - prev) / w).clamp(0.0, 1.0);
            return lo + frac * (hi - lo);
        }
        prev = cum;
    }
    let last = dist.iter().rposition(|w| *w > 0.0).unwrap_or(dist.len() - 1);
    table.centroids()[last]
}

/// Reduces a one-axis distribution to a value with the given method.
pub fn decode_scalar_channel(dist: &[f64], table: &BinTable, method: DecodeMethod, rng: &mut impl Rng) -> Result<f64> {
    if dist.len() != table.axis_len() || table.is_joint() {
        return Err(Error::LengthMismatch {
            what: "distribution",
            expected: table.axis_len(),
            found: dist.len(),
        });
    }
    let c = table.centroids();
    Ok(match method {
        DecodeMethod::Sample => c[draw_bin(dist, rng)],
        DecodeMethod::Mode => c[argmax(dist)],
        DecodeMethod::Median => {
            if table.is_circular() {
                return Err(Error::CircularMedian);
            }
            median_on_axis(dist, table)
        }
        DecodeMethod::Expectation => {
            if table.is_circular() {
                circular_hue_expectation(dist).hue
            } else {
                dist.iter().zip(c).map(|(w, v)| w * v).sum()
            }
        }
    })
}

/// Joint `(a, b)` decode; the median is taken per marginal.
pub fn decode_joint_channel(
    dist: &[f64],
    table: &BinTable,
    method: DecodeMethod,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if !table.is_joint() || dist.len() != table.len() {
        return Err(Error::LengthMismatch {
            what: "joint distribution",
            expected: table.len(),
            found: dist.len(),
        });
    }
    let k = table.axis_len();
    Ok(match method {
        DecodeMethod::Sample => table.centroid_pair(draw_bin(dist, rng)),
        DecodeMethod::Mode => table.centroid_pair(argmax(dist)),
        DecodeMethod::Expectation => dist.iter().enumerate().fold((0.0, 0.0), |(a, b), (i, w)| {
            let (ca, cb) = table.centroid_pair(i);
            (a + w * ca, b + w * cb)
        }),
        DecodeMethod::Median => {
            let mut ma = vec![0.0; k];
            let mut mb = vec![0.0; k];
            for (i, w) in dist.iter().enumerate() {
                ma[i / k] += w;
                mb[i % k] += w;
            }
            (median_on_axis(&ma, table), median_on_axis(&mb, table))
        }
    })
}

/// Per-pixel random stream, independent of visiting order.
pub(crate) fn pixel_rng(seed: u64, pixel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pixel as u64);
    rng
}

fn check_field(field: &HistogramField, coding: &Coding) -> Result<()> {
    for (name, table) in coding.channel_names().iter().zip(coding.tables()) {
        let ch = field.channel(name)?;
        if ch.k != table.len() {
            return Err(Error::LengthMismatch {
                what: "field channel bins",
                expected: table.len(),
                found: ch.k,
            });
        }
    }
    Ok(())
}

/// Decoded hue/chroma of one pixel before conversion to RGB.
pub fn decode_huechroma(
    hue_dist: &[f64],
    chroma_dist: &[f64],
    coding: &Coding,
    policy: &DecodePolicy,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let hue_table = &coding.tables()[0];
    let chroma_table = &coding.tables()[1];
    let estimate = circular_hue_expectation(hue_dist);
    let hue = match policy.hue {
        DecodeMethod::Expectation => estimate.hue,
        m => decode_scalar_channel(hue_dist, hue_table, m, rng)?,
    };
    let mut chroma = decode_scalar_channel(chroma_dist, chroma_table, policy.color, rng)?;
    if policy.chromatic_fading {
        chroma = chromatic_fade(chroma, estimate.magnitude, policy.eta);
    }
    Ok((hue, chroma))
}

/// Decodes every pixel of `field` and combines it with `gray` as lightness.
pub fn render(field: &HistogramField, gray: &GrayImage, coding: &Coding, policy: &DecodePolicy) -> Result<RgbImage> {
    policy.validate()?;
    check_same_dims(gray.dims(), field.dims())?;
    check_field(field, coding)?;
    let (w, h) = gray.dims();
    let mut out = RgbImage::from_fn(w, h, |_, _| [0.0; 3]);
    match coding.variant() {
        LossVariant::HueChromaHist => {
            let hue = field.channel("hue")?;
            let chroma = field.channel("chroma")?;
            for p in 0..gray.len() {
                let mut rng = pixel_rng(policy.seed, p);
                let (hv, cv) = decode_huechroma(hue.dist(p), chroma.dist(p), coding, policy, &mut rng)?;
                let rgb = huechroma_to_rgb(HueChroma {
                    hue: hv,
                    chroma: cv,
                    lightness: gray.data()[p],
                });
                out.set_pixel(p % w, p / w, rgb);
            }
        }
        LossVariant::LabMarginalHist => {
            let a = field.channel("a")?;
            let b = field.channel("b")?;
            let tables = coding.tables();
            for p in 0..gray.len() {
                let mut rng = pixel_rng(policy.seed, p);
                let av = decode_scalar_channel(a.dist(p), &tables[0], policy.color, &mut rng)?;
                let bv = decode_scalar_channel(b.dist(p), &tables[1], policy.color, &mut rng)?;
                out.set_pixel(p % w, p / w, lab_pixel(gray.data()[p], av, bv));
            }
        }
        LossVariant::LabJointHist => {
            let ab = field.channel("ab")?;
            for p in 0..gray.len() {
                let mut rng = pixel_rng(policy.seed, p);
                let (av, bv) = decode_joint_channel(ab.dist(p), &coding.tables()[0], policy.color, &mut rng)?;
                out.set_pixel(p % w, p / w, lab_pixel(gray.data()[p], av, bv));
            }
        }
        LossVariant::LabL2 => {
            return Err(Error::InvalidArgument(
                "regression models have no histogram field; use render_ab".into(),
            ))
        }
    }
    lightness_correct(&out, gray)
}

/// Renders per-pixel `(a, b)` predictions (regression models).
pub fn render_ab(ab: &[f64], gray: &GrayImage) -> Result<RgbImage> {
    if ab.len() != gray.len() * 2 {
        return Err(Error::LengthMismatch {
            what: "ab predictions",
            expected: gray.len() * 2,
            found: ab.len(),
        });
    }
    let w = gray.width();
    let out = RgbImage::from_fn(w, gray.height(), |x, y| {
        let p = y * w + x;
        lab_pixel(gray.data()[p], ab[2 * p], ab[2 * p + 1])
    });
    lightness_correct(&out, gray)
}

fn lab_pixel(gray: f64, a: f64, b: f64) -> [f64; 3] {
    let l = rgb_to_lab([gray; 3]).l;
    lab_to_rgb(Lab { l, a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histo::{build_bins, BinSpec};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    #[test]
    fn scalar_examples() {
        let u3 = build_bins(BinSpec::uniform(3, 0.0, 1.0)).unwrap();
        let mut r = rng();
        let v = decode_scalar_channel(&[0.0, 0.0, 1.0], &u3, DecodeMethod::Expectation, &mut r).unwrap();
        assert!((v - u3.centroids()[2]).abs() < 1e-15);
        let v = decode_scalar_channel(&[0.2, 0.5, 0.3], &u3, DecodeMethod::Mode, &mut r).unwrap();
        assert_eq!(v, 0.5);
        let u4 = build_bins(BinSpec::uniform(4, 0.0, 1.0)).unwrap();
        let v = decode_scalar_channel(&[0.25; 4], &u4, DecodeMethod::Median, &mut r).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn mode_ties_break_low() {
        let u4 = build_bins(BinSpec::uniform(4, 0.0, 1.0)).unwrap();
        let v = decode_scalar_channel(&[0.4, 0.1, 0.4, 0.1], &u4, DecodeMethod::Mode, &mut rng()).unwrap();
        assert_eq!(v, 0.125);
    }

    #[test]
    fn median_on_circular_is_an_error() {
        let c = build_bins(BinSpec::circular(4)).unwrap();
        assert!(matches!(
            decode_scalar_channel(&[0.25; 4], &c, DecodeMethod::Median, &mut rng()),
            Err(Error::CircularMedian)
        ));
    }

    #[test]
    fn median_interpolates_within_crossing_bin() {
        let u4 = build_bins(BinSpec::uniform(4, 0.0, 1.0)).unwrap();
        // cumulative 0.1, 0.3 | crossing in bin 2 at (0.5 - 0.3) / 0.4 = 0.5
        let v = decode_scalar_channel(&[0.1, 0.2, 0.4, 0.3], &u4, DecodeMethod::Median, &mut rng()).unwrap();
        assert!((v - 0.625).abs() < 1e-15);
        let g = build_bins(BinSpec::gaussian(4, 25.0)).unwrap();
        let v = decode_scalar_channel(&[1.0, 0.0, 0.0, 0.0], &g, DecodeMethod::Median, &mut rng()).unwrap();
        assert!(v.is_finite() && v > g.centroids()[0] && v < g.edges()[0]);
    }

    #[test]
    fn sample_is_seeded() {
        let u4 = build_bins(BinSpec::uniform(4, 0.0, 1.0)).unwrap();
        let d = [0.1, 0.2, 0.3, 0.4];
        let a: Vec<f64> = (0..20)
            .map(|p| decode_scalar_channel(&d, &u4, DecodeMethod::Sample, &mut pixel_rng(9, p)).unwrap())
            .collect();
        let b: Vec<f64> = (0..20)
            .map(|p| decode_scalar_channel(&d, &u4, DecodeMethod::Sample, &mut pixel_rng(9, p)).unwrap())
            .collect();
        assert_eq!(a, b);
        let one_hot = [0.0, 0.0, 1.0, 0.0];
        let v = decode_scalar_channel(&one_hot, &u4, DecodeMethod::Sample, &mut rng()).unwrap();
        assert_eq!(v, 0.625);
    }

    #[test]
    fn circular_examples() {
        assert!(circular_hue_expectation(&[1.0 / 32.0; 32]).magnitude < 1e-12);
        for k in [0, 5, 31] {
            let mut d = vec![0.0; 32];
            d[k] = 1.0;
            let e = circular_hue_expectation(&d);
            assert!((e.hue - (k as f64 + 0.5) / 32.0).abs() < 1e-12);
            assert!((e.magnitude - 1.0 / 32.0).abs() < 1e-15);
        }
        let mut d = vec![0.0; 32];
        d[3] = 0.5;
        d[19] = 0.5;
        let e = circular_hue_expectation(&d);
        assert!(e.magnitude < 1e-12);
        assert_eq!(e.hue, 0.0);
    }

    #[test]
    fn fade_examples() {
        assert_eq!(chromatic_fade(0.4, 0.05, 0.03), 0.4);
        assert!((chromatic_fade(0.4, 0.015, 0.03) - 0.2).abs() < 1e-15);
        assert_eq!(chromatic_fade(0.4, 0.0, 0.03), 0.0);
    }

    #[test]
    fn policy_defaults() {
        let p = DecodePolicy::default();
        assert_eq!(p.hue, DecodeMethod::Expectation);
        assert_eq!(p.color, DecodeMethod::Median);
        assert!(p.chromatic_fading);
        assert_eq!(p.eta, 0.03);
        let bad = DecodePolicy {
            hue: DecodeMethod::Median,
            ..p
        };
        assert!(bad.validate().is_err());
    }
}
