//! Synthetic training corpora whose color follows from local intensity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorspace::{huechroma_to_rgb, lightness, HueChroma};
use crate::image::{Rgb, RgbImage};

/// Hue of bright structure in the [`CorpusKind::Intensity`] corpus (orange).
pub const WARM_HUE: f64 = 0.07;
/// Hue of dark structure (blue).
pub const COOL_HUE: f64 = 0.61;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    /// Bright blobs are warm, dark blobs cool. Color is a fixed function of
    /// intensity, so it is fully predictable from the gray image.
    Intensity,
    /// Dark blobs are cool as above, but bright blobs take one of two hues
    /// chosen per image, so the gray image alone cannot tell which.
    Ambiguous,
}

/// Hues a bright blob may take in the ambiguous corpus (orange, green).
pub const AMBIGUOUS_WARM_HUES: [f64; 2] = [WARM_HUE, 0.36];

/// Color of a pixel of gray level `g` whose bright structure has hue `warm`.
pub fn intensity_color(g: f64, warm: f64) -> Rgb {
    let strength = ((g - 0.5).abs() * 3.0).min(1.0);
    let hue = if g >= 0.5 { warm } else { COOL_HUE };
    let rgb = huechroma_to_rgb(HueChroma {
        hue,
        chroma: 0.8 * strength * HueChroma::max_chroma(g),
        lightness: g,
    });
    // keep (R+G+B)/3 on the gray level
    let shift = g - lightness(rgb);
    rgb.map(|c| (c + shift).clamp(0.0, 1.0))
}

fn gray_pattern(size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = size as f64;
    let base = rng.random_range(0.4..0.6);
    let (gx, gy) = (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(3..7))
        .map(|_| {
            let amp = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.25..0.45);
            (rng.random_range(0.0..s), rng.random_range(0.0..s), rng.random_range(2.5..7.0), amp)
        })
        .collect();
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64, y as f64);
            let mut v = base + gx * (fx / s - 0.5) + gy * (fy / s - 0.5);
            for &(cx, cy, r, a) in &blobs {
                let d2 = (fx - cx).powi(2) + (fy - cy).powi(2);
                v += a * (-d2 / (2.0 * r * r)).exp();
            }
            out.push(v.clamp(0.03, 0.97));
        }
    }
    out
}

/// `n` square images of side `size`, deterministic in `seed`.
pub fn generate_corpus(kind: CorpusKind, n: usize, size: usize, seed: u64) -> Vec<RgbImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let gray = gray_pattern(size, &mut rng);
            let warm = match kind {
                CorpusKind::Intensity => WARM_HUE,
                CorpusKind::Ambiguous => AMBIGUOUS_WARM_HUES[rng.random_range(0..2)],
            };
            RgbImage::from_fn(size, size, |x, y| intensity_color(gray[y * size + x], warm))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::rgb_to_huechroma;

    #[test]
    fn deterministic_and_in_range() {
        let a = generate_corpus(CorpusKind::Intensity, 3, 16, 5);
        assert_eq!(a, generate_corpus(CorpusKind::Intensity, 3, 16, 5));
        assert_ne!(a, generate_corpus(CorpusKind::Intensity, 3, 16, 6));
        assert!(a.iter().all(|i| i.dims() == (16, 16)));
    }

    #[test]
    fn bright_is_warm_dark_is_cool() {
        let warm = rgb_to_huechroma(intensity_color(0.8, WARM_HUE));
        let cool = rgb_to_huechroma(intensity_color(0.2, WARM_HUE));
        assert!((warm.hue - WARM_HUE).abs() < 0.02, "{warm:?}");
        assert!((cool.hue - COOL_HUE).abs() < 0.02, "{cool:?}");
        assert_eq!(intensity_color(0.5, WARM_HUE), [0.5; 3]);
        for g in [0.1, 0.3, 0.7, 0.9] {
            assert!((lightness(intensity_color(g, WARM_HUE)) - g).abs() < 1e-12);
        }
    }
}
