//! Color representations used for training targets, decoding, transfer and
//! evaluation: grayscale, the hue/chroma bicone, CIELAB and the
//! lightness-normalized opponent space αβ.

use crate::error::Result;
use crate::image::{check_same_dims, clamp01, GrayImage, Rgb, RgbImage};

/// Guard added to lightness before normalizing αβ channels.
pub const ALPHA_BETA_EPS: f64 = 1e-4;

/// A point in the hue/chroma bicone.
///
/// `hue` is a fraction of a full turn in `[0, 1)`, `chroma` is `max - min`
/// of the RGB channels and `lightness` is the bicone height `(max + min) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HueChroma {
    pub hue: f64,
    pub chroma: f64,
    pub lightness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
}

impl HueChroma {
    /// Largest chroma the bicone admits at this lightness.
    pub fn max_chroma(lightness: f64) -> f64 {
        (2.0 * lightness).min(2.0 * (1.0 - lightness)).max(0.0)
    }

    /// HSV value and saturation of the same color.
    pub fn to_hsv_vs(&self) -> (f64, f64) {
        let v = self.lightness + self.chroma / 2.0;
        let s = if v > 0.0 { self.chroma / v } else { 0.0 };
        (v, s)
    }
}

pub fn lightness(px: Rgb) -> f64 {
    (px[0] + px[1] + px[2]) / 3.0
}

pub fn desaturate(img: &RgbImage) -> GrayImage {
    let data: Vec<f64> = img.pixels().map(lightness).collect();
    GrayImage::from_fn(img.width(), img.height(), |x, y| data[y * img.width() + x])
}

pub fn rgb_to_huechroma(px: Rgb) -> HueChroma {
    let [r, g, b] = px;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let lightness = (max + min) / 2.0;
    if chroma <= 0.0 {
        return HueChroma {
            hue: 0.0,
            chroma: 0.0,
            lightness,
        };
    }
    let sector = if max == r {
        ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        (b - r) / chroma + 2.0
    } else {
        (r - g) / chroma + 4.0
    };
    HueChroma {
        hue: wrap_unit(sector / 6.0),
        chroma,
        lightness,
    }
}

/// Inverse of [`rgb_to_huechroma`]. Chroma beyond the bicone surface is clipped
/// to the feasible maximum before conversion.
pub fn huechroma_to_rgb(px: HueChroma) -> Rgb {
    let lightness = px.lightness.clamp(0.0, 1.0);
    let chroma = px.chroma.clamp(0.0, HueChroma::max_chroma(lightness));
    if chroma == 0.0 {
        return [lightness; 3];
    }
    let min = lightness - chroma / 2.0;
    let h6 = wrap_unit(px.hue) * 6.0;
    let x = chroma * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let (r, g, b) = match h6 as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    [clamp01(r + min), clamp01(g + min), clamp01(b + min)]
}

pub fn rgb_to_alphabeta(px: Rgb) -> AlphaBeta {
    let [r, g, b] = px;
    let l = lightness(px) + ALPHA_BETA_EPS;
    AlphaBeta {
        alpha: (b - (r + g) / 2.0) / l,
        beta: (r - g) / l,
    }
}

// sRGB primaries, D65 white.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// Row sums of RGB_TO_XYZ, so that RGB white maps exactly to the reference white.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const LAB_DELTA: f64 = 6.0 / 29.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_DELTA.powi(3) {
        t.cbrt()
    } else {
        t / (3.0 * LAB_DELTA * LAB_DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > LAB_DELTA {
        t * t * t
    } else {
        3.0 * LAB_DELTA * LAB_DELTA * (t - 4.0 / 29.0)
    }
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    [
        [c(1, 1, 2, 2) / det, -c(0, 1, 2, 2) / det, c(0, 1, 1, 2) / det],
        [-c(1, 0, 2, 2) / det, c(0, 0, 2, 2) / det, -c(0, 0, 1, 2) / det],
        [c(1, 0, 2, 1) / det, -c(0, 0, 2, 1) / det, c(0, 0, 1, 1) / det],
    ]
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn rgb_to_lab(px: Rgb) -> Lab {
    let lin = px.map(srgb_to_linear);
    let xyz = mat_vec(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    Lab {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// Inverse of [`rgb_to_lab`]; out-of-gamut colors are clamped to `[0, 1]`.
pub fn lab_to_rgb(px: Lab) -> Rgb {
    let fy = (px.l + 16.0) / 116.0;
    let fx = fy + px.a / 500.0;
    let fz = fy - px.b / 200.0;
    let xyz = [
        WHITE[0] * lab_f_inv(fx),
        WHITE[1] * lab_f_inv(fy),
        WHITE[2] * lab_f_inv(fz),
    ];
    let lin = mat_vec(&invert3(&RGB_TO_XYZ), xyz);
    lin.map(|c| clamp01(linear_to_srgb(c.max(0.0))))
}

/// Shifts every channel by the difference between the input lightness and the
/// lightness of the prediction, then clamps.
pub fn lightness_correct(pred: &RgbImage, input_l: &GrayImage) -> Result<RgbImage> {
    check_same_dims(input_l.dims(), pred.dims())?;
    let w = pred.width();
    Ok(RgbImage::from_fn(w, pred.height(), |x, y| {
        let px = pred.pixel(x, y);
        let shift = input_l.get(x, y) - lightness(px);
        px.map(|c| c + shift)
    }))
}

fn wrap_unit(v: f64) -> f64 {
    let w = v.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn desaturate_examples() {
        let img = RgbImage::new(3, 1, vec![1.0, 1.0, 1.0, 0.3, 0.6, 0.9, 1.0, 0.0, 0.0]).unwrap();
        let g = desaturate(&img);
        assert!(close(g.get(0, 0), 1.0, 1e-15));
        assert!(close(g.get(1, 0), 0.6, 1e-15));
        assert!(close(g.get(2, 0), 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn huechroma_examples() {
        let hc = rgb_to_huechroma([0.4, 0.4, 0.4]);
        assert_eq!((hc.hue, hc.chroma, hc.lightness), (0.0, 0.0, 0.4));
        let hc = rgb_to_huechroma([1.0, 0.0, 0.0]);
        assert_eq!((hc.hue, hc.chroma, hc.lightness), (0.0, 1.0, 0.5));
        let hc = rgb_to_huechroma([0.0, 1.0, 0.0]);
        assert!(close(hc.hue, 1.0 / 3.0, 1e-15));
        assert_eq!((hc.chroma, hc.lightness), (1.0, 0.5));
    }

    #[test]
    fn huechroma_inverse_examples() {
        let gray = huechroma_to_rgb(HueChroma {
            hue: 0.77,
            chroma: 0.0,
            lightness: 0.7,
        });
        assert_eq!(gray, [0.7; 3]);
        let red = huechroma_to_rgb(HueChroma {
            hue: 0.0,
            chroma: 1.0,
            lightness: 0.5,
        });
        assert_eq!(red, [1.0, 0.0, 0.0]);
        let px = HueChroma {
            hue: 0.62,
            chroma: 0.4,
            lightness: 0.55,
        };
        let back = rgb_to_huechroma(huechroma_to_rgb(px));
        assert!(close(back.hue, px.hue, 1e-6));
        assert!(close(back.chroma, px.chroma, 1e-6));
        assert!(close(back.lightness, px.lightness, 1e-6));
    }

    #[test]
    fn infeasible_chroma_is_clipped() {
        let rgb = huechroma_to_rgb(HueChroma {
            hue: 0.1,
            chroma: 0.9,
            lightness: 0.9,
        });
        let hc = rgb_to_huechroma(rgb);
        assert!(close(hc.chroma, 0.2, 1e-12));
        assert!(rgb.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn hsv_relation() {
        let px = [0.2, 0.7, 0.4];
        let hc = rgb_to_huechroma(px);
        let (v, s) = hc.to_hsv_vs();
        assert!(close(v, 0.7, 1e-12));
        assert!(close(s, 0.5 / 0.7, 1e-12));
    }

    #[test]
    fn alphabeta_examples() {
        // (1,0,0): L = 1/3, so α = -0.5 / (1/3 + 1e-4), β = 1 / (1/3 + 1e-4)
        let ab = rgb_to_alphabeta([1.0, 0.0, 0.0]);
        assert!(close(ab.alpha, -1.499_550_1, 1e-6));
        assert!(close(ab.beta, 2.999_100_3, 1e-6));
        let ab = rgb_to_alphabeta([0.0, 0.0, 1.0]);
        assert!(close(ab.alpha, 2.999_100_3, 1e-6));
        assert_eq!(ab.beta, 0.0);
        for v in [0.0, 0.1, 0.5, 1.0] {
            let ab = rgb_to_alphabeta([v, v, v]);
            assert_eq!((ab.alpha, ab.beta), (0.0, 0.0));
        }
    }

    #[test]
    fn lab_examples() {
        let w = rgb_to_lab([1.0, 1.0, 1.0]);
        assert!(close(w.l, 100.0, 1e-9) && w.a.abs() < 1e-9 && w.b.abs() < 1e-9);
        let k = rgb_to_lab([0.0, 0.0, 0.0]);
        assert!(close(k.l, 0.0, 1e-12) && k.a.abs() < 1e-12 && k.b.abs() < 1e-12);
        let r = rgb_to_lab([1.0, 0.0, 0.0]);
        assert!(close(r.l, 53.24, 0.01), "{r:?}");
        assert!(close(r.a, 80.09, 0.01), "{r:?}");
        assert!(close(r.b, 67.20, 0.01), "{r:?}");
    }

    #[test]
    fn lab_inverse_examples() {
        let w = lab_to_rgb(Lab {
            l: 100.0,
            a: 0.0,
            b: 0.0,
        });
        assert!(w.iter().all(|c| close(*c, 1.0, 1e-4)));
        let px = [0.2, 0.5, 0.8];
        let back = lab_to_rgb(rgb_to_lab(px));
        for c in 0..3 {
            assert!(close(back[c], px[c], 1e-4));
        }
        let out = lab_to_rgb(Lab {
            l: 50.0,
            a: 200.0,
            b: 0.0,
        });
        assert!(out.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn lightness_correct_examples() {
        let pred = RgbImage::new(1, 1, vec![0.4, 0.4, 0.4]).unwrap();
        let l = GrayImage::new(1, 1, vec![0.5]).unwrap();
        let out = lightness_correct(&pred, &l).unwrap();
        assert!(out.pixel(0, 0).iter().all(|c| close(*c, 0.5, 1e-15)));

        let pred = RgbImage::new(1, 1, vec![0.95, 0.95, 0.95]).unwrap();
        let l = GrayImage::new(1, 1, vec![1.0]).unwrap();
        let out = lightness_correct(&pred, &l).unwrap();
        assert_eq!(out.pixel(0, 0), [1.0, 1.0, 1.0]);

        let pred = RgbImage::new(1, 1, vec![0.1, 0.3, 0.8]).unwrap();
        let l = desaturate(&pred);
        assert_eq!(lightness_correct(&pred, &l).unwrap(), pred);

        let wrong = GrayImage::new(2, 1, vec![0.1, 0.1]).unwrap();
        assert!(lightness_correct(&pred, &wrong).is_err());
    }
}
