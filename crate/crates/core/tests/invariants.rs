use hcolor_core::colorspace::{
    desaturate, huechroma_to_rgb, lab_to_rgb, lightness, lightness_correct, rgb_to_alphabeta, rgb_to_huechroma,
    rgb_to_lab,
};
use hcolor_core::decode::{chromatic_fade, circular_hue_expectation, decode_scalar_channel, DecodeMethod};
use hcolor_core::histo::{build_bins, kl_hist_loss, BinSpec, TargetHistogram};
use hcolor_core::metrics::{cumulative_curve, psnr, rmse_ab};
use hcolor_core::net::softmax;
use hcolor_core::transfer::symmetric_chi2;
use hcolor_core::{GrayImage, HueChroma, RgbImage};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn rgb() -> impl Strategy<Value = [f64; 3]> {
    [unit(), unit(), unit()]
}

fn dist(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, k).prop_map(|z| softmax(&z))
}

fn image(w: usize, h: usize) -> impl Strategy<Value = RgbImage> {
    prop::collection::vec(rgb(), w * h).prop_map(move |px| {
        let mut it = px.into_iter();
        RgbImage::from_fn(w, h, |_, _| it.next().unwrap())
    })
}

proptest! {
    #[test]
    fn huechroma_round_trips(p in rgb()) {
        let hc = rgb_to_huechroma(p);
        prop_assert!((0.0..1.0).contains(&hc.hue));
        prop_assert!(hc.chroma <= HueChroma::max_chroma(hc.lightness) + 1e-12);
        let back = huechroma_to_rgb(hc);
        for c in 0..3 {
            prop_assert!((back[c] - p[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn lab_round_trips(p in rgb()) {
        let back = lab_to_rgb(rgb_to_lab(p));
        for c in 0..3 {
            prop_assert!((back[c] - p[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn alphabeta_is_zero_only_for_gray(v in unit(), d in 0.01..0.5f64) {
        let g = rgb_to_alphabeta([v, v, v]);
        prop_assert_eq!((g.alpha, g.beta), (0.0, 0.0));
        let c = rgb_to_alphabeta([(v + d).min(1.0), (v - d).max(0.0), v]);
        prop_assert!(c.beta > 0.0);
    }

    #[test]
    fn lightness_correction_restores_gray(img in image(3, 3), shift in -0.3..0.3f64) {
        let target = desaturate(&img);
        let moved = RgbImage::from_fn(3, 3, |x, y| img.pixel(x, y).map(|c| c + shift));
        let fixed = lightness_correct(&moved, &target).unwrap();
        for (p, g) in fixed.pixels().zip(target.data()) {
            prop_assert!(p.iter().all(|c| (0.0..=1.0).contains(c)));
            // clamping can only move the mean when a channel saturates
            if p.iter().all(|c| *c > 0.0 && *c < 1.0) {
                prop_assert!((lightness(p) - g).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quantize_lands_in_bin(v in -200.0..200.0f64, sigma in 5.0..40.0f64, k in 2usize..40) {
        let t = build_bins(BinSpec::gaussian(k, sigma)).unwrap();
        let i = t.quantize(v).unwrap();
        let e = t.edges();
        prop_assert!(i < k);
        if i > 0 { prop_assert!(v >= e[i - 1]); }
        if i < k - 1 { prop_assert!(v < e[i]); }
    }

    #[test]
    fn circular_bins_wrap(v in 0.0..1.0f64, k in 2usize..64, turns in -3i32..3) {
        let t = build_bins(BinSpec::circular(k)).unwrap();
        prop_assert_eq!(t.quantize(v).unwrap(), t.quantize(v + turns as f64).unwrap());
    }

    #[test]
    fn softmax_is_a_distribution(z in prop::collection::vec(-50.0..50.0f64, 1..40), c in -100.0..100.0f64) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn kl_nonnegative_and_zero_on_self(y in dist(12), f in dist(12)) {
        let t = TargetHistogram { weights: y.clone() };
        prop_assert!(kl_hist_loss(&t, &f).unwrap() >= -1e-12);
        prop_assert!(kl_hist_loss(&t, &y).unwrap().abs() < 1e-12);
    }

    #[test]
    fn chi2_symmetric_and_bounded(p in dist(16), q in dist(16)) {
        let a = symmetric_chi2(&p, &q);
        prop_assert_eq!(a, symmetric_chi2(&q, &p));
        prop_assert!((0.0..=2.0 + 1e-12).contains(&a));
        prop_assert_eq!(symmetric_chi2(&p, &p), 0.0);
    }

    #[test]
    fn decoded_values_stay_in_support(p in dist(8), seed in any::<u64>()) {
        let t = build_bins(BinSpec::uniform(8, 0.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in [DecodeMethod::Expectation, DecodeMethod::Median, DecodeMethod::Mode, DecodeMethod::Sample] {
            let v = decode_scalar_channel(&p, &t, m, &mut rng).unwrap();
            prop_assert!((0.0..=1.0).contains(&v), "{:?} gave {}", m, v);
        }
    }

    #[test]
    fn expectation_is_linear(p in dist(8), q in dist(8), w in unit()) {
        let t = build_bins(BinSpec::uniform(8, 0.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        let mut e = |d: &[f64]| decode_scalar_channel(d, &t, DecodeMethod::Expectation, &mut rng).unwrap();
        let lhs = e(&mix);
        let rhs = w * e(&p) + (1.0 - w) * e(&q);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn circular_expectation_rotates(p in dist(16), shift in 0usize..16) {
        let rotated: Vec<f64> = (0..16).map(|k| p[(k + 16 - shift) % 16]).collect();
        let a = circular_hue_expectation(&p);
        let b = circular_hue_expectation(&rotated);
        prop_assert!((a.magnitude - b.magnitude).abs() < 1e-12);
        if a.magnitude > 1e-9 {
            let d = (b.hue - a.hue - shift as f64 / 16.0).rem_euclid(1.0);
            prop_assert!(d < 1e-9 || d > 1.0 - 1e-9);
        }
    }

    #[test]
    fn fading_never_increases_chroma(c in unit(), m in 0.0..0.2f64) {
        let f = chromatic_fade(c, m, 0.03);
        prop_assert!(f <= c && f >= 0.0);
    }

    #[test]
    fn metrics_zero_on_identical(img in image(4, 3)) {
        let one = std::slice::from_ref(&img);
        prop_assert_eq!(rmse_ab(one, one).unwrap(), 0.0);
        prop_assert_eq!(psnr(one, one).unwrap().0, 100.0);
    }

    #[test]
    fn cumulative_curve_is_monotone(a in image(4, 4), b in image(4, 4)) {
        let thresholds: Vec<f64> = (0..=30).map(|i| i as f64 * 0.1).collect();
        let curve = cumulative_curve(&[a], &[b], &thresholds).unwrap();
        prop_assert!(curve.windows(2).all(|w| w[1].1 >= w[0].1));
        prop_assert!(curve.iter().all(|(_, f)| (0.0..=1.0).contains(f)));
    }

    #[test]
    fn rmse_symmetric(a in image(3, 3), b in image(3, 3)) {
        let x = rmse_ab(std::slice::from_ref(&a), std::slice::from_ref(&b)).unwrap();
        let y = rmse_ab(std::slice::from_ref(&b), std::slice::from_ref(&a)).unwrap();
        prop_assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn desaturate_matches_lightness() {
    let img = RgbImage::from_fn(2, 1, |x, _| if x == 0 { [0.3, 0.6, 0.9] } else { [1.0, 0.0, 0.5] });
    let g = desaturate(&img);
    assert_eq!(g, GrayImage::new(2, 1, vec![0.6, 0.5]).unwrap());
}
