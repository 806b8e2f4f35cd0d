//! Evaluation: RMSE in αβ, PSNR, and the cumulative per-pixel error curve.

use crate::colorspace::rgb_to_alphabeta;
use crate::error::{Error, Result};
use crate::image::{check_same_dims, RgbImage};

/// PSNR reported for pairs with (numerically) zero error.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rmse_ab: f64,
    pub psnr_mean_db: f64,
    pub per_image_psnr: Vec<f64>,
    pub cumulative_curve: Vec<(f64, f64)>,
}

fn check_pairs(preds: &[RgbImage], gts: &[RgbImage]) -> Result<()> {
    if preds.len() != gts.len() {
        return Err(Error::LengthMismatch {
            what: "image pairs",
            expected: gts.len(),
            found: preds.len(),
        });
    }
    for (p, g) in preds.iter().zip(gts) {
        check_same_dims(g.dims(), p.dims())?;
    }
    Ok(())
}

/// Euclidean αβ distance of every pixel of every pair, in order.
pub fn pixel_errors(preds: &[RgbImage], gts: &[RgbImage]) -> Result<Vec<f64>> {
    check_pairs(preds, gts)?;
    Ok(preds
        .iter()
        .zip(gts)
        .flat_map(|(p, g)| {
            p.pixels().zip(g.pixels()).map(|(a, b)| {
                let a = rgb_to_alphabeta(a);
                let b = rgb_to_alphabeta(b);
                (a.alpha - b.alpha).hypot(a.beta - b.beta)
            })
        })
        .collect())
}

/// Mean over all pixels of all images of the per-pixel αβ error norm.
pub fn rmse_ab(preds: &[RgbImage], gts: &[RgbImage]) -> Result<f64> {
    let errors = pixel_errors(preds, gts)?;
    if errors.is_empty() {
        return Err(Error::Empty("evaluation pixels"));
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

pub fn psnr_image(pred: &RgbImage, gt: &RgbImage) -> Result<f64> {
    check_same_dims(gt.dims(), pred.dims())?;
    if gt.is_empty() {
        return Err(Error::Empty("evaluation pixels"));
    }
    let sq: f64 = pred.data().iter().zip(gt.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    let mse = sq / (3 * gt.len()) as f64;
    if mse <= 1e-10 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP_DB))
}

/// Arithmetic mean of per-image PSNR, and the per-image values.
pub fn psnr(preds: &[RgbImage], gts: &[RgbImage]) -> Result<(f64, Vec<f64>)> {
    check_pairs(preds, gts)?;
    if preds.is_empty() {
        return Err(Error::Empty("evaluation images"));
    }
    let per: Vec<f64> = preds.iter().zip(gts).map(|(p, g)| psnr_image(p, g)).collect::<Result<_>>()?;
    Ok((per.iter().sum::<f64>() / per.len() as f64, per))
}

/// Fraction of pixels whose αβ error is at most each threshold.
pub fn cumulative_curve(preds: &[RgbImage], gts: &[RgbImage], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut errors = pixel_errors(preds, gts)?;
    errors.sort_by(f64::total_cmp);
    let n = errors.len().max(1) as f64;
    Ok(thresholds
        .iter()
        .map(|&t| (t, errors.partition_point(|e| *e <= t) as f64 / n))
        .collect())
}

/// Thresholds `0, 0.01, …, 3.0` spanning the nominal αβ error range.
pub fn default_thresholds() -> Vec<f64> {
    (0..=300).map(|i| i as f64 / 100.0).collect()
}

pub fn evaluate(preds: &[RgbImage], gts: &[RgbImage]) -> Result<EvalReport> {
    let (psnr_mean_db, per_image_psnr) = psnr(preds, gts)?;
    Ok(EvalReport {
        rmse_ab: rmse_ab(preds, gts)?,
        psnr_mean_db,
        per_image_psnr,
        cumulative_curve: cumulative_curve(preds, gts, &default_thresholds())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_twenty_db() {
        let gt = RgbImage::from_fn(4, 3, |x, y| [0.2 + 0.1 * (x % 2) as f64, 0.5, 0.3 + 0.05 * y as f64]);
        let pred = RgbImage::from_fn(4, 3, |x, y| {
            let p = gt.pixel(x, y);
            [p[0] + 0.1, p[1] - 0.1, p[2] + 0.1]
        });
        let db = psnr_image(&pred, &gt).unwrap();
        assert!((db - 20.0).abs() < 1e-9, "{db}");
        assert_eq!(psnr_image(&gt, &gt).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn psnr_mean_is_arithmetic() {
        let gt = RgbImage::from_fn(2, 2, |_, _| [0.5; 3]);
        let off = |d: f64| RgbImage::from_fn(2, 2, |_, _| [0.5 + d; 3]);
        // 20 dB at 0.1 error, 30 dB at 10^-1.5
        let (mean, per) = psnr(&[off(0.1), off(10f64.powf(-1.5))], &[gt.clone(), gt]).unwrap();
        assert!((per[0] - 20.0).abs() < 1e-9 && (per[1] - 30.0).abs() < 1e-9);
        assert!((mean - 25.0).abs() < 1e-9);
    }

    #[test]
    fn rmse_identity_and_mismatch() {
        let a = RgbImage::from_fn(3, 2, |x, _| [x as f64 / 3.0, 0.2, 0.9]);
        assert_eq!(rmse_ab(&[a.clone()], &[a.clone()]).unwrap(), 0.0);
        let b = RgbImage::from_fn(2, 2, |_, _| [0.1; 3]);
        assert!(matches!(rmse_ab(&[a], &[b]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn curve_steps() {
        let a = RgbImage::from_fn(2, 1, |_, _| [0.5; 3]);
        let curve = cumulative_curve(&[a.clone()], &[a], &[0.0, 1.0]).unwrap();
        assert_eq!(curve, vec![(0.0, 1.0), (1.0, 1.0)]);
    }
}
