//! Rescales each conv layer to unit activation second moment without changing
//! the network function. A rectifier commutes with positive scaling, so
//! multiplying layer `l` by `m` and every consumer of its output by `1/m`
//! leaves all downstream activations intact.

use super::model::Model;
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Rescale factor `m = 1 / sqrt(E[X²])`.
pub fn rebalance_factor(second_moment: f64) -> f64 {
    1.0 / second_moment.sqrt()
}

/// Mean squared activation of every conv layer's output over a calibration set.
pub fn activation_second_moments(model: &Model, images: &[GrayImage]) -> Result<Vec<f64>> {
    if images.is_empty() {
        return Err(Error::Empty("calibration images"));
    }
    let layers = model.config().layers.len();
    let mut sums = vec![0.0; layers];
    let mut counts = vec![0usize; layers];
    for img in images {
        let features = model.forward_features(img)?;
        for l in 0..layers {
            let map = features.map(Some(l));
            sums[l] += map.data.iter().map(|v| v * v).sum::<f64>();
            counts[l] += map.data.len();
        }
    }
    Ok(sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect())
}

/// Applies per-layer rescaling given each conv layer's output second moment.
pub fn rebalance(model: &Model, stats: &[f64]) -> Result<Model> {
    let cfg = model.config().clone();
    if stats.len() != cfg.layers.len() {
        return Err(Error::LengthMismatch {
            what: "rebalance statistics",
            expected: cfg.layers.len(),
            found: stats.len(),
        });
    }
    for (l, s) in cfg.layers.iter().zip(stats) {
        if !(*s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveStats {
                tap: l.name.clone(),
                value: *s,
            });
        }
    }
    let factors: Vec<f64> = stats.iter().map(|s| rebalance_factor(*s)).collect();
    let mut out = model.clone();
    let hidden = out.hidden_index();
    let d = cfg.descriptor_len();
    let offsets = cfg.tap_offsets();
    let params = out.params_mut();
    for (l, &m) in factors.iter().enumerate() {
        if m == 1.0 {
            continue;
        }
        params[2 * l].data.iter_mut().for_each(|w| *w *= m);
        params[2 * l + 1].data.iter_mut().for_each(|b| *b *= m);
        if l + 1 < cfg.layers.len() {
            params[2 * (l + 1)].data.iter_mut().for_each(|w| *w /= m);
        }
        if let Some(t) = cfg.taps.iter().position(|t| *t == cfg.layers[l].name) {
            let (start, len) = (offsets[t], cfg.layers[l].out_channels);
            for row in params[hidden].data.chunks_exact_mut(d) {
                row[start..start + len].iter_mut().for_each(|w| *w /= m);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_model, HeadSpec, NetConfig};

    #[test]
    fn factor_formula() {
        assert_eq!(rebalance_factor(4.0), 0.5);
        assert_eq!(rebalance_factor(1.0), 1.0);
    }

    #[test]
    fn unit_stats_leave_model_unchanged() {
        let cfg = NetConfig::desk_default(vec![HeadSpec::softmax("c", 4)]);
        let m = init_model(&cfg, 2).unwrap();
        assert_eq!(rebalance(&m, &[1.0; 4]).unwrap(), m);
    }

    #[test]
    fn rejects_bad_stats() {
        let cfg = NetConfig::desk_default(vec![HeadSpec::softmax("c", 4)]);
        let m = init_model(&cfg, 2).unwrap();
        assert!(matches!(
            rebalance(&m, &[1.0, 0.0, 1.0, 1.0]),
            Err(Error::NonPositiveStats { .. })
        ));
        assert!(rebalance(&m, &[1.0; 3]).is_err());
    }
}
