//! Bilinear hypercolumn gathering and its adjoint, the gradient scatter.

use super::config::NetConfig;
use super::model::{FeatureMap, Features};
use crate::error::{Error, Result};

/// Four `(cell index, weight)` pairs around a continuous grid position, in the
/// order top-left, top-right, bottom-left, bottom-right. Positions outside the
/// grid are clamped to its edge. Fractions are snapped to a 2^-24 grid, which
/// keeps every product exact, so the weights sum to exactly one.
pub fn bilinear_weights(gx: f64, gy: f64, width: usize, height: usize) -> [(usize, f64); 4] {
    let gx = gx.clamp(0.0, (width - 1) as f64);
    let gy = gy.clamp(0.0, (height - 1) as f64);
    let x0 = (gx.floor() as usize).min(width - 1);
    let y0 = (gy.floor() as usize).min(height - 1);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = snap(gx - x0 as f64);
    let fy = snap(gy - y0 as f64);
    [
        (y0 * width + x0, (1.0 - fx) * (1.0 - fy)),
        (y0 * width + x1, fx * (1.0 - fy)),
        (y1 * width + x0, (1.0 - fx) * fy),
        (y1 * width + x1, fx * fy),
    ]
}

fn snap(f: f64) -> f64 {
    const GRID: f64 = (1u64 << 24) as f64;
    (f * GRID).round() / GRID
}

/// Precomputed interpolation stencil of one image location for every tap.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub taps: Vec<[(usize, f64); 4]>,
}

impl Stencil {
    pub fn new(cfg: &NetConfig, features: &Features, x: f64, y: f64) -> Result<Self> {
        let input = features.map(None);
        if !(x >= 0.0 && y >= 0.0 && x <= (input.width - 1) as f64 && y <= (input.height - 1) as f64) {
            return Err(Error::OutOfBounds {
                x,
                y,
                width: input.width,
                height: input.height,
            });
        }
        let taps = cfg
            .taps
            .iter()
            .map(|t| {
                let layer = cfg.tap_layer(t).expect("validated tap");
                let (scale, offset) = cfg.grid_transform(layer);
                let map = features.map(layer);
                bilinear_weights((x - offset) / scale, (y - offset) / scale, map.width, map.height)
            })
            .collect();
        Ok(Self { taps })
    }
}

fn tap_map<'a>(cfg: &NetConfig, features: &'a Features, tap: &str) -> &'a FeatureMap {
    features.map(cfg.tap_layer(tap).expect("validated tap"))
}

/// Hypercolumn descriptor at image location `(x, y)`: every tap bilinearly
/// sampled at the corresponding point of its own grid, concatenated in tap
/// order.
pub fn gather_hypercolumn(cfg: &NetConfig, features: &Features, x: f64, y: f64) -> Result<Vec<f64>> {
    let stencil = Stencil::new(cfg, features, x, y)?;
    Ok(gather_with(cfg, features, &stencil))
}

pub fn gather_with(cfg: &NetConfig, features: &Features, stencil: &Stencil) -> Vec<f64> {
    let mut out = Vec::with_capacity(cfg.descriptor_len());
    for (tap, weights) in cfg.taps.iter().zip(&stencil.taps) {
        let map = tap_map(cfg, features, tap);
        for c in 0..map.channels {
            let plane = map.plane(c);
            out.push(weights.iter().map(|(i, w)| w * plane[*i]).sum());
        }
    }
    out
}

/// Adjoint of [`gather_with`]: adds each descriptor gradient entry to the four
/// surrounding cells of its tap, weighted by the same bilinear weights.
/// `grads` holds one map per network map (input first), shaped like `features`.
pub fn scatter_with(cfg: &NetConfig, grads: &mut [FeatureMap], stencil: &Stencil, descriptor_grad: &[f64]) {
    let mut offset = 0;
    for (tap, weights) in cfg.taps.iter().zip(&stencil.taps) {
        let slot = match cfg.tap_layer(tap).expect("validated tap") {
            None => 0,
            Some(i) => i + 1,
        };
        let map = &mut grads[slot];
        for c in 0..map.channels {
            let g = descriptor_grad[offset + c];
            if g == 0.0 {
                continue;
            }
            let plane = map.plane_mut(c);
            for (i, w) in weights {
                plane[*i] += w * g;
            }
        }
        offset += map.channels;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_point_weights() {
        let w = bilinear_weights(2.0, 1.0, 5, 4);
        assert_eq!(w[0], (7, 1.0));
        assert_eq!(w[1].1 + w[2].1 + w[3].1, 0.0);
    }

    #[test]
    fn center_weights() {
        let w = bilinear_weights(1.5, 2.5, 5, 4);
        assert!(w.iter().all(|(_, v)| *v == 0.25));
        assert_eq!([w[0].0, w[1].0, w[2].0, w[3].0], [11, 12, 16, 17]);
    }

    #[test]
    fn horizontal_fraction() {
        let w = bilinear_weights(1.25, 0.0, 5, 4);
        assert_eq!([w[0].1, w[1].1, w[2].1, w[3].1], [0.75, 0.25, 0.0, 0.0]);
        assert_eq!((w[0].0, w[1].0), (1, 2));
    }

    #[test]
    fn clamps_at_edges() {
        let w = bilinear_weights(-0.4, 9.0, 3, 3);
        assert_eq!(w[0], (6, 1.0));
        let w = bilinear_weights(2.0, 2.0, 3, 3);
        assert_eq!(w.iter().map(|(_, v)| v).sum::<f64>(), 1.0);
        assert!(w.iter().all(|(i, _)| *i == 8));
    }

    #[test]
    fn weights_sum_to_one_exactly() {
        for i in 0..1000 {
            let gx = (i as f64 * 0.7548776662466927) % 6.0;
            let gy = (i as f64 * 0.5698402909980532) % 4.0;
            let w = bilinear_weights(gx, gy, 7, 5);
            assert_eq!(w.iter().map(|(_, v)| v).sum::<f64>(), 1.0, "{gx} {gy}");
        }
    }
}
