use super::config::HeadKind;
use super::hypercolumn::{gather_with, Stencil};
use super::model::Model;
use crate::error::{Error, Result};
use crate::field::{FieldChannel, HistogramField};
use crate::image::GrayImage;

/// Dense prediction: one forward pass, then a hypercolumn and head evaluation
/// at every pixel center.
pub fn predict_field(model: &Model, img: &GrayImage) -> Result<HistogramField> {
    let cfg = model.config();
    if let Some(h) = cfg.heads.iter().find(|h| h.kind != HeadKind::Softmax) {
        return Err(Error::InvalidConfig(format!(
            "head `{}` is not a distribution; use predict_outputs",
            h.name
        )));
    }
    let outputs = predict_outputs(model, img)?;
    let channels = cfg
        .heads
        .iter()
        .zip(outputs)
        .map(|(h, data)| FieldChannel {
            name: h.name.clone(),
            k: h.k,
            data,
        })
        .collect();
    HistogramField::new(img.width(), img.height(), channels)
}

/// Raw per-pixel head outputs, one row-major buffer per head.
pub fn predict_outputs(model: &Model, img: &GrayImage) -> Result<Vec<Vec<f64>>> {
    let cfg = model.config();
    let features = model.forward_features(img)?;
    let n = img.len();
    let mut out: Vec<Vec<f64>> = cfg.heads.iter().map(|h| Vec::with_capacity(n * h.k)).collect();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let stencil = Stencil::new(cfg, &features, x as f64, y as f64)?;
            let heads = model.head_predict(&gather_with(cfg, &features, &stencil))?;
            for (buf, h) in out.iter_mut().zip(heads) {
                buf.extend(h);
            }
        }
    }
    Ok(out)
}
