//! Whole-run helpers: the training loop and single-image colorization.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decode::{render, render_ab, DecodePolicy};
use crate::error::{Error, Result};
use crate::field::HistogramField;
use crate::histo::LossVariant;
use crate::image::{GrayImage, RgbImage};
use crate::io::{Checkpoint, RunConfig};
use crate::net::{
    activation_second_moments, init_model, predict_field, predict_outputs, rebalance, train_step, Model,
    TrainingExample,
};

/// Images used to estimate activation statistics for rebalancing.
const CALIBRATION_IMAGES: usize = 16;
/// Mixed into the seed for the batch-order stream so it differs from init.
const ORDER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Initializes a model from `seed`, optionally rebalances it on the training
/// images, and runs `epochs` passes of SGD over shuffled batches.
pub fn train_model(cfg: &RunConfig, images: &[RgbImage], epochs: usize, seed: u64) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::Empty("training images"));
    }
    let examples: Vec<TrainingExample> = images.iter().cloned().map(TrainingExample::new).collect();
    let mut model = init_model(&cfg.net, seed)?;
    if cfg.rebalance {
        let calib: Vec<GrayImage> = examples.iter().take(CALIBRATION_IMAGES).map(|e| e.gray.clone()).collect();
        model = rebalance(&model, &activation_second_moments(&model, &calib)?)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ORDER_STREAM);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainingExample> = chunk.iter().map(|i| examples[*i].clone()).collect();
            total += train_step(&mut model, &batch, &cfg.coding, cfg.lr, rng.random())?;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    Ok((model, TrainReport { epoch_losses }))
}

/// Dense histogram prediction; errors for regression models.
pub fn predict(ckpt: &Checkpoint, gray: &GrayImage) -> Result<HistogramField> {
    predict_field(&ckpt.model, gray)
}

/// Predicts and decodes a colorization of `gray`.
pub fn colorize(ckpt: &Checkpoint, gray: &GrayImage, policy: &DecodePolicy) -> Result<RgbImage> {
    if ckpt.config.coding.variant() == LossVariant::LabL2 {
        let out = predict_outputs(&ckpt.model, gray)?;
        return render_ab(&out[0], gray);
    }
    render(&predict(ckpt, gray)?, gray, &ckpt.config.coding, policy)
}

/// The no-colorization reference: the gray image in all three channels.
pub fn gray_baseline(gray: &GrayImage) -> RgbImage {
    RgbImage::from_gray(gray)
}
