//! Automatic colorization by per-pixel color histogram prediction.
//!
//! A small convolutional network reads a grayscale image, builds a
//! hypercolumn descriptor at every pixel and predicts a distribution over
//! binned color values (hue/chroma or Lab). Decoders turn those distributions
//! into a color image, and histogram transfer can bias them toward a
//! reference palette.

pub mod coding;
pub mod colorspace;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod field;
pub mod histo;
pub mod image;
pub mod io;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod transfer;

pub use coding::Coding;
pub use colorspace::{AlphaBeta, HueChroma, Lab};
pub use decode::{render, DecodeMethod, DecodePolicy};
pub use error::{Error, Result};
pub use field::{FieldChannel, HistogramField};
pub use histo::{BinKind, BinSpec, BinTable, LossConfig, LossVariant, TargetHistogram};
pub use image::{GrayImage, Rgb, RgbImage};
pub use io::{Checkpoint, FieldDump, Image, RunConfig};
pub use metrics::EvalReport;
pub use net::{HeadSpec, LayerSpec, Model, NetConfig};
pub use transfer::{BiasVector, TargetHistogramSet, TransferConfig, TransferResult};
