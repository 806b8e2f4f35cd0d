//! Binds a loss variant to its output heads and bin tables.

use crate::error::{Error, Result};
use crate::histo::{build_bins, BinSpec, BinTable, LossConfig, LossVariant};
use crate::net::HeadSpec;

/// Default per-axis bin count for marginal distributions.
pub const DEFAULT_BINS: usize = 32;
/// Default per-axis bin count for the joint Lab distribution (16 × 16).
pub const DEFAULT_JOINT_BINS: usize = 16;
/// Scale of the Gaussian-quantile Lab bins.
pub const DEFAULT_SIGMA: f64 = 25.0;

/// The color representation a model predicts: loss variant, bin layout and
/// the resulting per-head bin tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Coding {
    pub loss: LossConfig,
    pub bins: usize,
    pub sigma: f64,
    tables: Vec<BinTable>,
}

impl Coding {
    pub fn new(loss: LossConfig, bins: usize, sigma: f64) -> Result<Self> {
        loss.validate()?;
        let specs: Vec<BinSpec> = match loss.variant {
            LossVariant::HueChromaHist => vec![BinSpec::circular(bins), BinSpec::uniform(bins, 0.0, 1.0)],
            LossVariant::LabMarginalHist => vec![BinSpec::gaussian(bins, sigma), BinSpec::gaussian(bins, sigma)],
            LossVariant::LabJointHist => vec![BinSpec::joint_gaussian(bins, sigma)],
            LossVariant::LabL2 => vec![],
        };
        let tables = specs.into_iter().map(build_bins).collect::<Result<_>>()?;
        Ok(Self {
            loss,
            bins,
            sigma,
            tables,
        })
    }

    pub fn hue_chroma() -> Self {
        Self::new(LossConfig::default(), DEFAULT_BINS, DEFAULT_SIGMA).expect("default coding")
    }

    pub fn variant(&self) -> LossVariant {
        self.loss.variant
    }

    /// Channel names, one per head, in head order.
    pub fn channel_names(&self) -> &'static [&'static str] {
        match self.loss.variant {
            LossVariant::HueChromaHist => &["hue", "chroma"],
            LossVariant::LabMarginalHist => &["a", "b"],
            LossVariant::LabJointHist | LossVariant::LabL2 => &["ab"],
        }
    }

    pub fn heads(&self) -> Vec<HeadSpec> {
        match self.loss.variant {
            LossVariant::LabL2 => vec![HeadSpec::linear("ab", 2)],
            _ => self
                .channel_names()
                .iter()
                .zip(&self.tables)
                .map(|(name, t)| HeadSpec::softmax(name, t.len()))
                .collect(),
        }
    }

    /// Bin tables in head order; empty for the regression variant.
    pub fn tables(&self) -> &[BinTable] {
        &self.tables
    }

    pub fn table(&self, channel: &str) -> Result<&BinTable> {
        self.channel_names()
            .iter()
            .position(|n| *n == channel)
            .and_then(|i| self.tables.get(i))
            .ok_or_else(|| Error::MissingChannel(channel.to_string()))
    }

    /// Checks that a model's heads are the ones this coding expects.
    pub fn check_heads(&self, heads: &[HeadSpec]) -> Result<()> {
        if heads != self.heads().as_slice() {
            return Err(Error::InvalidConfig(format!(
                "model heads {:?} do not match the {} coding",
                heads.iter().map(|h| (&h.name, h.k)).collect::<Vec<_>>(),
                self.loss.variant.name()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heads_follow_variant() {
        let hc = Coding::hue_chroma();
        assert_eq!(hc.heads(), vec![HeadSpec::softmax("hue", 32), HeadSpec::softmax("chroma", 32)]);
        assert!(hc.table("hue").unwrap().is_circular());
        let joint = Coding::new(
            LossConfig {
                variant: LossVariant::LabJointHist,
                ..LossConfig::default()
            },
            16,
            25.0,
        )
        .unwrap();
        assert_eq!(joint.heads(), vec![HeadSpec::softmax("ab", 256)]);
        let l2 = Coding::new(
            LossConfig {
                variant: LossVariant::LabL2,
                ..LossConfig::default()
            },
            32,
            25.0,
        )
        .unwrap();
        assert_eq!(l2.heads(), vec![HeadSpec::linear("ab", 2)]);
        assert!(l2.table("ab").is_err());
    }
}
