//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::Path;

use crate::coding::{Coding, DEFAULT_BINS, DEFAULT_JOINT_BINS, DEFAULT_SIGMA};
use crate::error::{Error, Result};
use crate::histo::{LossConfig, LossVariant};
use crate::net::{LayerSpec, NetConfig};

/// Everything a training run needs besides the data and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub net: NetConfig,
    pub coding: Coding,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Rescale each conv layer to unit activation second moment after init.
    pub rebalance: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let coding = Coding::hue_chroma();
        Self {
            net: NetConfig::desk_default(coding.heads()),
            coding,
            lr: 0.01,
            batch_size: 8,
            epochs: 10,
            rebalance: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.coding.check_heads(&self.net.heads)?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Serializes to the same format [`parse_config`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.net.layers {
            let _ = writeln!(
                s,
                "layer = {}, {}, {}, {}, {}, {}",
                l.name, l.in_channels, l.out_channels, l.kernel, l.stride, l.pool
            );
        }
        let _ = writeln!(s, "taps = {}", self.net.taps.join(", "));
        let _ = writeln!(s, "head_width = {}", self.net.head_width);
        let _ = writeln!(s, "samples_per_image = {}", self.net.samples_per_image);
        let _ = writeln!(s, "variant = {}", self.coding.variant().name());
        let _ = writeln!(s, "bins = {}", self.coding.bins);
        let _ = writeln!(s, "sigma = {:?}", self.coding.sigma);
        let _ = writeln!(s, "lambda_h = {:?}", self.coding.loss.lambda_h);
        let _ = writeln!(s, "region = {}", self.coding.loss.region);
        let _ = writeln!(s, "lr = {:?}", self.lr);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "rebalance = {}", self.rebalance);
        s
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::ConfigParse {
        line,
        reason: format!("`{key}` expects a number, got `{v}`"),
    })
}

/// Parses a config. Keys left out take the defaults of [`RunConfig::default`];
/// `layer` lines, when present, replace the default layer stack.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let base = RunConfig::default();
    let mut layers = Vec::new();
    let mut taps = None;
    let mut head_width = base.net.head_width;
    let mut samples = base.net.samples_per_image;
    let mut variant = base.coding.variant();
    let mut bins = None;
    let mut sigma = DEFAULT_SIGMA;
    let mut loss = LossConfig::default();
    let mut lr = base.lr;
    let mut batch_size = base.batch_size;
    let mut epochs = base.epochs;
    let mut rebalance = base.rebalance;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::ConfigParse {
                line,
                reason: format!("expected `key = value`, got `{body}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "layer" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 6 {
                    return Err(Error::ConfigParse {
                        line,
                        reason: "layer expects `name, in, out, kernel, stride, pool`".into(),
                    });
                }
                let n = |j: usize| num::<usize>(line, key, parts[j]);
                layers.push(LayerSpec::new(parts[0], n(1)?, n(2)?, n(3)?, n(4)?, n(5)?));
            }
            "taps" => taps = Some(value.split(',').map(|t| t.trim().to_string()).collect::<Vec<_>>()),
            "head_width" => head_width = num(line, key, value)?,
            "samples_per_image" => samples = num(line, key, value)?,
            "variant" => {
                variant = LossVariant::from_name(value).ok_or_else(|| Error::ConfigParse {
                    line,
                    reason: format!("unknown variant `{value}`"),
                })?
            }
            "bins" => bins = Some(num(line, key, value)?),
            "sigma" => sigma = num(line, key, value)?,
            "lambda_h" => loss.lambda_h = num(line, key, value)?,
            "region" => loss.region = num(line, key, value)?,
            "lr" => lr = num(line, key, value)?,
            "batch_size" => batch_size = num(line, key, value)?,
            "epochs" => epochs = num(line, key, value)?,
            "rebalance" => {
                rebalance = value.parse().map_err(|_| Error::ConfigParse {
                    line,
                    reason: format!("`rebalance` expects true or false, got `{value}`"),
                })?
            }
            _ => {
                return Err(Error::ConfigParse {
                    line,
                    reason: format!("unknown key `{key}`"),
                })
            }
        }
    }

    loss.variant = variant;
    let bins = bins.unwrap_or(if variant == LossVariant::LabJointHist {
        DEFAULT_JOINT_BINS
    } else {
        DEFAULT_BINS
    });
    let coding = Coding::new(loss, bins, sigma)?;
    let mut net = NetConfig::desk_default(coding.heads());
    if !layers.is_empty() {
        // custom stacks tap every layer unless told otherwise
        net.taps = std::iter::once("data".to_string())
            .chain(layers.iter().map(|l| l.name.clone()))
            .collect();
        net.layers = layers;
    }
    if let Some(t) = taps {
        net.taps = t;
    }
    net.head_width = head_width;
    net.samples_per_image = samples;
    let cfg = RunConfig {
        net,
        coding,
        lr,
        batch_size,
        epochs,
        rebalance,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(parse_config("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn text_round_trip() {
        let cfg = parse_config(
            "layer = c1, 1, 4, 3, 1, 2\nlayer = c2, 4, 8, 3, 2, 1\ntaps = data, c2\nvariant = lab_joint_hist\nlr = 0.05 # faster\n",
        )
        .unwrap();
        assert_eq!(cfg.net.layers.len(), 2);
        assert_eq!(cfg.net.taps, vec!["data", "c2"]);
        assert_eq!(cfg.coding.bins, DEFAULT_JOINT_BINS);
        assert_eq!(cfg.net.heads[0].k, 256);
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config("lr = 0.1\nmomentum = 0.9\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { line: 2, .. }), "{err}");
        assert!(parse_config("lr = fast").is_err());
        assert!(parse_config("layer = c1, 1, 4").is_err());
    }
}
