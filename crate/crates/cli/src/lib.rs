//! The `hcolor` command line: train, colorize, transfer, sample and eval.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use hcolor_core::decode::{DecodeMethod, DecodePolicy};
use hcolor_core::error::{Error, Result};
use hcolor_core::io::{
    list_images, load_checkpoint, load_config, load_image, save_checkpoint, save_field, save_gray, save_report,
    save_rgb, Checkpoint, FieldDump,
};
use hcolor_core::metrics::evaluate;
use hcolor_core::pipeline::{colorize, predict, train_model};
use hcolor_core::transfer::{
    biased_samples, energy_minimize, image_targets, quantile_match, rotation_biases, uncertainty_map, TransferConfig,
};
use hcolor_core::{render, GrayImage, LossVariant, RgbImage};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Log-bias amplitude used to steer alternative samples around the hue wheel.
const SAMPLE_BIAS_STRENGTH: f64 = 2.0;

#[derive(Debug, Parser)]
#[command(name = "hcolor", version, about = "Colorize grayscale images by predicting per-pixel color histograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Policy {
    Expectation,
    Median,
    Mode,
    Sample,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Quantile,
    Energy,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on a directory of color images.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the epoch count of the config file.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Colorize one grayscale (or color, which is desaturated) image.
    Colorize {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dump_field: Option<PathBuf>,
        #[arg(long, value_enum)]
        policy: Option<Policy>,
        #[arg(long)]
        no_fading: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Colorize, then pull the result toward the colors of a reference image.
    Transfer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw several alternative colorizations and an uncertainty map.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out_prefix: String,
        #[arg(long)]
        uncertainty: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare predictions against ground truth, matched by file stem.
    Eval {
        #[arg(long)]
        pred_dir: PathBuf,
        #[arg(long)]
        gt_dir: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

fn policy_for(ckpt: &Checkpoint, policy: Option<Policy>, no_fading: bool, seed: u64) -> DecodePolicy {
    let mut p = DecodePolicy::for_variant(ckpt.config.coding.variant());
    if let Some(choice) = policy {
        let m = match choice {
            Policy::Expectation => DecodeMethod::Expectation,
            Policy::Median => DecodeMethod::Median,
            Policy::Mode => DecodeMethod::Mode,
            Policy::Sample => DecodeMethod::Sample,
        };
        p.color = m;
        // a circular median is undefined, so hue keeps its expectation then
        if m != DecodeMethod::Median {
            p.hue = m;
        }
    }
    p.chromatic_fading = !no_fading;
    p.seed = seed;
    p
}

fn load_gray(path: &Path) -> Result<GrayImage> {
    Ok(load_image(path)?.into_gray())
}

fn train(config: &Path, data: &Path, out: &Path, seed: u64, epochs: Option<usize>) -> Result<()> {
    let cfg = load_config(config)?;
    let paths = list_images(data)?;
    if paths.is_empty() {
        return Err(Error::Format {
            path: data.to_path_buf(),
            reason: "no images found".into(),
        });
    }
    let images: Vec<RgbImage> = paths
        .iter()
        .map(|p| load_image(p).map(|i| i.into_rgb()))
        .collect::<Result<_>>()?;
    let epochs = epochs.unwrap_or(cfg.epochs);
    let (model, report) = train_model(&cfg, &images, epochs, seed)?;
    for (i, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch {} loss {l:.6}", i + 1);
    }
    save_checkpoint(&Checkpoint::new(cfg, model)?, out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            data,
            out,
            seed,
            epochs,
        } => train(&config, &data, &out, seed, epochs),
        Command::Colorize {
            ckpt,
            input,
            out,
            dump_field,
            policy,
            no_fading,
            seed,
        } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let gray = load_gray(&input)?;
            let policy = policy_for(&ckpt, policy, no_fading, seed);
            if let Some(path) = dump_field {
                let field = predict(&ckpt, &gray)?;
                save_field(&FieldDump::from_coding(field, &ckpt.config.coding)?, &path)?;
            }
            save_rgb(&colorize(&ckpt, &gray, &policy)?, &out)
        }
        Command::Transfer {
            ckpt,
            input,
            target,
            method,
            out,
            lambda,
            seed,
        } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let gray = load_gray(&input)?;
            let target = load_image(&target)?.into_rgb();
            let policy = policy_for(&ckpt, None, false, seed);
            let result = match method {
                Method::Quantile => quantile_match(&colorize(&ckpt, &gray, &policy)?, &target)?,
                Method::Energy => {
                    let coding = &ckpt.config.coding;
                    let field = predict(&ckpt, &gray)?;
                    let cfg = TransferConfig {
                        lambda,
                        ..TransferConfig::default()
                    };
                    let fit = energy_minimize(&field, &image_targets(&target, coding)?, &cfg)?;
                    render(&fit.posterior, &gray, coding, &policy)?
                }
            };
            save_rgb(&result, &out)
        }
        Command::Sample {
            ckpt,
            input,
            n,
            out_prefix,
            uncertainty,
            seed,
        } => {
            let ckpt = load_checkpoint(&ckpt)?;
            if ckpt.config.coding.variant() != LossVariant::HueChromaHist {
                return Err(Error::InvalidArgument("sampling needs a hue/chroma model".into()));
            }
            let gray = load_gray(&input)?;
            let coding = &ckpt.config.coding;
            let policy = policy_for(&ckpt, None, false, seed);
            let field = predict(&ckpt, &gray)?;
            // the seed picks where on the hue wheel the sample set starts
            let phase = std::f64::consts::TAU * (seed % 1000) as f64 / 1000.0;
            let biases = rotation_biases(coding, n, SAMPLE_BIAS_STRENGTH, phase);
            for (i, img) in biased_samples(&field, &biases, &gray, coding, &policy)?.iter().enumerate() {
                save_rgb(img, Path::new(&format!("{out_prefix}{i}.png")))?;
            }
            save_gray(&uncertainty_map(&field, coding, &policy)?, &uncertainty)
        }
        Command::Eval {
            pred_dir,
            gt_dir,
            report,
        } => {
            let gts = list_images(&gt_dir)?;
            if gts.is_empty() {
                return Err(Error::Format {
                    path: gt_dir,
                    reason: "no images found".into(),
                });
            }
            let preds = list_images(&pred_dir)?;
            let mut pred_imgs = Vec::new();
            let mut gt_imgs = Vec::new();
            for gt in &gts {
                let stem = gt.file_stem();
                let pred = preds.iter().find(|p| p.file_stem() == stem).ok_or_else(|| Error::Format {
                    path: gt.clone(),
                    reason: format!("no prediction in {}", pred_dir.display()),
                })?;
                pred_imgs.push(load_image(pred)?.into_rgb());
                gt_imgs.push(load_image(gt)?.into_rgb());
            }
            let r = evaluate(&pred_imgs, &gt_imgs)?;
            println!("rmse_ab {:.6} psnr {:.4} dB", r.rmse_ab, r.psnr_mean_db);
            save_report(&r, &report)
        }
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
