//! File formats: images, checkpoints, field dumps, configs and reports.

mod checkpoint;
mod config;
mod field_dump;
mod image_io;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{load_config, parse_config, RunConfig};
pub use field_dump::{decode_field, encode_field, load_field, save_field, FieldDump, FIELD_MAGIC, FIELD_VERSION};
pub use image_io::{decode_image, encode_png, encode_pnm, load_image, save_gray, save_image, save_rgb, Image};

use crate::error::{Error, Result};
use crate::metrics::EvalReport;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "ppm", "pgm", "pnm"];

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Format {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if ok && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// The curve file that accompanies a report: `<report>.curve`.
pub fn curve_path(report: &Path) -> PathBuf {
    let mut s = report.as_os_str().to_owned();
    s.push(".curve");
    PathBuf::from(s)
}

pub fn report_text(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "rmse_ab = {:.6}", report.rmse_ab);
    let _ = writeln!(s, "psnr_mean_db = {:.6}", report.psnr_mean_db);
    let _ = writeln!(s, "images = {}", report.per_image_psnr.len());
    for (i, p) in report.per_image_psnr.iter().enumerate() {
        let _ = writeln!(s, "psnr_db.{i} = {p:.6}");
    }
    s
}

pub fn curve_text(report: &EvalReport) -> String {
    let mut s = String::new();
    for (t, f) in &report.cumulative_curve {
        let _ = writeln!(s, "{t:.4} {f:.6}");
    }
    s
}

/// Writes `report` as `key = value` lines and its curve next to it.
pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    let write = |p: &Path, text: String| {
        std::fs::write(p, text).map_err(|e| Error::Format {
            path: p.to_path_buf(),
            reason: e.to_string(),
        })
    };
    write(path, report_text(report))?;
    write(&curve_path(path), curve_text(report))
}
