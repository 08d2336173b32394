//! Everything the binary prints or writes, as plain functions of library
//! values. The subcommands only parse arguments and call into here, so the
//! same bytes can be produced without going through the executable.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::fitting::{export_correspondences, write_loss_csv, FitTrajectory};
use crate::io::{write_cloud, CloudFormat};
use crate::metrics::SetDistanceReport;

/// Factor applied by `--scale-display`.
pub const DISPLAY_SCALE: f64 = 1000.0;

pub fn distance_text(report: &SetDistanceReport, scale: f64) -> String {
    format!(
        "value {}\nd1 {}\nd2 {}\n",
        report.value * scale,
        report.d1 * scale,
        report.d2 * scale
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalFormat {
    Csv,
    Json,
}

pub fn eval_text(report: &EvalReport, format: EvalFormat) -> String {
    match format {
        EvalFormat::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf).expect("writing to a Vec cannot fail");
            String::from_utf8(buf).expect("CSV is ASCII")
        }
        EvalFormat::Json => format!("{}\n", report.to_json()),
    }
}

pub fn fit_summary_text(traj: &FitTrajectory) -> String {
    format!(
        "epochs {}\ninitial_loss {}\nfinal_loss {}\ninitial_l1 {}\nfinal_l1 {}\n",
        traj.losses.len(),
        traj.losses[0],
        traj.final_loss,
        traj.initial_l1(),
        traj.final_l1
    )
}

pub const LOSS_FILE_NAME: &str = "loss.csv";

pub fn cloud_extension(format: CloudFormat) -> &'static str {
    match format {
        CloudFormat::Xyz => "xyz",
        CloudFormat::PlyAscii => "ply",
    }
}

pub fn snapshot_file_name(epoch: usize, format: CloudFormat) -> String {
    format!("snapshot_epoch_{epoch}.{}", cloud_extension(format))
}

pub fn final_file_name(format: CloudFormat) -> String {
    format!("final.{}", cloud_extension(format))
}

/// Creates `path` and hands a buffered writer to `body`, mapping any
/// failure to an I/O error naming the path.
pub fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes the loss curve, one cloud per snapshot, one correspondence CSV per
/// snapshot and the final cloud into `dir`. Returns the written paths in
/// that order.
pub fn write_fit_outputs(traj: &FitTrajectory, dir: &Path, format: CloudFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let loss_path = dir.join(LOSS_FILE_NAME);
    write_file(&loss_path, |w| write_loss_csv(traj, w))?;
    written.push(loss_path);

    for snap in &traj.snapshots {
        let path = dir.join(snapshot_file_name(snap.epoch, format));
        write_cloud(&snap.cloud, &path, format)?;
        written.push(path);
    }
    if !traj.snapshots.is_empty() {
        written.extend(export_correspondences(traj, dir)?);
    }

    let final_path = dir.join(final_file_name(format));
    write_cloud(&traj.final_cloud, &final_path, format)?;
    written.push(final_path);
    Ok(written)
}

/// Default name for the cropped cloud: `<stem>_partial.<ext>` next to `full`.
pub fn partial_path_for(full: &Path) -> PathBuf {
    let stem = full.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    let name = match full.extension() {
        Some(ext) => format!("{stem}_partial.{}", ext.to_string_lossy()),
        None => format!("{stem}_partial"),
    };
    full.with_file_name(name)
}
