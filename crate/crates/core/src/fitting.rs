//! Gradient-descent fitting of a free point set to a target.
//!
//! The optimized parameters are the point coordinates themselves. Each
//! epoch re-matches, evaluates the fixed-match gradient and takes one plain
//! step `x ← x − lr · ∇D`. The L1 Chamfer distance is logged alongside the
//! training loss every epoch.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::gradients::chamfer_gradient_from_match;
use crate::matching::{match_indexed, MatchResult};
use crate::metrics::{chamfer_terms, TransformSpec};
use crate::synth::{add_outliers, gen_shape, jitter, ShapeKind};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub spec: TransformSpec,
    /// Step size; zero is allowed and leaves the cloud untouched.
    pub learning_rate: f64,
    pub epochs: usize,
    /// Epochs at which the cloud (before that epoch's update) and its
    /// matching are recorded. `epochs` itself records the final state.
    pub snapshot_epochs: Vec<usize>,
    pub seed: u64,
    /// Standard deviation of gaussian noise added to the initial cloud.
    pub init_jitter: f64,
}

impl FitConfig {
    pub fn new(spec: TransformSpec, learning_rate: f64, epochs: usize) -> Self {
        FitConfig {
            spec,
            learning_rate,
            epochs,
            snapshot_epochs: Vec::new(),
            seed: 0,
            init_jitter: 0.0,
        }
    }

    pub fn with_snapshots(mut self, epochs: impl IntoIterator<Item = usize>) -> Self {
        self.snapshot_epochs = epochs.into_iter().collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if let Some(&e) = self.snapshot_epochs.iter().find(|&&e| e > self.epochs) {
            return Err(Error::invalid(format!("snapshot epoch {e} exceeds epochs {}", self.epochs)));
        }
        if !(self.init_jitter >= 0.0) {
            return Err(Error::invalid("init_jitter must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub epoch: usize,
    pub cloud: PointCloud,
    pub matching: MatchResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrajectory {
    /// Training loss at the start of each epoch.
    pub losses: Vec<f64>,
    /// L1 Chamfer distance at the start of each epoch.
    pub l1_losses: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub target: PointCloud,
    pub final_cloud: PointCloud,
    pub final_loss: f64,
    pub final_l1: f64,
}

impl FitTrajectory {
    pub fn initial_l1(&self) -> f64 {
        self.l1_losses[0]
    }

    /// Whether the training loss never increased, final state included.
    pub fn is_non_increasing(&self) -> bool {
        self.losses
            .iter()
            .chain(std::iter::once(&self.final_loss))
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[1] <= w[0])
    }
}

fn loss_pair(spec: &TransformSpec, m: &MatchResult) -> (f64, f64) {
    let (d1, d2) = chamfer_terms(spec, m);
    let (l1a, l1b) = chamfer_terms(&TransformSpec::l1(), m);
    (d1 + d2, l1a + l1b)
}

pub fn fit(initial: &PointCloud, target: &PointCloud, config: &FitConfig) -> Result<FitTrajectory> {
    config.validate()?;
    let snapshot_at: BTreeSet<usize> = config.snapshot_epochs.iter().copied().collect();
    let mut movable = if config.init_jitter > 0.0 {
        jitter(initial, config.init_jitter, config.seed)?
    } else {
        initial.clone()
    };
    let mut losses = Vec::with_capacity(config.epochs);
    let mut l1_losses = Vec::with_capacity(config.epochs);
    let mut snapshots = Vec::new();

    for epoch in 0..config.epochs {
        let matching = match_indexed(&movable, target);
        let grad = chamfer_gradient_from_match(&movable, target, &config.spec, &matching);
        let (_, l1) = loss_pair(&config.spec, &matching);
        if !grad.is_finite() || !l1.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        losses.push(grad.loss_value);
        l1_losses.push(l1);
        let lr = config.learning_rate;
        let next: Vec<Point3> = movable
            .iter()
            .zip(&grad.grads)
            .map(|(p, g)| *p - *g * lr)
            .collect();
        if snapshot_at.contains(&epoch) {
            snapshots.push(Snapshot {
                epoch,
                cloud: movable.clone(),
                matching,
            });
        }
        movable = PointCloud::new(next).map_err(|_| Error::Diverged { epoch })?;
    }

    let matching = match_indexed(&movable, target);
    let (final_loss, final_l1) = loss_pair(&config.spec, &matching);
    if !final_loss.is_finite() || !final_l1.is_finite() {
        return Err(Error::Diverged { epoch: config.epochs });
    }
    if snapshot_at.contains(&config.epochs) {
        snapshots.push(Snapshot {
            epoch: config.epochs,
            cloud: movable.clone(),
            matching,
        });
    }
    Ok(FitTrajectory {
        losses,
        l1_losses,
        snapshots,
        target: target.clone(),
        final_cloud: movable,
        final_loss,
        final_l1,
    })
}

pub const LOSS_CSV_HEADER: &str = "epoch,loss,l1_cd";

/// One row per epoch plus a final row at index `epochs`.
pub fn write_loss_csv<W: Write + ?Sized>(traj: &FitTrajectory, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{LOSS_CSV_HEADER}")?;
    for (e, (l, l1)) in traj.losses.iter().zip(&traj.l1_losses).enumerate() {
        writeln!(w, "{e},{l},{l1}")?;
    }
    writeln!(w, "{},{},{}", traj.losses.len(), traj.final_loss, traj.final_l1)
}

pub const CORRESPONDENCE_CSV_HEADER: &str = "movable_x,movable_y,movable_z,target_x,target_y,target_z";

pub fn correspondence_file_name(epoch: usize) -> String {
    format!("correspondences_epoch_{epoch}.csv")
}

pub fn write_correspondences<W: Write + ?Sized>(snapshot: &Snapshot, target: &PointCloud, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{CORRESPONDENCE_CSV_HEADER}")?;
    for (p, &k) in snapshot.cloud.iter().zip(&snapshot.matching.fwd_idx) {
        let q = target[k];
        writeln!(w, "{},{},{},{},{},{}", p.x, p.y, p.z, q.x, q.y, q.z)?;
    }
    Ok(())
}

/// Writes one correspondence CSV per snapshot into `dir`, returning the
/// paths in snapshot order.
pub fn export_correspondences(traj: &FitTrajectory, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if traj.snapshots.is_empty() {
        return Err(Error::invalid("trajectory has no snapshots"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    traj.snapshots
        .iter()
        .map(|s| {
            let path = dir.join(correspondence_file_name(s.epoch));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            write_correspondences(s, &traj.target, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Final L1 Chamfer distances over an `alphas × lrs` grid of HyperCD fits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub lrs: Vec<f64>,
    /// `cells[i][j]` is the result for `alphas[i]`, `lrs[j]`; failed fits
    /// keep their error message.
    pub cells: Vec<Vec<std::result::Result<f64, String>>>,
}

pub fn sweep_alpha_lr(
    initial: &PointCloud,
    target: &PointCloud,
    alphas: &[f64],
    lrs: &[f64],
    epochs: usize,
) -> Result<SweepGrid> {
    if alphas.is_empty() || lrs.is_empty() {
        return Err(Error::invalid("sweep grids must be non-empty"));
    }
    let cells = alphas
        .par_iter()
        .map(|&alpha| {
            lrs.iter()
                .map(|&lr| {
                    let spec = TransformSpec::hypercd(alpha).map_err(|e| e.to_string())?;
                    fit(initial, target, &FitConfig::new(spec, lr, epochs))
                        .map(|t| t.final_l1)
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();
    Ok(SweepGrid {
        alphas: alphas.to_vec(),
        lrs: lrs.to_vec(),
        cells,
    })
}

/// Rows are alphas, columns learning rates; failed cells print `error`.
pub fn write_sweep_csv<W: Write + ?Sized>(grid: &SweepGrid, w: &mut W) -> std::io::Result<()> {
    write!(w, "alpha")?;
    for lr in &grid.lrs {
        write!(w, ",{lr}")?;
    }
    writeln!(w)?;
    for (alpha, row) in grid.alphas.iter().zip(&grid.cells) {
        write!(w, "{alpha}")?;
        for cell in row {
            match cell {
                Ok(v) => write!(w, ",{v}")?,
                Err(_) => write!(w, ",error")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Per-pair gradient weights `t′(d)` for both directions of a matching.
pub fn pair_weights(spec: &TransformSpec, matching: &MatchResult) -> (Vec<f64>, Vec<f64>) {
    let w = |sq: &[f64]| sq.iter().map(|s| spec.derivative(s.sqrt())).collect();
    (w(&matching.fwd_sq), w(&matching.bwd_sq))
}

/// A unit sphere target and a gaussian-jittered copy as the starting cloud.
pub fn jittered_sphere_task(n: usize, sigma: f64, seed: u64) -> Result<(PointCloud, PointCloud)> {
    let target = gen_shape(ShapeKind::SphereSurface, n, seed)?;
    let initial = jitter(&target, sigma, seed.wrapping_add(1))?;
    Ok((initial, target))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierTask {
    pub initial: PointCloud,
    /// Clean sphere with a fraction of points pushed far away.
    pub target: PointCloud,
    pub clean_target: PointCloud,
    /// Indices into `target` of the displaced points.
    pub outliers: Vec<usize>,
}

/// Jittered-sphere task whose target has `fraction` of its points displaced
/// by ten times the shape diameter.
pub fn outlier_task(n: usize, sigma: f64, fraction: f64, seed: u64) -> Result<OutlierTask> {
    let (initial, clean_target) = jittered_sphere_task(n, sigma, seed)?;
    let diameter = clean_target.bounding_box().max_extent();
    let (target, outliers) = add_outliers(&clean_target, fraction, 10.0 * diameter, seed.wrapping_add(2))?;
    Ok(OutlierTask {
        initial,
        target,
        clean_target,
        outliers,
    })
}
