//! Completion metrics: Chamfer (L1 and L2), F-Score at a distance
//! threshold, and Hausdorff distance.

use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::matching::{match_indexed, MatchResult};
use crate::metrics::{chamfer_from_match, TransformSpec};

fn fraction_within(sq: &[f64], threshold: f64) -> f64 {
    sq.iter().filter(|s| s.sqrt() < threshold).count() as f64 / sq.len() as f64
}

fn fscore_from_match(m: &MatchResult, threshold: f64) -> f64 {
    let precision = fraction_within(&m.fwd_sq, threshold);
    let recall = fraction_within(&m.bwd_sq, threshold);
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("threshold must be positive, got {threshold}")))
    }
}

/// Harmonic mean of precision (fraction of `a` within `threshold` of `b`)
/// and recall (fraction of `b` within `threshold` of `a`).
pub fn fscore(a: &PointCloud, b: &PointCloud, threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    Ok(fscore_from_match(&match_indexed(a, b), threshold))
}

pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> f64 {
    match_indexed(a, b).max_distance()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    Absolute(f64),
    /// Percentage of the ground-truth bounding-box diagonal.
    PercentOfDiagonal(f64),
}

impl ThresholdMode {
    pub const DEFAULT_PERCENT: f64 = 1.0;

    pub fn resolve(&self, gt: &PointCloud) -> Result<f64> {
        let t = match *self {
            ThresholdMode::Absolute(v) => v,
            ThresholdMode::PercentOfDiagonal(p) => p / 100.0 * gt.bounding_box().diagonal(),
        };
        check_threshold(t)?;
        Ok(t)
    }
}

impl FromStr for ThresholdMode {
    type Err = Error;

    /// `abs:<value>`, `pct:<percent>`, or `pct` for 1%.
    fn from_str(s: &str) -> Result<Self> {
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad threshold value '{v}'")))
        };
        match s.split_once(':') {
            None if s == "pct" => Ok(ThresholdMode::PercentOfDiagonal(Self::DEFAULT_PERCENT)),
            Some(("abs", v)) => Ok(ThresholdMode::Absolute(num(v)?)),
            Some(("pct", v)) => Ok(ThresholdMode::PercentOfDiagonal(num(v)?)),
            _ => Err(Error::invalid(format!(
                "threshold mode must be 'abs:<value>', 'pct:<percent>' or 'pct', got '{s}'"
            ))),
        }
    }
}

/// Unscaled evaluation metrics of a prediction against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub cd_l1: f64,
    pub cd_l2: f64,
    pub fscore: f64,
    pub fscore_threshold: f64,
    pub hausdorff: f64,
}

pub const EVAL_KEYS: [&str; 5] = ["cd_l1", "cd_l2", "fscore", "fscore_threshold", "hausdorff"];

impl EvalReport {
    pub fn values(&self) -> [f64; 5] {
        [self.cd_l1, self.cd_l2, self.fscore, self.fscore_threshold, self.hausdorff]
    }

    /// Multiplies both Chamfer fields by `factor` (table presentation).
    pub fn with_cd_scale(mut self, factor: f64) -> Self {
        self.cd_l1 *= factor;
        self.cd_l2 *= factor;
        self
    }

    /// Header line plus one value line.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", EVAL_KEYS.join(","))?;
        let vals: Vec<String> = self.values().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", vals.join(","))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

pub fn evaluate(pred: &PointCloud, gt: &PointCloud, mode: ThresholdMode) -> Result<EvalReport> {
    let threshold = mode.resolve(gt)?;
    let m = match_indexed(pred, gt);
    let fscore = fscore_from_match(&m, threshold);
    let hausdorff = m.max_distance();
    let cd_l1 = chamfer_from_match(&TransformSpec::l1(), m.clone()).value;
    let cd_l2 = chamfer_from_match(&TransformSpec::l2(), m).value;
    Ok(EvalReport {
        cd_l1,
        cd_l2,
        fscore,
        fscore_threshold: threshold,
        hausdorff,
    })
}
