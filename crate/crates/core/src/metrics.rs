//! Per-pair distance transforms, the Poincaré ball distance, and the
//! Chamfer-style set distances built on them.
//!
//! The set distance is the plain sum of the two directional means
//!
//! ```text
//! D(a, b) = 1/|a| Σ_j min_k t(‖a_j − b_k‖) + 1/|b| Σ_k min_j t(‖a_j − b_k‖)
//! ```
//!
//! with no ½ factor. For every transform here `t` is strictly increasing,
//! so the minimum is found on squared Euclidean distances and `t` is applied
//! to the matched distance only. HyperCD is `hyper` with `beta = 2`:
//! `t(d) = arccosh(1 + α d²)`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{sq_dist, Point3, PointCloud};
use crate::matching::{match_indexed, MatchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// `t(d) = d`
    L1,
    /// `t(d) = d²`
    L2,
    /// `t(d) = 1 − exp(−α d^β)`, the bounded per-pair term of density-aware CD.
    Exp,
    /// `t(d) = arccosh(1 + α d^β)`
    Hyper,
}

impl TransformKind {
    pub const ALL: [TransformKind; 4] = [
        TransformKind::L1,
        TransformKind::L2,
        TransformKind::Exp,
        TransformKind::Hyper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::L1 => "l1",
            TransformKind::L2 => "l2",
            TransformKind::Exp => "exp",
            TransformKind::Hyper => "hyper",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown transform kind '{s}'")))
    }
}

/// A transform kind with its parameters. `alpha` and `beta` are carried for
/// every kind but only read by `exp` and `hyper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub alpha: f64,
    pub beta: f64,
}

impl TransformSpec {
    pub const DEFAULT_ALPHA: f64 = 1.0;

    pub fn new(kind: TransformKind, alpha: f64, beta: f64) -> Result<Self> {
        let spec = TransformSpec { kind, alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub const fn l1() -> Self {
        TransformSpec {
            kind: TransformKind::L1,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub const fn l2() -> Self {
        TransformSpec {
            kind: TransformKind::L2,
            alpha: 1.0,
            beta: 2.0,
        }
    }

    pub fn exp(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(TransformKind::Exp, alpha, beta)
    }

    pub fn hyper(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(TransformKind::Hyper, alpha, beta)
    }

    /// HyperCD: `arccosh(1 + α d²)`.
    pub fn hypercd(alpha: f64) -> Result<Self> {
        Self::hyper(alpha, 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, TransformKind::Exp | TransformKind::Hyper) {
            if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
            }
            if !(self.beta > 0.0 && self.beta.is_finite()) {
                return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
            }
        }
        Ok(())
    }

    /// `d^β`, computed from `d²`.
    #[inline]
    pub(crate) fn power_from_sq(&self, sq: f64) -> f64 {
        if self.beta == 2.0 {
            sq
        } else if self.beta == 1.0 {
            sq.sqrt()
        } else {
            sq.powf(0.5 * self.beta)
        }
    }

    /// `t(d)` for a raw Euclidean distance. The spec must be valid and
    /// `d >= 0`; see [`transform`] for the checked version.
    #[inline]
    pub fn value(&self, d: f64) -> f64 {
        self.value_from_sq(d * d)
    }

    /// `t(√sq)`, skipping the square root where the transform allows it.
    #[inline]
    pub fn value_from_sq(&self, sq: f64) -> f64 {
        match self.kind {
            TransformKind::L1 => sq.sqrt(),
            TransformKind::L2 => sq,
            TransformKind::Exp => -(-self.alpha * self.power_from_sq(sq)).exp_m1(),
            TransformKind::Hyper => acosh1p(self.alpha * self.power_from_sq(sq)),
        }
    }

    /// Whether `t(0) = 0` and `t` is differentiable on `[0, ∞)`.
    pub fn is_smooth_at_zero(&self) -> bool {
        match self.kind {
            TransformKind::L1 => false,
            TransformKind::L2 => true,
            TransformKind::Exp => self.beta >= 1.0,
            TransformKind::Hyper => self.beta >= 2.0,
        }
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TransformKind::L1 | TransformKind::L2 => write!(f, "{}", self.kind),
            _ => write!(f, "{}(alpha={}, beta={})", self.kind, self.alpha, self.beta),
        }
    }
}

/// `arccosh(1 + u)` for `u >= 0`, accurate near `u = 0` where the naive
/// `(1 + u).acosh()` loses every significant digit below `u ≈ 1e-8`.
#[inline]
pub fn acosh1p(u: f64) -> f64 {
    if u > 1e8 {
        // u(u+2) would overflow long before log stops being exact
        (1.0 + u).ln() + std::f64::consts::LN_2
    } else {
        (u + (u * (u + 2.0)).sqrt()).ln_1p()
    }
}

/// Checked `t(d)`.
pub fn transform(spec: &TransformSpec, d: f64) -> Result<f64> {
    spec.validate()?;
    if !(d >= 0.0) {
        return Err(Error::invalid(format!("distance must be non-negative, got {d}")));
    }
    Ok(spec.value(d))
}

/// Hyperbolic distance in the Poincaré unit ball.
pub fn poincare_distance(p: &Point3, q: &Point3) -> Result<f64> {
    for (index, x) in [p, q].into_iter().enumerate() {
        if !(x.norm_sq() < 1.0) {
            return Err(Error::OutsideBall { index, norm: x.norm() });
        }
    }
    Ok(poincare_unchecked(sq_dist(p, q), 1.0 - p.norm_sq(), 1.0 - q.norm_sq()))
}

#[inline]
fn poincare_unchecked(sq: f64, conf_p: f64, conf_q: f64) -> f64 {
    acosh1p(2.0 * sq / (conf_p * conf_q))
}

/// Radially pulls every point with norm above `max_norm` back onto the
/// sphere of that radius.
pub fn clip_to_ball(cloud: &PointCloud, max_norm: f64) -> Result<PointCloud> {
    if !(max_norm > 0.0 && max_norm < 1.0) {
        return Err(Error::invalid(format!("max_norm must lie in (0, 1), got {max_norm}")));
    }
    cloud.map(|p| {
        let n = p.norm();
        if n > max_norm {
            *p * (max_norm / n)
        } else {
            *p
        }
    })
}

/// Result of a set-distance evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetDistanceReport {
    /// `d1 + d2`.
    pub value: f64,
    /// Mean of the transformed forward (`a -> b`) matched distances.
    pub d1: f64,
    /// Mean of the transformed backward (`b -> a`) matched distances.
    pub d2: f64,
    /// Correspondences used. For [`chamfer_poincare`] the indices are the
    /// hyperbolic nearest neighbours and the `*_sq` fields hold the squared
    /// Euclidean length of those pairs.
    pub matching: MatchResult,
}

/// Chamfer distance under `spec`, matching with the kd-tree.
pub fn chamfer(a: &PointCloud, b: &PointCloud, spec: &TransformSpec) -> Result<SetDistanceReport> {
    spec.validate()?;
    let matching = match_indexed(a, b);
    Ok(chamfer_from_match(spec, matching))
}

/// Aggregates an existing matching under `spec`. Any valid spec can reuse
/// the same matching.
pub fn chamfer_from_match(spec: &TransformSpec, matching: MatchResult) -> SetDistanceReport {
    let (d1, d2) = chamfer_terms(spec, &matching);
    SetDistanceReport {
        value: d1 + d2,
        d1,
        d2,
        matching,
    }
}

pub(crate) fn chamfer_terms(spec: &TransformSpec, matching: &MatchResult) -> (f64, f64) {
    let mean = |sq: &[f64]| sq.iter().map(|&s| spec.value_from_sq(s)).sum::<f64>() / sq.len() as f64;
    (mean(&matching.fwd_sq), mean(&matching.bwd_sq))
}

const POINCARE_ROW_CHUNK: usize = 64;

/// Per-chunk (row minima, column minima) as (index, distance) pairs.
type ChunkMinima = (Vec<(usize, f64)>, Vec<(usize, f64)>);

/// Chamfer aggregation of the Poincaré distance. The hyperbolic distance is
/// not a function of the Euclidean distance alone, so every pair is
/// evaluated: O(|a|·|b|).
pub fn chamfer_poincare(a: &PointCloud, b: &PointCloud) -> Result<SetDistanceReport> {
    let conformal = |c: &PointCloud| -> Result<Vec<f64>> {
        c.iter()
            .enumerate()
            .map(|(index, p)| {
                let n2 = p.norm_sq();
                if n2 < 1.0 {
                    Ok(1.0 - n2)
                } else {
                    Err(Error::OutsideBall { index, norm: n2.sqrt() })
                }
            })
            .collect()
    };
    let ca = conformal(a)?;
    let cb = conformal(b)?;
    let (ap, bp) = (a.points(), b.points());

    // rows are scanned in parallel chunks; each chunk also keeps its own
    // column minima, merged afterwards in chunk order
    let chunks: Vec<ChunkMinima> = (0..ap.len())
        .collect::<Vec<_>>()
        .par_chunks(POINCARE_ROW_CHUNK)
        .map(|rows| {
            let mut col_best = vec![(usize::MAX, f64::INFINITY); bp.len()];
            let row_best = rows
                .iter()
                .map(|&j| {
                    let mut best = (usize::MAX, f64::INFINITY);
                    for (k, q) in bp.iter().enumerate() {
                        let d = poincare_unchecked(sq_dist(&ap[j], q), ca[j], cb[k]);
                        if d < best.1 {
                            best = (k, d);
                        }
                        if d < col_best[k].1 {
                            col_best[k] = (j, d);
                        }
                    }
                    best
                })
                .collect();
            (row_best, col_best)
        })
        .collect();

    let mut fwd = Vec::with_capacity(ap.len());
    let mut bwd = vec![(usize::MAX, f64::INFINITY); bp.len()];
    for (rows, cols) in chunks {
        fwd.extend(rows);
        for (slot, cand) in bwd.iter_mut().zip(cols) {
            // chunks arrive in increasing row order, so strict < keeps the lowest index
            if cand.1 < slot.1 {
                *slot = cand;
            }
        }
    }

    let d1 = fwd.iter().map(|&(_, d)| d).sum::<f64>() / ap.len() as f64;
    let d2 = bwd.iter().map(|&(_, d)| d).sum::<f64>() / bp.len() as f64;
    let matching = MatchResult {
        fwd_sq: fwd.iter().enumerate().map(|(j, &(k, _))| sq_dist(&ap[j], &bp[k])).collect(),
        fwd_idx: fwd.iter().map(|&(k, _)| k).collect(),
        bwd_sq: bwd.iter().enumerate().map(|(k, &(j, _))| sq_dist(&ap[j], &bp[k])).collect(),
        bwd_idx: bwd.iter().map(|&(j, _)| j).collect(),
    };
    Ok(SetDistanceReport {
        value: d1 + d2,
        d1,
        d2,
        matching,
    })
}
