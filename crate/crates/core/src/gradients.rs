//! Analytic gradients of the Chamfer-style distances with respect to the
//! movable cloud, the HyperCD gradient weight, a finite-difference oracle,
//! and transform/derivative curve sampling.
//!
//! Gradients hold the nearest-neighbour assignment fixed. With
//! `d_j = ‖x_j − y_{m(j)}‖` the contribution of a matched pair to
//! `∂D/∂x_j` is `t′(d_j) · (x_j − y_{m(j)}) / d_j`, scaled by `1/|x|` for
//! forward matches and `1/|y|` for backward matches. For HyperCD the scalar
//! `t′(d)` is the weight
//!
//! ```text
//! z(d) = 2αd / √((1 + αd²)² − 1) = 2α / √(2α + α²d²)
//! ```
//!
//! which is strictly decreasing in `d` and equals `√(2α)` at `d = 0`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{sq_dist, Point3, PointCloud};
use crate::matching::{match_indexed, MatchResult};
use crate::metrics::{chamfer, chamfer_terms, TransformKind, TransformSpec};

/// Matched distances below this are treated as non-smooth points.
pub const NEAR_ZERO_DISTANCE: f64 = 1e-6;
/// Nearest/second-nearest distance gaps below this are treated as ties.
pub const NEAR_TIE_GAP: f64 = 1e-6;
/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Components smaller than this fraction of the largest gradient component
/// are compared against that fraction instead of their own magnitude.
pub const REL_ERROR_FLOOR_FRACTION: f64 = 1e-3;

impl TransformSpec {
    /// `t′(d)` for `d >= 0`. May be `+∞` at `d = 0` (hyper with `β < 2`,
    /// exp with `β < 1`). For `l1` this is the right derivative, 1.
    pub fn derivative(&self, d: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        match self.kind {
            TransformKind::L1 => 1.0,
            TransformKind::L2 => 2.0 * d,
            TransformKind::Exp => a * b * d.powf(b - 1.0) * (-a * d.powf(b)).exp(),
            TransformKind::Hyper if b == 2.0 => z_unchecked(d, a),
            TransformKind::Hyper => {
                // αβ d^{β−1} / √(u(u+2)) with u = α d^β, with d^{β/2} cancelled
                let u = a * d.powf(b);
                b * a.sqrt() * d.powf(0.5 * b - 1.0) / (u + 2.0).sqrt()
            }
        }
    }

    /// `t′(d) / d` given `d²`: the factor multiplying `x − y` in the
    /// gradient. Coincident points get zero.
    #[inline]
    fn radial_factor(&self, sq: f64) -> f64 {
        if self.kind == TransformKind::L2 {
            return 2.0;
        }
        if sq == 0.0 {
            return 0.0;
        }
        let d = sq.sqrt();
        self.derivative(d) / d
    }
}

#[inline]
fn z_unchecked(d: f64, alpha: f64) -> f64 {
    2.0 * alpha / (2.0 * alpha + alpha * alpha * d * d).sqrt()
}

/// HyperCD gradient weight `z(d)`; the `d = 0` value is the limit `√(2α)`.
pub fn weight_z(d: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(d >= 0.0) {
        return Err(Error::invalid(format!("distance must be non-negative, got {d}")));
    }
    Ok(z_unchecked(d, alpha))
}

/// One gradient vector per point of the differentiated cloud.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientField {
    pub grads: Vec<Point3>,
    pub loss_value: f64,
}

impl GradientField {
    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.loss_value.is_finite() && self.grads.iter().all(Point3::is_finite)
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.to_array())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Fixed-match gradient of `chamfer(movable, target, spec).value` with
/// respect to the movable cloud.
pub fn chamfer_gradient(movable: &PointCloud, target: &PointCloud, spec: &TransformSpec) -> Result<GradientField> {
    spec.validate()?;
    let matching = match_indexed(movable, target);
    Ok(chamfer_gradient_from_match(movable, target, spec, &matching))
}

/// Gradient for a precomputed matching of `movable` against `target`.
pub fn chamfer_gradient_from_match(
    movable: &PointCloud,
    target: &PointCloud,
    spec: &TransformSpec,
    matching: &MatchResult,
) -> GradientField {
    let (mp, tp) = (movable.points(), target.points());
    let inv_m = 1.0 / mp.len() as f64;
    let inv_t = 1.0 / tp.len() as f64;

    let mut grads: Vec<Point3> = mp
        .par_iter()
        .zip(matching.fwd_idx.par_iter().zip(matching.fwd_sq.par_iter()))
        .map(|(x, (&k, &sq))| (*x - tp[k]) * (spec.radial_factor(sq) * inv_m))
        .collect();
    // serial so the per-point sums have a fixed order
    for (k, (&j, &sq)) in matching.bwd_idx.iter().zip(&matching.bwd_sq).enumerate() {
        grads[j] = grads[j] + (mp[j] - tp[k]) * (spec.radial_factor(sq) * inv_t);
    }

    let (d1, d2) = chamfer_terms(spec, matching);
    GradientField {
        grads,
        loss_value: d1 + d2,
    }
}

/// Central differences of `chamfer(movable, target, spec).value` over every
/// coordinate of the movable cloud.
pub fn finite_diff_gradient(
    movable: &PointCloud,
    target: &PointCloud,
    spec: &TransformSpec,
    h: f64,
) -> Result<GradientField> {
    spec.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let loss_value = chamfer(movable, target, spec)?.value;
    let base = movable.points();
    let eval = |i: usize, axis: usize, delta: f64| -> Result<f64> {
        let mut pts = base.to_vec();
        let mut c = pts[i].to_array();
        c[axis] += delta;
        pts[i] = Point3::from(c);
        Ok(chamfer(&PointCloud::new(pts)?, target, spec)?.value)
    };
    let partials: Vec<f64> = (0..base.len() * 3)
        .into_par_iter()
        .map(|n| {
            let (i, axis) = (n / 3, n % 3);
            Ok((eval(i, axis, h)? - eval(i, axis, -h)?) / (2.0 * h))
        })
        .collect::<Result<_>>()?;
    let grads = partials.chunks(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
    Ok(GradientField { grads, loss_value })
}

/// Thresholds of the non-smoothness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessGuard {
    pub min_distance: f64,
    pub tie_gap: f64,
}

impl Default for SmoothnessGuard {
    fn default() -> Self {
        SmoothnessGuard {
            min_distance: NEAR_ZERO_DISTANCE,
            tie_gap: NEAR_TIE_GAP,
        }
    }
}

/// Why a configuration is not differentiable (or nearly so).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonSmooth {
    NearZeroDistance { forward: bool, index: usize, distance: f64 },
    NearTie { forward: bool, index: usize, gap: f64 },
}

fn two_nearest(q: &Point3, targets: &[Point3]) -> (f64, f64) {
    let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
    for t in targets {
        let d = sq_dist(q, t);
        if d < d1 {
            d2 = d1;
            d1 = d;
        } else if d < d2 {
            d2 = d;
        }
    }
    (d1.sqrt(), d2.sqrt())
}

/// Flags configurations where the fixed-match gradient is not a true
/// gradient: a matched distance below `guard.min_distance`, or a
/// nearest/second-nearest gap below `guard.tie_gap`, in either direction.
pub fn check_smoothness(
    movable: &PointCloud,
    target: &PointCloud,
    guard: &SmoothnessGuard,
) -> std::result::Result<(), NonSmooth> {
    for (forward, queries, refs) in [(true, movable, target), (false, target, movable)] {
        for (index, q) in queries.iter().enumerate() {
            let (d1, d2) = two_nearest(q, refs.points());
            if d1 < guard.min_distance {
                return Err(NonSmooth::NearZeroDistance {
                    forward,
                    index,
                    distance: d1,
                });
            }
            if d2 - d1 < guard.tie_gap {
                return Err(NonSmooth::NearTie {
                    forward,
                    index,
                    gap: d2 - d1,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum GradCheck {
    Skipped(NonSmooth),
    Compared { max_rel_error: f64, max_abs_error: f64 },
}

/// Largest per-coordinate relative error between two gradient fields. The
/// denominator is `max(|a|, |b|, REL_ERROR_FLOOR_FRACTION · scale)` where
/// `scale` is the largest absolute component of either field.
pub fn max_relative_error(a: &GradientField, b: &GradientField) -> f64 {
    let floor = REL_ERROR_FLOOR_FRACTION * a.max_abs().max(b.max_abs());
    a.grads
        .iter()
        .zip(&b.grads)
        .flat_map(|(x, y)| x.to_array().into_iter().zip(y.to_array()))
        .map(|(x, y)| {
            let denom = x.abs().max(y.abs()).max(floor);
            if denom == 0.0 {
                0.0
            } else {
                (x - y).abs() / denom
            }
        })
        .fold(0.0, f64::max)
}

/// Compares [`chamfer_gradient`] with [`finite_diff_gradient`], skipping
/// configurations flagged by [`check_smoothness`].
pub fn check_gradient(
    movable: &PointCloud,
    target: &PointCloud,
    spec: &TransformSpec,
    h: f64,
    guard: &SmoothnessGuard,
) -> Result<GradCheck> {
    if let Err(reason) = check_smoothness(movable, target, guard) {
        return Ok(GradCheck::Skipped(reason));
    }
    let analytic = chamfer_gradient(movable, target, spec)?;
    let numeric = finite_diff_gradient(movable, target, spec, h)?;
    let max_abs_error = analytic
        .grads
        .iter()
        .zip(&numeric.grads)
        .flat_map(|(x, y)| (*x - *y).to_array())
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(GradCheck::Compared {
        max_rel_error: max_relative_error(&analytic, &numeric),
        max_abs_error,
    })
}

/// A point on the HyperCD weight curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightCurveSample {
    pub d: f64,
    pub weight: f64,
    /// `weight / √(2α)`; equals 1 at `d = 0`.
    pub normalized_weight: f64,
}

pub fn weight_curve(alpha: f64, d_grid: &[f64]) -> Result<Vec<WeightCurveSample>> {
    check_grid(d_grid)?;
    let norm = (2.0 * alpha).sqrt();
    d_grid
        .iter()
        .map(|&d| {
            let weight = weight_z(d, alpha)?;
            Ok(WeightCurveSample {
                d,
                weight,
                normalized_weight: weight / norm,
            })
        })
        .collect()
}

/// One row of the curve table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub kind: TransformKind,
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
    pub value: f64,
    pub grad: f64,
    /// `grad / √(2α)` for hyper with `β = 2` when normalization is on,
    /// otherwise equal to `grad`.
    pub grad_normalized: f64,
}

pub const CURVE_CSV_HEADER: &str = "kind,alpha,beta,d,value,grad,grad_normalized";

fn check_grid(d_grid: &[f64]) -> Result<()> {
    if d_grid.is_empty() {
        return Err(Error::invalid("distance grid is empty"));
    }
    if d_grid.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(Error::invalid("distance grid values must be finite and non-negative"));
    }
    if d_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("distance grid must be strictly increasing"));
    }
    Ok(())
}

/// Samples `t(d)` and `t′(d)` for every spec over `d_grid`, spec-major.
pub fn sample_curves(specs: &[TransformSpec], d_grid: &[f64], normalize: bool) -> Result<Vec<CurveRow>> {
    check_grid(d_grid)?;
    for s in specs {
        s.validate()?;
    }
    Ok(specs
        .iter()
        .flat_map(|spec| {
            let scale = if normalize && spec.kind == TransformKind::Hyper && spec.beta == 2.0 {
                1.0 / (2.0 * spec.alpha).sqrt()
            } else {
                1.0
            };
            d_grid.iter().map(move |&d| {
                let grad = spec.derivative(d);
                CurveRow {
                    kind: spec.kind,
                    alpha: spec.alpha,
                    beta: spec.beta,
                    d,
                    value: spec.value(d),
                    grad,
                    grad_normalized: grad * scale,
                }
            })
        })
        .collect())
}

pub fn write_curves_csv<W: Write + ?Sized>(rows: &[CurveRow], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{CURVE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.kind, r.alpha, r.beta, r.d, r.value, r.grad, r.grad_normalized
        )?;
    }
    Ok(())
}

/// The curve family of the usual comparison plot: the two CD transforms,
/// the exponential (DCD-style) transform with `β ∈ {1, 2}`, and
/// `arccosh(1 + x)`, `arccosh(1 + x²/2)`, `arccosh(1 + x³/3)`.
pub fn default_curve_specs() -> Vec<TransformSpec> {
    let mk = |kind, alpha, beta| TransformSpec { kind, alpha, beta };
    vec![
        TransformSpec::l1(),
        TransformSpec::l2(),
        mk(TransformKind::Exp, 1.0, 1.0),
        mk(TransformKind::Exp, 1.0, 2.0),
        mk(TransformKind::Hyper, 1.0, 1.0),
        mk(TransformKind::Hyper, 0.5, 2.0),
        mk(TransformKind::Hyper, 1.0 / 3.0, 3.0),
    ]
}

/// `steps` evenly spaced distances from 0 to `dmax` inclusive.
pub fn linear_grid(dmax: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !(dmax > 0.0 && dmax.is_finite()) {
        return Err(Error::invalid("grid needs at least 2 steps and a positive dmax"));
    }
    Ok((0..steps).map(|i| dmax * i as f64 / (steps - 1) as f64).collect())
}
