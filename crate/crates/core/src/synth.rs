//! Synthetic shapes, partial-view cropping, normalization and the
//! perturbations used by the fitting demos.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{sq_dist, BoundingBox, Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    /// Unit sphere centred at the origin.
    SphereSurface,
    /// Surface of the unit cube `[0,1]^3`.
    BoxSurface,
    /// The square `[0,1]^2` at `z = 0.5`.
    PlaneGrid,
    /// Two unit squares meeting at a right angle along the y axis
    /// (`z = 0` and `x = 0`).
    LBracket,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::SphereSurface,
        ShapeKind::BoxSurface,
        ShapeKind::PlaneGrid,
        ShapeKind::LBracket,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::SphereSurface => "sphere-surface",
            ShapeKind::BoxSurface => "box-surface",
            ShapeKind::PlaneGrid => "plane-grid",
            ShapeKind::LBracket => "l-bracket",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown shape kind '{s}'")))
    }
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian3(rng: &mut impl Rng) -> Point3 {
    Point3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    )
}

fn unit_vector(rng: &mut impl Rng) -> Point3 {
    loop {
        let v = gaussian3(rng);
        let n = v.norm();
        if n > 1e-12 {
            return v * (1.0 / n);
        }
    }
}

/// Samples `n` points on the surface of `kind`. Deterministic in `seed`.
pub fn gen_shape(kind: ShapeKind, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("shape point count must be at least 1"));
    }
    let mut rng = rng(seed);
    let points = (0..n)
        .map(|_| match kind {
            ShapeKind::SphereSurface => unit_vector(&mut rng),
            ShapeKind::BoxSurface => {
                let face = rng.random_range(0..6usize);
                let (u, v): (f64, f64) = (rng.random(), rng.random());
                let fixed = (face % 2) as f64;
                match face / 2 {
                    0 => Point3::new(fixed, u, v),
                    1 => Point3::new(u, fixed, v),
                    _ => Point3::new(u, v, fixed),
                }
            }
            ShapeKind::PlaneGrid => Point3::new(rng.random(), rng.random(), 0.5),
            ShapeKind::LBracket => {
                let (u, v): (f64, f64) = (rng.random(), rng.random());
                if rng.random_bool(0.5) {
                    Point3::new(u, v, 0.0)
                } else {
                    Point3::new(0.0, v, u)
                }
            }
        })
        .collect();
    PointCloud::new(points)
}

/// Removes the `k` points nearest to `viewpoint`, lowest index first among
/// equal distances. Surviving points keep their relative order.
pub fn partial_view_crop(cloud: &PointCloud, viewpoint: Point3, k: usize) -> Result<PointCloud> {
    if k == 0 || k >= cloud.len() {
        return Err(Error::invalid(format!(
            "crop count must satisfy 1 <= k < {}, got {k}",
            cloud.len()
        )));
    }
    let mut order: Vec<(f64, usize)> = cloud
        .iter()
        .enumerate()
        .map(|(i, p)| (sq_dist(p, &viewpoint), i))
        .collect();
    order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut removed = vec![false; cloud.len()];
    for &(_, i) in &order[..k] {
        removed[i] = true;
    }
    PointCloud::new(
        cloud
            .iter()
            .zip(&removed)
            .filter(|(_, &r)| !r)
            .map(|(p, _)| *p)
            .collect(),
    )
}

/// Uniform scale plus translation mapping the cloud into `[0,1]^3` with its
/// longest axis spanning exactly `[0,1]`. Returns the original box.
pub fn normalize_to_unit_box(cloud: &PointCloud) -> Result<(PointCloud, BoundingBox)> {
    let bb = cloud.bounding_box();
    let extent = bb.max_extent();
    if extent <= 0.0 {
        return Err(Error::invalid("cannot normalize a cloud with zero extent"));
    }
    let scale = 1.0 / extent;
    let out = cloud.map(|p| (*p - bb.min_corner) * scale)?;
    Ok((out, bb))
}

/// Adds isotropic gaussian noise of standard deviation `sigma` to every point.
pub fn jitter(cloud: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid("jitter sigma must be non-negative"));
    }
    let mut rng = rng(seed);
    cloud.map(|p| *p + gaussian3(&mut rng) * sigma)
}

/// Displaces `round(fraction * n)` randomly chosen points by `distance`
/// along random directions. Returns the contaminated cloud and the sorted
/// indices of the displaced points.
pub fn add_outliers(
    cloud: &PointCloud,
    fraction: f64,
    distance: f64,
    seed: u64,
) -> Result<(PointCloud, Vec<usize>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("outlier fraction must lie in [0, 1]"));
    }
    let mut rng = rng(seed);
    let count = (fraction * cloud.len() as f64).round() as usize;
    let mut idx = rand::seq::index::sample(&mut rng, cloud.len(), count).into_vec();
    idx.sort_unstable();
    let mut points = cloud.points().to_vec();
    for &i in &idx {
        points[i] = points[i] + unit_vector(&mut rng) * distance;
    }
    Ok((PointCloud::new(points)?, idx))
}

/// Uniform samples from the ball of the given radius centred at the origin.
pub fn random_in_ball(n: usize, radius: f64, seed: u64) -> Result<PointCloud> {
    let mut rng = rng(seed);
    PointCloud::new(
        (0..n)
            .map(|_| {
                let r = radius * rng.random::<f64>().cbrt();
                unit_vector(&mut rng) * r
            })
            .collect(),
    )
}

/// Uniform samples from the unit cube `[0,1]^3`.
pub fn random_in_unit_cube(n: usize, seed: u64) -> Result<PointCloud> {
    let mut rng = rng(seed);
    PointCloud::new(
        (0..n)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect(),
    )
}
