//! Wall-clock timing of full set-distance evaluations (matching, transform
//! and aggregation) on seeded random clouds.

use std::fmt;
use std::hint::black_box;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::metrics::{chamfer, chamfer_poincare, poincare_distance, TransformKind, TransformSpec};
use crate::synth::random_in_ball;

/// Radius of the ball the benchmark clouds are drawn from; inside the
/// Poincaré domain so every kind runs on the same data.
pub const BENCH_RADIUS: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BenchKind {
    Transform(TransformKind),
    Poincare,
}

impl BenchKind {
    pub fn name(&self) -> &'static str {
        match self {
            BenchKind::Transform(k) => k.name(),
            BenchKind::Poincare => "poincare",
        }
    }
}

impl fmt::Display for BenchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "poincare" {
            Ok(BenchKind::Poincare)
        } else {
            s.parse().map(BenchKind::Transform)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Each size `n` times an `n × n` evaluation.
    pub sizes: Vec<usize>,
    pub kinds: Vec<BenchKind>,
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
    /// α for the `exp` and `hyper` kinds (β is 1 for exp, 2 for hyper).
    pub alpha: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![2048],
            kinds: vec![
                BenchKind::Transform(TransformKind::L2),
                BenchKind::Transform(TransformKind::Hyper),
                BenchKind::Poincare,
            ],
            repeats: 10,
            warmup: 2,
            seed: 0,
            alpha: 1.0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::invalid("benchmark sizes must be non-empty and at least 1"));
        }
        if self.kinds.is_empty() {
            return Err(Error::invalid("no benchmark kinds given"));
        }
        if self.repeats < 3 {
            return Err(Error::invalid(format!("repeats must be at least 3, got {}", self.repeats)));
        }
        if self.warmup < 1 {
            return Err(Error::invalid("warmup must be at least 1"));
        }
        Ok(())
    }

    fn spec(&self, kind: TransformKind) -> Result<TransformSpec> {
        match kind {
            TransformKind::L1 => Ok(TransformSpec::l1()),
            TransformKind::L2 => Ok(TransformSpec::l2()),
            TransformKind::Exp => TransformSpec::exp(self.alpha, 1.0),
            TransformKind::Hyper => TransformSpec::hypercd(self.alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub kind: BenchKind,
    pub n_a: usize,
    pub n_b: usize,
    pub repeats: usize,
    /// Seconds per evaluation.
    pub mean_s: f64,
    /// Sample standard deviation, seconds.
    pub std_s: f64,
}

/// Cost of the per-pair function alone, without matching.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformTiming {
    pub kind: BenchKind,
    pub evaluations: usize,
    pub ns_per_eval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub rows: Vec<BenchRow>,
    pub transform_timings: Vec<TransformTiming>,
}

impl BenchReport {
    pub fn row(&self, kind: BenchKind, n: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.kind == kind && r.n_a == n)
    }
}

pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn evaluate_once(cfg: &BenchConfig, kind: BenchKind, a: &PointCloud, b: &PointCloud) -> Result<f64> {
    match kind {
        BenchKind::Poincare => Ok(chamfer_poincare(a, b)?.value),
        BenchKind::Transform(k) => Ok(chamfer(a, b, &cfg.spec(k)?)?.value),
    }
}

const TRANSFORM_EVALS: usize = 1 << 16;

fn time_transform(cfg: &BenchConfig, kind: BenchKind, a: &PointCloud, b: &PointCloud) -> Result<TransformTiming> {
    let pairs: Vec<_> = (0..TRANSFORM_EVALS)
        .map(|i| (a[i % a.len()], b[(i * 7 + 3) % b.len()]))
        .collect();
    let sq: Vec<f64> = pairs.iter().map(|(p, q)| (*p - *q).norm_sq()).collect();
    let start = Instant::now();
    let mut acc = 0.0;
    match kind {
        BenchKind::Poincare => {
            for (p, q) in &pairs {
                acc += poincare_distance(p, q)?;
            }
        }
        BenchKind::Transform(k) => {
            let spec = cfg.spec(k)?;
            for &s in &sq {
                acc += spec.value_from_sq(black_box(s));
            }
        }
    }
    black_box(acc);
    Ok(TransformTiming {
        kind,
        evaluations: TRANSFORM_EVALS,
        ns_per_eval: start.elapsed().as_secs_f64() * 1e9 / TRANSFORM_EVALS as f64,
    })
}

/// Times every kind at every size. Within a repeat the kinds run in a
/// rotating order so slow drift in machine load spreads evenly.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut transform_timings = Vec::new();
    for (si, &n) in cfg.sizes.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(2 * si as u64);
        let a = random_in_ball(n, BENCH_RADIUS, seed)?;
        let b = random_in_ball(n, BENCH_RADIUS, seed.wrapping_add(1))?;
        for &kind in &cfg.kinds {
            for _ in 0..cfg.warmup {
                black_box(evaluate_once(cfg, kind, &a, &b)?);
            }
        }
        let mut samples = vec![Vec::with_capacity(cfg.repeats); cfg.kinds.len()];
        for r in 0..cfg.repeats {
            for off in 0..cfg.kinds.len() {
                let ki = (r + off) % cfg.kinds.len();
                let start = Instant::now();
                black_box(evaluate_once(cfg, cfg.kinds[ki], &a, &b)?);
                samples[ki].push(start.elapsed().as_secs_f64());
            }
        }
        for (ki, &kind) in cfg.kinds.iter().enumerate() {
            let (mean_s, std_s) = mean_std(&samples[ki]);
            rows.push(BenchRow {
                kind,
                n_a: n,
                n_b: n,
                repeats: cfg.repeats,
                mean_s,
                std_s,
            });
        }
        if si == 0 {
            for &kind in &cfg.kinds {
                transform_timings.push(time_transform(cfg, kind, &a, &b)?);
            }
        }
    }
    Ok(BenchReport {
        seed: cfg.seed,
        rows,
        transform_timings,
    })
}

pub const BENCH_CSV_HEADER: &str = "kind,n_a,n_b,repeats,mean_s,std_s";

pub fn write_bench_csv<W: Write + ?Sized>(report: &BenchReport, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{BENCH_CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(w, "{},{},{},{},{},{}", r.kind, r.n_a, r.n_b, r.repeats, r.mean_s, r.std_s)?;
    }
    Ok(())
}

/// Human-readable summary: one line per timed configuration, then the
/// transform-only timings.
pub fn write_bench_summary<W: Write + ?Sized>(report: &BenchReport, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "seed {}", report.seed)?;
    for r in &report.rows {
        writeln!(
            w,
            "{:<8} {}x{}  {:.6} ± {:.6} s/iter  (n={})",
            r.kind.to_string(),
            r.n_a,
            r.n_b,
            r.mean_s,
            r.std_s,
            r.repeats
        )?;
    }
    for t in &report.transform_timings {
        writeln!(w, "transform {:<8} {:.2} ns/eval", t.kind.to_string(), t.ns_per_eval)?;
    }
    Ok(())
}
