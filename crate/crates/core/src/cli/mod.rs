//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or domain error, 3 I/O error.

pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_bench, write_bench_csv, write_bench_summary, BenchConfig, BenchKind};
use crate::error::{Error, Result};
use crate::eval::{evaluate, ThresholdMode};
use crate::fitting::{fit, jittered_sphere_task, outlier_task, sweep_alpha_lr, write_sweep_csv, FitConfig};
use crate::geometry::Point3;
use crate::gradients::{default_curve_specs, linear_grid, sample_curves, write_curves_csv};
use crate::io::{read_cloud_auto, write_cloud, write_cloud_auto, CloudFormat};
use crate::metrics::{chamfer, chamfer_poincare, clip_to_ball, TransformKind, TransformSpec};
use crate::synth::{gen_shape, partial_view_crop, ShapeKind};

use output::{EvalFormat, DISPLAY_SCALE};

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "HYPERCD_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hypercd", version, about = "Hyperbolic Chamfer distance toolkit for 3D point clouds")]
struct Cli {
    /// Run everything on a single thread (bitwise reproducible).
    #[arg(long, global = true)]
    serial: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Set distance between two clouds.
    Distance(DistanceArgs),
    /// Transform and derivative curves as CSV.
    Curves(CurvesArgs),
    /// Gradient-descent fit of one cloud onto another.
    Fit(FitArgs),
    /// Final L1 Chamfer distance over an alpha x learning-rate grid.
    Sweep(SweepArgs),
    /// Chamfer, F-score and Hausdorff metrics of a prediction.
    Eval(EvalArgs),
    /// Synthetic shape, optionally with a partial-view crop.
    Gen(GenArgs),
    /// Timing of full set-distance evaluations.
    Bench(BenchArgs),
    /// Input clouds for the fitting demos.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossKind {
    L1,
    L2,
    Exp,
    Hyper,
}

impl From<LossKind> for TransformKind {
    fn from(k: LossKind) -> Self {
        match k {
            LossKind::L1 => TransformKind::L1,
            LossKind::L2 => TransformKind::L2,
            LossKind::Exp => TransformKind::Exp,
            LossKind::Hyper => TransformKind::Hyper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistanceKind {
    L1,
    L2,
    Exp,
    Hyper,
    Poincare,
}

impl From<DistanceKind> for BenchKind {
    fn from(k: DistanceKind) -> Self {
        match k {
            DistanceKind::L1 => BenchKind::Transform(TransformKind::L1),
            DistanceKind::L2 => BenchKind::Transform(TransformKind::L2),
            DistanceKind::Exp => BenchKind::Transform(TransformKind::Exp),
            DistanceKind::Hyper => BenchKind::Transform(TransformKind::Hyper),
            DistanceKind::Poincare => BenchKind::Poincare,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Xyz,
    Ply,
}

impl From<FormatArg> for CloudFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Xyz => CloudFormat::Xyz,
            FormatArg::Ply => CloudFormat::PlyAscii,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ShapeArg {
    SphereSurface,
    BoxSurface,
    PlaneGrid,
    LBracket,
}

impl From<ShapeArg> for ShapeKind {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::SphereSurface => ShapeKind::SphereSurface,
            ShapeArg::BoxSurface => ShapeKind::BoxSurface,
            ShapeArg::PlaneGrid => ShapeKind::PlaneGrid,
            ShapeArg::LBracket => ShapeKind::LBracket,
        }
    }
}

#[derive(Debug, Args)]
struct SpecArgs {
    #[arg(long, value_enum, default_value = "hyper")]
    kind: LossKind,
    /// Scale inside the transform (exp and hyper only).
    #[arg(long, default_value_t = TransformSpec::DEFAULT_ALPHA, allow_negative_numbers = true)]
    alpha: f64,
    /// Exponent on the distance; defaults to 1 for exp and 2 for hyper.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
}

impl SpecArgs {
    fn spec(&self) -> Result<TransformSpec> {
        build_spec(self.kind.into(), self.alpha, self.beta)
    }
}

/// Builds a spec from CLI values; l1 and l2 ignore `alpha` and `beta`.
pub fn build_spec(kind: TransformKind, alpha: f64, beta: Option<f64>) -> Result<TransformSpec> {
    match kind {
        TransformKind::L1 => Ok(TransformSpec::l1()),
        TransformKind::L2 => Ok(TransformSpec::l2()),
        TransformKind::Exp => TransformSpec::exp(alpha, beta.unwrap_or(1.0)),
        TransformKind::Hyper => TransformSpec::hyper(alpha, beta.unwrap_or(2.0)),
    }
}

#[derive(Debug, Args)]
struct DistanceArgs {
    file_a: PathBuf,
    file_b: PathBuf,
    #[arg(long, value_enum, default_value = "hyper")]
    kind: DistanceKind,
    #[arg(long, default_value_t = TransformSpec::DEFAULT_ALPHA, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Project both clouds to this norm before a poincare evaluation.
    #[arg(long)]
    clip: Option<f64>,
    /// Multiply printed values by 1000.
    #[arg(long)]
    scale_display: bool,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    /// Transform kinds; without this the default seven-curve family is used.
    #[arg(long, value_enum, value_delimiter = ',')]
    kinds: Vec<LossKind>,
    #[arg(long, value_delimiter = ',', requires = "kinds", allow_hyphen_values = true)]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', requires = "kinds", allow_hyphen_values = true)]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    dmax: f64,
    #[arg(long, default_value_t = 301)]
    steps: usize,
    /// Divide the hyper (beta = 2) derivative by sqrt(2 alpha).
    #[arg(long)]
    normalize: bool,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// The spec list for `curves`: the default family when `kinds` is empty,
/// otherwise every kind crossed with every alpha and beta (l1 and l2 once).
pub fn curve_specs(kinds: &[TransformKind], alphas: &[f64], betas: &[f64]) -> Result<Vec<TransformSpec>> {
    if kinds.is_empty() {
        return Ok(default_curve_specs());
    }
    let alphas = if alphas.is_empty() { &[TransformSpec::DEFAULT_ALPHA][..] } else { alphas };
    let mut specs = Vec::new();
    for &kind in kinds {
        match kind {
            TransformKind::L1 | TransformKind::L2 => specs.push(build_spec(kind, 1.0, None)?),
            TransformKind::Exp | TransformKind::Hyper => {
                for &alpha in alphas {
                    if betas.is_empty() {
                        specs.push(build_spec(kind, alpha, None)?);
                    }
                    for &beta in betas {
                        specs.push(build_spec(kind, alpha, Some(beta))?);
                    }
                }
            }
        }
    }
    Ok(specs)
}

#[derive(Debug, Args)]
struct FitArgs {
    initial: PathBuf,
    target: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Epochs at which to record the cloud and its correspondences.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian noise added to the initial cloud before fitting.
    #[arg(long, default_value_t = 0.0)]
    init_jitter: f64,
    #[arg(long)]
    outdir: PathBuf,
    /// Format of the written clouds.
    #[arg(long, value_enum, default_value = "xyz")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct SweepArgs {
    initial: PathBuf,
    target: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2", allow_hyphen_values = true)]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1", allow_hyphen_values = true)]
    lrs: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    pred: PathBuf,
    gt: PathBuf,
    /// `pct` (1% of the ground-truth diagonal), `pct:<p>` or `abs:<value>`.
    #[arg(long, default_value = "pct")]
    threshold_mode: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: EvalFormatArg,
    /// Multiply the two Chamfer values by 1000.
    #[arg(long)]
    scale_display: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalFormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "sphere-surface")]
    kind: ShapeArg,
    #[arg(long, default_value_t = 2048)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Remove this many points nearest the viewpoint into a second file.
    #[arg(long)]
    crop_k: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,2,2", allow_hyphen_values = true)]
    viewpoint: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Path of the cropped cloud; defaults to `<stem>_partial.<ext>`.
    #[arg(long)]
    partial_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "2048")]
    sizes: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "l2,hyper,poincare")]
    kinds: Vec<DistanceKind>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = TransformSpec::DEFAULT_ALPHA, allow_negative_numbers = true)]
    alpha: f64,
    /// CSV of the timings; the summary always goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DemoTask {
    /// Jittered sphere fitted back onto the clean sphere.
    JitteredSphere,
    /// The same with a fraction of the target points displaced far away.
    Outliers,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(value_enum)]
    task: DemoTask,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, value_enum, default_value = "xyz")]
    format: FormatArg,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_DATA,
    }
}

/// Runs the CLI on the process arguments and returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = configure_threads(cli.serial).and_then(|_| dispatch(cli.command));
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads(serial: bool) -> std::result::Result<(), Failure> {
    let threads = if serial {
        Some(1)
    } else {
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Some(n),
                _ => return Err(Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
            },
            Err(_) => None,
        }
    };
    if let Some(n) = threads {
        // a second call in the same process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Distance(a) => cmd_distance(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Demo(a) => cmd_demo(a),
    }
}

fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Writes through `body` to `path`, or to standard output when absent.
fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match path {
        Some(p) => output::write_file(p, body),
        None => {
            let mut out = std::io::stdout().lock();
            body(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn cmd_distance(a: DistanceArgs) -> std::result::Result<(), Failure> {
    let mut ca = read_cloud_auto(&a.file_a)?;
    let mut cb = read_cloud_auto(&a.file_b)?;
    let report = match BenchKind::from(a.kind) {
        BenchKind::Poincare => {
            if let Some(max_norm) = a.clip {
                ca = clip_to_ball(&ca, max_norm)?;
                cb = clip_to_ball(&cb, max_norm)?;
            }
            chamfer_poincare(&ca, &cb)?
        }
        BenchKind::Transform(kind) => {
            if a.clip.is_some() {
                return Err(Failure::Usage("--clip only applies to --kind poincare".into()));
            }
            chamfer(&ca, &cb, &build_spec(kind, a.alpha, a.beta)?)?
        }
    };
    let scale = if a.scale_display { DISPLAY_SCALE } else { 1.0 };
    print_stdout(&output::distance_text(&report, scale))?;
    Ok(())
}

fn cmd_curves(a: CurvesArgs) -> std::result::Result<(), Failure> {
    let kinds: Vec<TransformKind> = a.kinds.iter().map(|&k| k.into()).collect();
    let specs = curve_specs(&kinds, &a.alphas, &a.betas)?;
    let grid = linear_grid(a.dmax, a.steps)?;
    let rows = sample_curves(&specs, &grid, a.normalize)?;
    emit(a.out.as_deref(), |w| write_curves_csv(&rows, w))?;
    Ok(())
}

fn cmd_fit(a: FitArgs) -> std::result::Result<(), Failure> {
    let initial = read_cloud_auto(&a.initial)?;
    let target = read_cloud_auto(&a.target)?;
    let mut config = FitConfig::new(a.spec.spec()?, a.lr, a.epochs).with_snapshots(a.snapshots);
    config.seed = a.seed;
    config.init_jitter = a.init_jitter;
    let traj = fit(&initial, &target, &config)?;
    output::write_fit_outputs(&traj, &a.outdir, a.format.into())?;
    print_stdout(&output::fit_summary_text(&traj))?;
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> std::result::Result<(), Failure> {
    let initial = read_cloud_auto(&a.initial)?;
    let target = read_cloud_auto(&a.target)?;
    let grid = sweep_alpha_lr(&initial, &target, &a.alphas, &a.lrs, a.epochs)?;
    for (alpha, row) in grid.alphas.iter().zip(&grid.cells) {
        for (lr, cell) in grid.lrs.iter().zip(row) {
            if let Err(msg) = cell {
                eprintln!("warning: alpha {alpha}, lr {lr}: {msg}");
            }
        }
    }
    emit(a.out.as_deref(), |w| write_sweep_csv(&grid, w))?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> std::result::Result<(), Failure> {
    let mode: ThresholdMode = a.threshold_mode.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let pred = read_cloud_auto(&a.pred)?;
    let gt = read_cloud_auto(&a.gt)?;
    let mut report = evaluate(&pred, &gt, mode)?;
    if a.scale_display {
        report = report.with_cd_scale(DISPLAY_SCALE);
    }
    let format = match a.format {
        EvalFormatArg::Csv => EvalFormat::Csv,
        EvalFormatArg::Json => EvalFormat::Json,
    };
    print_stdout(&output::eval_text(&report, format))?;
    Ok(())
}

fn cmd_gen(a: GenArgs) -> std::result::Result<(), Failure> {
    let viewpoint = match a.viewpoint[..] {
        [x, y, z] => Point3::new(x, y, z),
        _ => return Err(Failure::Usage("--viewpoint takes exactly three values x,y,z".into())),
    };
    let cloud = gen_shape(a.kind.into(), a.n, a.seed)?;
    let partial = match a.crop_k {
        Some(k) => Some(partial_view_crop(&cloud, viewpoint, k)?),
        None => None,
    };
    write_cloud_auto(&cloud, &a.out)?;
    let mut text = format!("full {} {}\n", a.out.display(), cloud.len());
    if let Some(p) = partial {
        let path = a.partial_out.unwrap_or_else(|| output::partial_path_for(&a.out));
        write_cloud_auto(&p, &path)?;
        text.push_str(&format!("partial {} {}\n", path.display(), p.len()));
    }
    print_stdout(&text)?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> std::result::Result<(), Failure> {
    let cfg = BenchConfig {
        sizes: a.sizes,
        kinds: a.kinds.iter().map(|&k| k.into()).collect(),
        repeats: a.repeats,
        warmup: a.warmup,
        seed: a.seed,
        alpha: a.alpha,
    };
    let report = run_bench(&cfg)?;
    if let Some(path) = &a.out {
        output::write_file(path, |w| write_bench_csv(&report, w))?;
    }
    emit(None, |w| write_bench_summary(&report, w))?;
    Ok(())
}

fn cmd_demo(a: DemoArgs) -> std::result::Result<(), Failure> {
    let format: CloudFormat = a.format.into();
    let ext = output::cloud_extension(format);
    std::fs::create_dir_all(&a.outdir).map_err(|e| Error::io(&a.outdir, e))?;
    let mut files = Vec::new();
    match a.task {
        DemoTask::JitteredSphere => {
            let (initial, target) = jittered_sphere_task(a.n, a.sigma, a.seed)?;
            files.push(("initial", initial));
            files.push(("target", target));
        }
        DemoTask::Outliers => {
            let task = outlier_task(a.n, a.sigma, a.fraction, a.seed)?;
            files.push(("initial", task.initial));
            files.push(("target", task.target));
            files.push(("clean_target", task.clean_target));
        }
    }
    let mut text = String::new();
    for (name, cloud) in &files {
        let path = a.outdir.join(format!("{name}.{ext}"));
        write_cloud(cloud, &path, format)?;
        text.push_str(&format!("{name} {} {}\n", path.display(), cloud.len()));
    }
    print_stdout(&text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_from(["hypercd"]), EXIT_USAGE);
        assert_eq!(run_from(["hypercd", "distance"]), EXIT_USAGE);
        assert_eq!(run_from(["hypercd", "distance", "a", "b", "--kind", "cosine"]), EXIT_USAGE);
        assert_eq!(run_from(["hypercd", "curves", "--alphas", "1"]), EXIT_USAGE);
    }

    #[test]
    fn missing_input_is_io_error() {
        assert_eq!(run_from(["hypercd", "distance", "/nonexistent/a.xyz", "/nonexistent/b.xyz"]), EXIT_IO);
    }

    #[test]
    fn curve_specs_cross_product() {
        let specs = curve_specs(&[TransformKind::L2, TransformKind::Hyper], &[0.5, 1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(specs.len(), 1 + 4);
        let specs = curve_specs(&[TransformKind::Exp], &[], &[]).unwrap();
        assert_eq!(specs, vec![TransformSpec::exp(1.0, 1.0).unwrap()]);
        assert_eq!(curve_specs(&[], &[], &[]).unwrap().len(), 7);
    }

    #[test]
    fn build_spec_defaults() {
        assert_eq!(build_spec(TransformKind::Hyper, 1.0, None).unwrap(), TransformSpec::hypercd(1.0).unwrap());
        assert!(build_spec(TransformKind::Hyper, -1.0, None).is_err());
        assert_eq!(build_spec(TransformKind::L2, -1.0, None).unwrap(), TransformSpec::l2());
    }
}
