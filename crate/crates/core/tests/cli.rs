mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hypercd::bench::BenchConfig;
use hypercd::cli::output::{self, EvalFormat};
use hypercd::eval::{evaluate, ThresholdMode};
use hypercd::fitting::{fit, jittered_sphere_task, outlier_task, sweep_alpha_lr, write_sweep_csv, FitConfig};
use hypercd::gradients::{default_curve_specs, linear_grid, sample_curves, write_curves_csv};
use hypercd::io::{read_cloud_auto, write_cloud_auto};
use hypercd::metrics::{chamfer_poincare, clip_to_ball};
use hypercd::synth::{gen_shape, partial_view_crop, ShapeKind};
use hypercd::{chamfer, Point3, TransformSpec};

fn hypercd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypercd"))
        .args(args)
        .env_remove("HYPERCD_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn distance_golden() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("a.xyz");
    let fb = dir.path().join("b.ply");
    let mut rng = common::rng(9);
    let a = common::uniform_cloud(&mut rng, 300);
    let b = common::uniform_cloud(&mut rng, 200);
    write_cloud_auto(&a, &fa).unwrap();
    write_cloud_auto(&b, &fb).unwrap();

    let cases: [(&[&str], TransformSpec); 5] = [
        (&["--kind", "l1"], TransformSpec::l1()),
        (&["--kind", "l2"], TransformSpec::l2()),
        (&["--kind", "exp", "--alpha", "2"], TransformSpec::exp(2.0, 1.0).unwrap()),
        (&["--kind", "hyper"], TransformSpec::hypercd(1.0).unwrap()),
        (&["--kind", "hyper", "--alpha", "0.5", "--beta", "3"], TransformSpec::hyper(0.5, 3.0).unwrap()),
    ];
    for (flags, spec) in cases {
        let mut args = vec!["distance", p(&fa), p(&fb)];
        args.extend_from_slice(flags);
        let want = output::distance_text(&chamfer(&a, &b, &spec).unwrap(), 1.0);
        assert_eq!(stdout(&hypercd(&args)), want, "{flags:?}");
        args.push("--scale-display");
        let want = output::distance_text(&chamfer(&a, &b, &spec).unwrap(), 1000.0);
        assert_eq!(stdout(&hypercd(&args)), want);
    }

    let out = hypercd(&["distance", p(&fa), p(&fb), "--kind", "poincare", "--clip", "0.9"]);
    let want = chamfer_poincare(&clip_to_ball(&a, 0.9).unwrap(), &clip_to_ball(&b, 0.9).unwrap()).unwrap();
    assert_eq!(stdout(&out), output::distance_text(&want, 1.0));

    // unclipped corners of the cube lie outside the ball
    assert_eq!(hypercd(&["distance", p(&fa), p(&fb), "--kind", "poincare"]).status.code(), Some(2));
}

#[test]
fn distance_examples() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("a.xyz");
    let fb = dir.path().join("b.xyz");
    fs::write(&fa, "0 0 0\n").unwrap();
    fs::write(&fb, "1 0 0\n").unwrap();
    let text = stdout(&hypercd(&["distance", p(&fa), p(&fb), "--kind", "hyper", "--alpha", "1"]));
    let value: f64 = text.lines().next().unwrap().strip_prefix("value ").unwrap().parse().unwrap();
    assert!((value - 2.633_915_793_8).abs() < 1e-10);
    let text = stdout(&hypercd(&["distance", p(&fa), p(&fa), "--kind", "hyper"]));
    assert_eq!(text.lines().next(), Some("value 0"));
}

#[test]
fn exit_codes_and_messages() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("a.xyz");
    fs::write(&fa, "0 0 0\n").unwrap();
    let missing = dir.path().join("does_not_exist.xyz");

    let o = hypercd(&["distance", p(&fa), p(&missing)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does_not_exist.xyz"));

    let bad = dir.path().join("bad.xyz");
    fs::write(&bad, "0 0 0\n1 2\n").unwrap();
    let o = hypercd(&["distance", p(&fa), p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.xyz:2"));

    assert_eq!(hypercd(&["distance", p(&fa), p(&fa), "--alpha", "-1"]).status.code(), Some(2));
    assert_eq!(hypercd(&["distance", p(&fa)]).status.code(), Some(1));
    assert_eq!(hypercd(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hypercd(&["--help"]).status.code(), Some(0));
    assert_eq!(hypercd(&["--version"]).status.code(), Some(0));
    assert_eq!(hypercd(&["bench", "--repeats", "2", "--sizes", "8"]).status.code(), Some(2));

    let o = Command::new(env!("CARGO_BIN_EXE_hypercd"))
        .args(["distance", p(&fa), p(&fa)])
        .env("HYPERCD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_hypercd"))
        .args(["distance", p(&fa), p(&fa)])
        .env("HYPERCD_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn curves_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    stdout(&hypercd(&["curves", "--normalize", "--dmax", "2", "--steps", "50", "--out", p(&out)]));
    let rows = sample_curves(&default_curve_specs(), &linear_grid(2.0, 50).unwrap(), true).unwrap();
    let mut want = Vec::new();
    write_curves_csv(&rows, &mut want).unwrap();
    assert_eq!(fs::read(&out).unwrap(), want);
    assert_eq!(want.iter().filter(|&&c| c == b'\n').count(), 1 + 7 * 50);

    let text = stdout(&hypercd(&["curves", "--kinds", "hyper", "--alphas", "1", "--betas", "2", "--steps", "100"]));
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn gen_golden_and_crop() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("shape.xyz");
    let text = stdout(&hypercd(&["gen", "--kind", "sphere-surface", "--n", "2048", "--seed", "5", "--crop-k", "512", "--out", p(&full)]));
    let partial = dir.path().join("shape_partial.xyz");
    assert_eq!(text, format!("full {} 2048\npartial {} 1536\n", full.display(), partial.display()));

    let cloud = gen_shape(ShapeKind::SphereSurface, 2048, 5).unwrap();
    assert_eq!(read_cloud_auto(&full).unwrap(), cloud);
    let crop = partial_view_crop(&cloud, Point3::new(2.0, 2.0, 2.0), 512).unwrap();
    assert_eq!(read_cloud_auto(&partial).unwrap(), crop);

    let again = dir.path().join("again.xyz");
    stdout(&hypercd(&["gen", "--kind", "sphere-surface", "--n", "2048", "--seed", "5", "--out", p(&again)]));
    assert_eq!(fs::read(&full).unwrap(), fs::read(&again).unwrap());

    let o = hypercd(&["gen", "--n", "100", "--crop-k", "100", "--out", p(&dir.path().join("x.xyz"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = hypercd(&["gen", "--n", "100", "--viewpoint", "1,2", "--out", p(&dir.path().join("x.xyz"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fit_golden_with_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    stdout(&hypercd(&["demo", "jittered-sphere", "--n", "64", "--seed", "2", "--outdir", p(&demo)]));
    let (init, target) = jittered_sphere_task(64, 0.1, 2).unwrap();
    assert_eq!(read_cloud_auto(demo.join("initial.xyz")).unwrap(), init);
    assert_eq!(read_cloud_auto(demo.join("target.xyz")).unwrap(), target);

    let outdir = dir.path().join("fit");
    let text = stdout(&hypercd(&[
        "--serial", "fit", p(&demo.join("initial.xyz")), p(&demo.join("target.xyz")),
        "--kind", "hyper", "--lr", "0.05", "--epochs", "150", "--snapshots", "10,70,130", "--outdir", p(&outdir),
    ]));
    let cfg = FitConfig::new(TransformSpec::hypercd(1.0).unwrap(), 0.05, 150).with_snapshots([10, 70, 130]);
    let traj = fit(&init, &target, &cfg).unwrap();
    assert_eq!(text, output::fit_summary_text(&traj));

    let golden = dir.path().join("golden");
    let written = output::write_fit_outputs(&traj, &golden, hypercd::io::CloudFormat::Xyz).unwrap();
    let corr: Vec<_> = written.iter().filter(|p| p.to_string_lossy().contains("correspondences_epoch_")).collect();
    assert_eq!(corr.len(), 3);
    for path in &written {
        let name = path.file_name().unwrap();
        assert_eq!(fs::read(outdir.join(name)).unwrap(), fs::read(path).unwrap(), "{name:?}");
    }
    for path in corr {
        assert_eq!(fs::read_to_string(path).unwrap().lines().count(), 1 + 64);
    }

    let still = dir.path().join("still");
    stdout(&hypercd(&[
        "fit", p(&demo.join("initial.xyz")), p(&demo.join("target.xyz")), "--lr", "0", "--epochs", "1", "--outdir", p(&still),
    ]));
    assert_eq!(fs::read(still.join("final.xyz")).unwrap(), fs::read(demo.join("initial.xyz")).unwrap());
}

#[test]
fn outlier_demo_loss_curves() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    stdout(&hypercd(&["demo", "outliers", "--n", "64", "--outdir", p(&demo)]));
    let task = outlier_task(64, 0.1, 0.05, 0).unwrap();
    assert_eq!(read_cloud_auto(demo.join("target.xyz")).unwrap(), task.target);
    assert_eq!(read_cloud_auto(demo.join("clean_target.xyz")).unwrap(), task.clean_target);
    for kind in ["l2", "hyper"] {
        let out = dir.path().join(kind);
        stdout(&hypercd(&[
            "fit", p(&demo.join("initial.xyz")), p(&demo.join("target.xyz")), "--kind", kind, "--lr", "0.5", "--epochs", "20", "--outdir", p(&out),
        ]));
        assert_eq!(fs::read_to_string(out.join("loss.csv")).unwrap().lines().count(), 1 + 20 + 1);
    }
}

#[test]
fn sweep_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (init, target) = jittered_sphere_task(48, 0.1, 1).unwrap();
    let fi = dir.path().join("i.xyz");
    let ft = dir.path().join("t.xyz");
    write_cloud_auto(&init, &fi).unwrap();
    write_cloud_auto(&target, &ft).unwrap();
    let text = stdout(&hypercd(&["sweep", p(&fi), p(&ft), "--alphas", "0.5,1,2", "--lrs", "0,0.05", "--epochs", "20"]));
    let grid = sweep_alpha_lr(&init, &target, &[0.5, 1.0, 2.0], &[0.0, 0.05], 20).unwrap();
    let mut want = Vec::new();
    write_sweep_csv(&grid, &mut want).unwrap();
    assert_eq!(text.as_bytes(), &want[..]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));

    let fit_dir = dir.path().join("fit");
    let summary = stdout(&hypercd(&["fit", p(&fi), p(&ft), "--alpha", "1", "--lr", "0.05", "--epochs", "20", "--outdir", p(&fit_dir)]));
    let final_l1 = summary.lines().find_map(|l| l.strip_prefix("final_l1 ")).unwrap();
    let cell = lines[2].split(',').nth(2).unwrap();
    assert_eq!(cell, final_l1);
}

#[test]
fn eval_golden() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(4);
    let a = common::uniform_cloud(&mut rng, 120);
    let b = common::uniform_cloud(&mut rng, 90);
    let fa = dir.path().join("a.xyz");
    let fb = dir.path().join("b.xyz");
    write_cloud_auto(&a, &fa).unwrap();
    write_cloud_auto(&b, &fb).unwrap();

    let r = evaluate(&a, &b, ThresholdMode::PercentOfDiagonal(1.0)).unwrap();
    assert_eq!(stdout(&hypercd(&["eval", p(&fa), p(&fb)])), output::eval_text(&r, EvalFormat::Csv));
    let r = evaluate(&a, &b, ThresholdMode::Absolute(0.2)).unwrap();
    let text = stdout(&hypercd(&["eval", p(&fa), p(&fb), "--threshold-mode", "abs:0.2", "--format", "json"]));
    assert_eq!(text, output::eval_text(&r, EvalFormat::Json));
    let text = stdout(&hypercd(&["eval", p(&fa), p(&fb), "--threshold-mode", "abs:0.2", "--scale-display"]));
    assert_eq!(text, output::eval_text(&r.with_cd_scale(1000.0), EvalFormat::Csv));

    assert_eq!(hypercd(&["eval", p(&fa), p(&fb), "--threshold-mode", "rel"]).status.code(), Some(1));
    assert_eq!(hypercd(&["eval", p(&fa), p(&fb), "--threshold-mode", "abs:-1"]).status.code(), Some(2));
}

#[test]
fn bench_runs_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let text = stdout(&hypercd(&["bench", "--sizes", "64,128", "--repeats", "3", "--warmup", "1", "--seed", "7", "--out", p(&out)]));
    assert!(text.starts_with("seed 7\n"));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next(), Some(hypercd::bench::BENCH_CSV_HEADER));
    assert_eq!(csv.lines().count(), 1 + 2 * BenchConfig::default().kinds.len());
}
