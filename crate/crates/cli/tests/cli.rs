use std::path::Path;
use std::process::{Command, Output};

use bclp_cli::pgm;
use bclp_core::io::read_field;
use bclp_core::Field;

const SMALL: &[&str] = &[
    "--set",
    "grid.nx=32",
    "--set",
    "grid.ny=32",
    "--set",
    "sinogram.n_theta=48",
    "--set",
    "optimizer.max_iters=15",
];

fn bclp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bclp")).args(args).output().expect("spawn bclp")
}

fn ok(args: &[&str]) -> Output {
    let out = bclp(args);
    assert!(out.status.success(), "bclp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn with_small<'a>(cmd: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![cmd, "--out", out];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    args
}

fn metric(dir: &Path, name: &str) -> String {
    let text = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    text.lines()
        .find_map(|l| {
            l.strip_prefix(&format!("{name},")).map(|rest| rest.split(',').next().unwrap().to_string())
        })
        .unwrap_or_else(|| panic!("{name} missing from metrics.csv"))
}

#[test]
fn phantom_writes_field_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    ok(&with_small("phantom", out.to_str().unwrap(), &[]));
    let target: Field<f64> = read_field(&out.join("target.f32")).unwrap();
    assert_eq!(target.grid().nx, 32);
    assert!(target.values().iter().all(|v| (0.0..=1.0).contains(v)));
    let img = pgm::read(&out.join("target.pgm")).unwrap();
    assert_eq!((img.width, img.height), (32, 32));
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let stdout = ok(&with_small("run", out.to_str().unwrap(), &[])).stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("loss"));
    for name in [
        "config.txt",
        "g0.f32",
        "g0.hdr",
        "sinogram.f32",
        "dose.f32",
        "response.f32",
        "response_error.f32",
        "band_excess.f32",
        "metrics.csv",
        "convergence.csv",
        "histogram.csv",
        "target.pgm",
        "response.pgm",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let loss: f64 = metric(&out, "final_loss").parse().unwrap();
    assert!(loss.is_finite() && loss >= 0.0);
    let rows = std::fs::read_to_string(out.join("convergence.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows.to_string(), metric(&out, "iterations"));
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&with_small("run", a.to_str().unwrap(), &["--threads", "1"]));
    ok(&with_small("run", b.to_str().unwrap(), &["--threads", "2"]));
    for name in ["sinogram.f32", "metrics.csv", "convergence.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn saved_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&with_small("run", a.to_str().unwrap(), &["--set", "loss.p=3"]));
    let cfg = a.join("config.txt");
    ok(&["run", "--out", b.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        std::fs::read(a.join("sinogram.f32")).unwrap(),
        std::fs::read(b.join("sinogram.f32")).unwrap()
    );
}

#[test]
fn sweep_writes_summary_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.txt");
    std::fs::write(&cfg, "# p sweep\nsweep.param = loss.p\nsweep.values = 1, 3\noutput.renders = false\n")
        .unwrap();
    let out = dir.path().join("s");
    ok(&with_small("sweep", out.to_str().unwrap(), &["--config", cfg.to_str().unwrap()]));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("loss.p,final_loss"));
    assert!(lines[1].starts_with("1,") && lines[2].starts_with("3,"));
    assert!(out.join("run_000/metrics.csv").is_file() && out.join("run_001/metrics.csv").is_file());
    assert!(std::fs::read_to_string(out.join("run_001/config.txt")).unwrap().contains("loss.p = 3"));
}

#[test]
fn single_value_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let run_out = dir.path().join("r");
    let sweep_out = dir.path().join("s");
    ok(&with_small("run", run_out.to_str().unwrap(), &["--set", "tolerance.value=0.1"]));
    ok(&with_small(
        "sweep",
        sweep_out.to_str().unwrap(),
        &["--set", "sweep.param=tolerance.value", "--set", "sweep.values=0.1"],
    ));
    assert_eq!(
        std::fs::read(run_out.join("sinogram.f32")).unwrap(),
        std::fs::read(sweep_out.join("run_000/sinogram.f32")).unwrap()
    );
}

#[test]
fn init_and_metrics_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("i");
    ok(&with_small("init", init.to_str().unwrap(), &[]));
    assert!(init.join("g0.f32").is_file() && init.join("g0_dose.f32").is_file());

    let from_dose = dir.path().join("md");
    let dose = init.join("g0_dose.f32");
    let stdout =
        ok(&with_small("metrics", from_dose.to_str().unwrap(), &["--dose", dose.to_str().unwrap()])).stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("bclp_p2_q1"));

    let from_sino = dir.path().join("ms");
    let g0 = init.join("g0.f32");
    ok(&with_small("metrics", from_sino.to_str().unwrap(), &["--sinogram", g0.to_str().unwrap()]));
    let a: f64 = metric(&from_dose, "violation_fraction").parse().unwrap();
    let b: f64 = metric(&from_sino, "violation_fraction").parse().unwrap();
    assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    for extra in [
        ["--set", "loss.r=1"],
        ["--set", "loss.p=-1"],
        ["--set", "grid.nx=abc"],
        ["--config", "/nonexistent.txt"],
    ] {
        let res = bclp(&["run", "--out", out, extra[0], extra[1]]);
        assert_eq!(res.status.code(), Some(2), "{extra:?}");
        assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
    }
    let res = bclp(&["sweep", "--out", out]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn mismatched_dose_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("i");
    ok(&with_small("init", init.to_str().unwrap(), &[]));
    let dose = init.join("g0_dose.f32");
    let res =
        bclp(&["metrics", "--out", dir.path().join("m").to_str().unwrap(), "--dose", dose.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
