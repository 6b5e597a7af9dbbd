use std::fs;
use std::path::Path;
use std::process::Command;

use stovk::kernels::{OperatorKernelSpec, ScalarKernelSpec, SpaceTimePoint};
use stovk::ovkr::{fit, predict, RidgeConfig, TrainingSet};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stovk"))
}

fn run(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn fit_then_predict_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|i| {
            let x = i as f64 / 12.0;
            let t = (i % 4) as f64 / 4.0;
            (x, t, (x * 3.0).sin(), t * t - x)
        })
        .collect();
    let mut text = String::from("# x t y1 y2\n");
    for (x, t, a, b) in &rows {
        text.push_str(&format!("{x} {t} {a} {b}\n"));
    }
    let data_path = dir.path().join("train.txt");
    fs::write(&data_path, text).unwrap();
    let model_path = dir.path().join("model.json");
    run(bin().args(["fit", "--data"]).arg(&data_path).arg("--out").arg(&model_path)
        .args(["--kernel", "time-aligned", "--alpha", "0.25", "--lambda", "1e-4"]));

    let points_path = dir.path().join("points.txt");
    fs::write(&points_path, "0.1 0.2\n0.55 0.9\n").unwrap();
    let stdout = run(bin().arg("predict").arg("--model").arg(&model_path).arg("--points").arg(&points_path));

    let data = TrainingSet::new(
        rows.iter().map(|r| SpaceTimePoint::new(vec![r.0], r.1)).collect(),
        rows.iter().map(|r| vec![r.2, r.3]).collect(),
    )
    .unwrap();
    let kernel = OperatorKernelSpec::time_aligned(
        ScalarKernelSpec::gaussian(0.3).unwrap(),
        ScalarKernelSpec::gaussian(0.3).unwrap(),
        0.25,
        2,
    );
    let model = fit(&data, &RidgeConfig { lambda: 1e-4, kernel }).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2);
    for (line, (x, t)) in lines.iter().zip([(0.1, 0.2), (0.55, 0.9)]) {
        let vals: Vec<f64> = line.split_whitespace().map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals.len(), 4);
        let expect = predict(&model, &[x], t).unwrap();
        for c in 0..2 {
            assert!((vals[2 + c] - expect[c]).abs() < 1e-12);
        }
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["csv", "json"] {
        let a = dir.path().join(format!("{format}-a"));
        let b = dir.path().join(format!("{format}-b"));
        for out in [&a, &b] {
            run(bin().args(["exp1", "--n", "16,64", "--quad-res", "16", "--fill-res", "32", "--format", format])
                .arg("--out").arg(out));
        }
        let (fa, fb) = (read_all(&a), read_all(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb);
    }
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = bin().args(["exp1", "--n", "64,16"]).output().unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
