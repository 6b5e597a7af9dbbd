use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Number, Value};

use super::config::OutputFormat;
use super::record::ResultRecord;
use super::HarnessError;

pub const CONVERGENCE_HEADER: [&str; 10] = [
    "experiment",
    "N",
    "fill_distance",
    "lambda",
    "alpha",
    "kernel_mode",
    "noise_std",
    "l2_error",
    "runtime_ms",
    "seed",
];
pub const SPECTRUM_HEADER: [&str; 8] = ["experiment", "N", "k", "eig_re", "eig_im", "eig_abs", "action_error", "seed"];
pub const FORECAST_HEADER: [&str; 7] = ["experiment", "N", "rank", "step", "t", "err", "seed"];

/// Decimal with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn canonicalize(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let v = n.as_f64().expect("float number");
            *n = Number::from_str(&format_float(v)).expect("formatted float is valid JSON");
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Pretty JSON with every float written as a 17-significant-digit literal.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    let mut v = serde_json::to_value(value)?;
    canonicalize(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn record_to_json(record: &ResultRecord) -> Result<String, HarnessError> {
    if let Some(name) = record.first_non_finite() {
        return Err(HarnessError::NonFinite(name));
    }
    to_canonical_json(record)
}

pub fn record_from_json(s: &str) -> Result<ResultRecord, HarnessError> {
    Ok(serde_json::from_str(s)?)
}

fn write_csv<const K: usize>(path: &Path, header: [&str; K], rows: Vec<[String; K]>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the record into directory `dir` and returns the files written.
///
/// CSV output produces `convergence.csv`, `spectrum.csv` and `forecast.csv`
/// for whichever tables are non-empty; JSON output produces `summary.json`.
pub fn emit_results(record: &ResultRecord, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, HarnessError> {
    if let Some(name) = record.first_non_finite() {
        return Err(HarnessError::NonFinite(name));
    }
    fs::create_dir_all(dir)?;
    let exp = record.experiment.as_str();
    let seed = record.config.seed.to_string();
    let f = format_float;
    let mut written = Vec::new();
    match format {
        OutputFormat::Json => {
            let path = dir.join("summary.json");
            fs::write(&path, record_to_json(record)?)?;
            written.push(path);
        }
        OutputFormat::Csv => {
            if !record.convergence.is_empty() {
                let rows = record
                    .convergence
                    .iter()
                    .map(|r| {
                        [
                            exp.to_string(),
                            r.n.to_string(),
                            f(r.fill_distance),
                            f(r.lambda),
                            f(r.alpha),
                            r.kernel_mode.as_str().to_string(),
                            f(r.noise_std),
                            f(r.l2_error),
                            f(r.runtime_ms),
                            seed.clone(),
                        ]
                    })
                    .collect();
                let path = dir.join("convergence.csv");
                write_csv(&path, CONVERGENCE_HEADER, rows)?;
                written.push(path);
            }
            if !record.spectrum.is_empty() {
                let rows = record
                    .spectrum
                    .iter()
                    .map(|r| {
                        [
                            exp.to_string(),
                            r.n.to_string(),
                            r.k.to_string(),
                            f(r.eig_re),
                            f(r.eig_im),
                            f(r.eig_abs),
                            f(r.action_error),
                            seed.clone(),
                        ]
                    })
                    .collect();
                let path = dir.join("spectrum.csv");
                write_csv(&path, SPECTRUM_HEADER, rows)?;
                written.push(path);
            }
            if !record.forecast.is_empty() {
                let rows = record
                    .forecast
                    .iter()
                    .map(|r| {
                        [
                            exp.to_string(),
                            r.n.to_string(),
                            r.rank.to_string(),
                            r.step.to_string(),
                            f(r.t),
                            f(r.err),
                            seed.clone(),
                        ]
                    })
                    .collect();
                let path = dir.join("forecast.csv");
                write_csv(&path, FORECAST_HEADER, rows)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Experiment, ExperimentConfig};
    use crate::harness::record::{ConvergenceRow, SpectrumRow};
    use crate::kernels::KernelMode;

    fn sample_record() -> ResultRecord {
        let cfg = ExperimentConfig::defaults(Experiment::Exp1);
        let mut rec = ResultRecord::empty(&cfg);
        for (i, n) in [16usize, 64].into_iter().enumerate() {
            rec.convergence.push(ConvergenceRow {
                n,
                fill_distance: 0.1 / (i + 1) as f64,
                lambda: 1e-8,
                alpha: 0.5,
                kernel_mode: KernelMode::Separable,
                noise_std: 0.0,
                l2_error: 0.4443720939737617 / (n as f64),
                runtime_ms: 0.0,
            });
        }
        rec.loglog_slope = Some(-1.0 / 3.0);
        rec
    }

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(1e-8), "1.0000000000000000e-8");
        for v in [0.4443720939737617, -1.0 / 3.0, 6.02e23, 5e-324] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let rec = sample_record();
        let first = record_to_json(&rec).unwrap();
        let parsed = record_from_json(&first).unwrap();
        assert_eq!(parsed, rec);
        assert_eq!(record_to_json(&parsed).unwrap(), first);
        assert!(first.contains("\"loglog_slope\": -3.3333333333333331e-1"));
    }

    #[test]
    fn convergence_csv_has_one_row_per_n() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_results(&sample_record(), dir.path(), OutputFormat::Csv).unwrap();
        assert_eq!(files, vec![dir.path().join("convergence.csv")]);
        let text = fs::read_to_string(&files[0]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CONVERGENCE_HEADER.join(","));
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("exp1,16,"));
        assert!(lines[1].ends_with(",42"));
    }

    #[test]
    fn spectrum_csv_has_one_row_per_eigenvalue() {
        let cfg = ExperimentConfig::defaults(Experiment::Exp2);
        let mut rec = ResultRecord::empty(&cfg);
        for n in [50, 100] {
            for k in 1..=3 {
                rec.spectrum.push(SpectrumRow {
                    n,
                    k,
                    eig_re: 1.0 / k as f64,
                    eig_im: 0.0,
                    eig_abs: 1.0 / k as f64,
                    action_error: 1e-5,
                });
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let files = emit_results(&rec, dir.path(), OutputFormat::Csv).unwrap();
        let text = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().next().unwrap(), SPECTRUM_HEADER.join(","));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn non_finite_metrics_are_rejected() {
        let mut rec = sample_record();
        rec.convergence[0].l2_error = f64::NAN;
        assert!(matches!(record_to_json(&rec), Err(HarnessError::NonFinite(n)) if n == "l2_error"));
    }
}
