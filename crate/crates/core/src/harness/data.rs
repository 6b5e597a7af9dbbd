//! Plain-text data files: one record per line, whitespace-separated decimals.
//! Blank lines and lines starting with `#` are skipped.

use std::fs;
use std::path::Path;

use super::output::format_float;
use super::HarnessError;
use crate::kernels::SpaceTimePoint;
use crate::ovkr::TrainingSet;

fn numeric_lines(text: &str) -> impl Iterator<Item = (usize, Result<Vec<f64>, HarnessError>)> + '_ {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| HarnessError::DataFormat {
                    line: i + 1,
                    message: format!("not a number: {tok:?}"),
                })
            })
            .collect();
        Some((i + 1, values))
    })
}

/// Parses `x t y1 .. yd` records.
pub fn parse_training(text: &str) -> Result<TrainingSet, HarnessError> {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (line, values) in numeric_lines(text) {
        let values = values?;
        if values.len() < 3 {
            return Err(HarnessError::DataFormat {
                line,
                message: format!("expected x t y1 .., got {} fields", values.len()),
            });
        }
        inputs.push(SpaceTimePoint::new(vec![values[0]], values[1]));
        targets.push(values[2..].to_vec());
    }
    Ok(TrainingSet::new(inputs, targets)?)
}

/// Parses `x t` query records.
pub fn parse_points(text: &str) -> Result<Vec<(f64, f64)>, HarnessError> {
    numeric_lines(text)
        .map(|(line, values)| {
            let values = values?;
            match values.as_slice() {
                [x, t] => Ok((*x, *t)),
                _ => Err(HarnessError::DataFormat {
                    line,
                    message: format!("expected x t, got {} fields", values.len()),
                }),
            }
        })
        .collect()
}

pub fn read_training(path: &Path) -> Result<TrainingSet, HarnessError> {
    parse_training(&fs::read_to_string(path)?)
}

pub fn read_points(path: &Path) -> Result<Vec<(f64, f64)>, HarnessError> {
    parse_points(&fs::read_to_string(path)?)
}

/// Formats one `x t y1 .. yd` line.
pub fn format_prediction(x: f64, t: f64, y: &[f64]) -> String {
    let mut fields = vec![format_float(x), format_float(t)];
    fields.extend(y.iter().map(|&v| format_float(v)));
    fields.join(" ")
}
