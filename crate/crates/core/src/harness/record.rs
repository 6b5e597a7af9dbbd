use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use crate::kernels::KernelMode;

/// One regression run of the first experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub fill_distance: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub kernel_mode: KernelMode,
    pub noise_std: f64,
    pub l2_error: f64,
    pub runtime_ms: f64,
}

/// Eigenvalue `k` (1-based) of the model trained on `n` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub n: usize,
    pub k: usize,
    pub eig_re: f64,
    pub eig_im: f64,
    pub eig_abs: f64,
    pub action_error: f64,
}

/// `|lambda_k(n_to) - lambda_k(n_from)|` for consecutive sample counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n_from: usize,
    pub n_to: usize,
    pub k: usize,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub n: usize,
    pub rank: usize,
    pub step: u32,
    pub t: f64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastDiagnostics {
    pub n: usize,
    pub rank: usize,
    pub max_modulus: f64,
    pub max_imag_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub convergence: Vec<ConvergenceRow>,
    pub spectrum: Vec<SpectrumRow>,
    pub gaps: Vec<GapRow>,
    pub forecast: Vec<ForecastRow>,
    pub forecast_diagnostics: Vec<ForecastDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub loglog_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fill_distance_slope: Option<f64>,
    pub notes: Vec<String>,
}

impl ResultRecord {
    pub fn empty(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.experiment,
            config: config.clone(),
            convergence: vec![],
            spectrum: vec![],
            gaps: vec![],
            forecast: vec![],
            forecast_diagnostics: vec![],
            loglog_slope: None,
            fill_distance_slope: None,
            notes: vec![],
        }
    }

    /// Name of the first non-finite metric, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        let mut bad = None;
        let mut check = |name: &str, v: f64| {
            if bad.is_none() && !v.is_finite() {
                bad = Some(name.to_string());
            }
        };
        for r in &self.convergence {
            check("fill_distance", r.fill_distance);
            check("lambda", r.lambda);
            check("l2_error", r.l2_error);
            check("runtime_ms", r.runtime_ms);
        }
        for r in &self.spectrum {
            check("eig_re", r.eig_re);
            check("eig_im", r.eig_im);
            check("eig_abs", r.eig_abs);
            check("action_error", r.action_error);
        }
        for r in &self.gaps {
            check("gap", r.gap);
        }
        for r in &self.forecast {
            check("err", r.err);
        }
        for r in &self.forecast_diagnostics {
            check("max_modulus", r.max_modulus);
            check("max_imag_residual", r.max_imag_residual);
        }
        if let Some(s) = self.loglog_slope {
            check("loglog_slope", s);
        }
        if let Some(s) = self.fill_distance_slope {
            check("fill_distance_slope", s);
        }
        bad
    }

    pub fn errors_by_n(&self) -> Vec<(usize, f64)> {
        self.convergence.iter().map(|r| (r.n, r.l2_error)).collect()
    }

    pub fn eigenvalues_for(&self, n: usize) -> Vec<&SpectrumRow> {
        self.spectrum.iter().filter(|r| r.n == n).collect()
    }

    pub fn gaps_for(&self, k: usize) -> Vec<&GapRow> {
        self.gaps.iter().filter(|r| r.k == k).collect()
    }

    pub fn forecast_errors(&self, n: usize, rank: usize) -> Vec<f64> {
        self.forecast
            .iter()
            .filter(|r| r.n == n && r.rank == rank)
            .map(|r| r.err)
            .collect()
    }
}
