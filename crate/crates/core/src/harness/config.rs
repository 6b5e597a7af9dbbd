use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::KernelMode;
use crate::linalg::DEFAULT_PINV_TOL;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("sample count list is empty")]
    EmptySampleList,
    #[error("sample counts must be positive and strictly increasing (entry {0})")]
    NotIncreasing(usize),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be nonnegative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("quadrature resolution must be at least 8, got {0}")]
    QuadratureTooCoarse(usize),
    #[error("fill-distance grid resolution must be at least 2, got {0}")]
    GridTooCoarse(usize),
    #[error("rank list is empty or contains zero")]
    BadRanks,
    #[error("pseudoinverse tolerance {0} outside (0, 1)")]
    PinvTolerance(f64),
    #[error("config is for {got}, expected {expected}")]
    WrongExperiment { expected: Experiment, got: Experiment },
    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Regularization: a fixed value or the bias-variance schedule `N^(-1/(2r+1))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSpec {
    Fixed(f64),
    Schedule { r: f64 },
}

impl LambdaSpec {
    pub fn value(&self, n: usize) -> f64 {
        match *self {
            LambdaSpec::Fixed(l) => l,
            LambdaSpec::Schedule { r } => (n as f64).powf(-1.0 / (2.0 * r + 1.0)),
        }
    }
}

impl FromStr for LambdaSpec {
    type Err = ConfigError;

    /// Accepts `1e-8` or `r=1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::Parse {
            what: "lambda",
            input: s.to_string(),
        };
        match s.trim().strip_prefix("r=") {
            Some(r) => Ok(LambdaSpec::Schedule {
                r: r.parse().map_err(|_| bad())?,
            }),
            None => Ok(LambdaSpec::Fixed(s.trim().parse().map_err(|_| bad())?)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Uniform,
    Halton,
}

impl FromStr for Sampler {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Sampler::Uniform),
            "halton" => Ok(Sampler::Halton),
            _ => Err(ConfigError::Parse {
                what: "sampler",
                input: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(ConfigError::Parse {
                what: "format",
                input: s.to_string(),
            }),
        }
    }
}

/// A forecast rank; `Full` resolves to the model dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSpec {
    Fixed(usize),
    Full,
}

impl RankSpec {
    pub fn resolve(&self, dim: usize) -> usize {
        match *self {
            RankSpec::Fixed(r) => r,
            RankSpec::Full => dim,
        }
    }
}

impl FromStr for RankSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "full" {
            return Ok(RankSpec::Full);
        }
        s.parse().map(RankSpec::Fixed).map_err(|_| ConfigError::Parse {
            what: "rank",
            input: s.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub ns: Vec<usize>,
    pub lambda: LambdaSpec,
    pub sigma_x: f64,
    pub sigma_t: f64,
    pub alpha: f64,
    pub kernel_mode: KernelMode,
    pub sampler: Sampler,
    pub noise_std: f64,
    pub dt: f64,
    pub horizon: u32,
    pub ranks: Vec<RankSpec>,
    pub seed: u64,
    pub quad_res: usize,
    pub fill_res: usize,
    pub pinv_tol: f64,
    pub top_k: usize,
    /// Record wall-clock runtimes; off by default so outputs are reproducible.
    pub timing: bool,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            ns: vec![16, 64, 256, 1024],
            lambda: LambdaSpec::Fixed(1e-8),
            sigma_x: 0.3,
            sigma_t: 0.3,
            alpha: 0.5,
            kernel_mode: KernelMode::Separable,
            sampler: Sampler::Uniform,
            noise_std: 0.0,
            dt: 0.05,
            horizon: 40,
            ranks: vec![
                RankSpec::Fixed(1),
                RankSpec::Fixed(2),
                RankSpec::Fixed(4),
                RankSpec::Fixed(8),
                RankSpec::Fixed(16),
                RankSpec::Full,
            ],
            seed: 42,
            quad_res: 64,
            fill_res: 256,
            pinv_tol: DEFAULT_PINV_TOL,
            top_k: 6,
            timing: false,
            out: None,
        };
        match experiment {
            Experiment::Exp1 => base,
            Experiment::Exp2 => Self {
                ns: vec![50, 100, 200, 400],
                sigma_x: 0.2,
                ..base
            },
            Experiment::Exp3 => Self {
                ns: vec![400],
                sigma_x: 0.2,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ns.is_empty() {
            return Err(ConfigError::EmptySampleList);
        }
        if self.ns[0] == 0 {
            return Err(ConfigError::NotIncreasing(0));
        }
        if let Some(i) = self.ns.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ConfigError::NotIncreasing(i + 1));
        }
        let positive = [
            ("sigma_x", self.sigma_x),
            ("sigma_t", self.sigma_t),
            ("dt", self.dt),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        for (name, value) in [("alpha", self.alpha), ("noise_std", self.noise_std)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ConfigError::Negative { name, value });
            }
        }
        match self.lambda {
            LambdaSpec::Fixed(l) if !(l > 0.0 && l.is_finite()) => {
                return Err(ConfigError::NonPositive {
                    name: "lambda",
                    value: l,
                })
            }
            LambdaSpec::Schedule { r } if !(r > 0.0 && r.is_finite()) => {
                return Err(ConfigError::NonPositive {
                    name: "lambda schedule r",
                    value: r,
                })
            }
            _ => {}
        }
        if self.quad_res < 8 {
            return Err(ConfigError::QuadratureTooCoarse(self.quad_res));
        }
        if self.fill_res < 2 {
            return Err(ConfigError::GridTooCoarse(self.fill_res));
        }
        if !(self.pinv_tol > 0.0 && self.pinv_tol < 1.0) {
            return Err(ConfigError::PinvTolerance(self.pinv_tol));
        }
        if self.top_k == 0 {
            return Err(ConfigError::NonPositive {
                name: "top_k",
                value: 0.0,
            });
        }
        if self.ranks.is_empty() || self.ranks.contains(&RankSpec::Fixed(0)) {
            return Err(ConfigError::BadRanks);
        }
        Ok(())
    }

    pub(crate) fn expect(&self, experiment: Experiment) -> Result<(), ConfigError> {
        if self.experiment != experiment {
            return Err(ConfigError::WrongExperiment {
                expected: experiment,
                got: self.experiment,
            });
        }
        self.validate()
    }
}

/// Parses a comma-separated list such as `16,64,256`.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, ConfigError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim().parse().map_err(|_| ConfigError::Parse {
                what: "list entry",
                input: p.to_string(),
            })
        })
        .collect()
}
