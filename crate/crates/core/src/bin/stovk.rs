use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stovk::harness::config::parse_list;
use stovk::harness::data::{format_prediction, read_points, read_training};
use stovk::harness::output::to_canonical_json;
use stovk::harness::{
    emit_results, run_experiment, Experiment, ExperimentConfig, HarnessError, LambdaSpec, OutputFormat, RankSpec,
    Sampler,
};
use stovk::kernels::{KernelMode, OperatorKernelSpec, ScalarKernelSpec};
use stovk::ovkr::{fit, predict, FittedField, ModelFile, RidgeConfig};

#[derive(Parser)]
#[command(name = "stovk", version, about = "Operator-valued kernel regression and kernel Koopman experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence of vector-field regression in N
    Exp1(ExpArgs),
    /// Koopman spectrum and operator-action error in N
    Exp2(ExpArgs),
    /// Rank-truncated spectral forecasting
    Exp3(ExpArgs),
    /// Fit a model to `x t y1 y2` records
    Fit(FitArgs),
    /// Evaluate a saved model at `x t` records
    Predict(PredictArgs),
}

#[derive(Args)]
struct ExpArgs {
    /// Comma-separated sample counts
    #[arg(long)]
    n: Option<String>,
    #[arg(long, conflicts_with = "lambda_schedule")]
    lambda: Option<f64>,
    /// Schedule lambda = N^(-1/(2r+1)), given as `r=1`
    #[arg(long)]
    lambda_schedule: Option<String>,
    #[arg(long)]
    sigma_x: Option<f64>,
    #[arg(long)]
    sigma_t: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kernel: Option<KernelMode>,
    #[arg(long)]
    sampler: Option<Sampler>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<u32>,
    /// Comma-separated ranks; `full` means the model dimension
    #[arg(long)]
    ranks: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quad_res: Option<usize>,
    #[arg(long)]
    fill_res: Option<usize>,
    #[arg(long)]
    pinv_tol: Option<f64>,
    /// Number of leading eigenvalues to record
    #[arg(long)]
    top_k: Option<usize>,
    /// Record wall-clock runtimes (makes output run-dependent)
    #[arg(long)]
    timing: bool,
    /// Output directory
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value_t = 0.3)]
    sigma_x: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma_t: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value = "separable")]
    kernel: KernelMode,
    #[arg(long, default_value_t = 1e-8)]
    lambda: f64,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    points: PathBuf,
}

impl ExpArgs {
    fn into_config(self, experiment: Experiment) -> Result<(ExperimentConfig, PathBuf, OutputFormat), HarnessError> {
        let mut cfg = ExperimentConfig::defaults(experiment);
        if let Some(n) = &self.n {
            cfg.ns = parse_list(n)?;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = LambdaSpec::Fixed(l);
        }
        if let Some(s) = &self.lambda_schedule {
            cfg.lambda = s.parse()?;
            if matches!(cfg.lambda, LambdaSpec::Fixed(_)) {
                return Err(stovk::harness::ConfigError::Parse {
                    what: "lambda schedule",
                    input: s.clone(),
                }
                .into());
            }
        }
        if let Some(r) = &self.ranks {
            cfg.ranks = parse_list::<RankSpec>(r)?;
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        set!(sigma_x, sigma_t, alpha, sampler, noise_std, dt, horizon, seed, quad_res, fill_res, pinv_tol, top_k);
        if let Some(k) = self.kernel {
            cfg.kernel_mode = k;
        }
        cfg.timing = self.timing;
        cfg.out = Some(self.out.clone());
        cfg.validate()?;
        Ok((cfg, self.out, self.format))
    }
}

fn run_exp(args: ExpArgs, experiment: Experiment) -> Result<(), HarnessError> {
    let (cfg, out, format) = args.into_config(experiment)?;
    let record = run_experiment(&cfg)?;
    for path in emit_results(&record, &out, format)? {
        println!("wrote {}", path.display());
    }
    if let Some(s) = record.loglog_slope {
        println!("loglog_slope {s:.6}");
    }
    Ok(())
}

fn run_fit(args: FitArgs) -> Result<(), HarnessError> {
    let data = read_training(&args.data)?;
    let k = &args.kernel;
    let sx = ScalarKernelSpec::gaussian(k.sigma_x)?;
    let st = ScalarKernelSpec::gaussian(k.sigma_t)?;
    let d = data.output_dim();
    let kernel = match k.kernel {
        KernelMode::Separable => OperatorKernelSpec::separable(sx, st, d),
        KernelMode::TimeAligned => OperatorKernelSpec::time_aligned(sx, st, k.alpha, d),
    };
    let model = fit(&data, &RidgeConfig { lambda: k.lambda, kernel })?;
    fs::write(&args.out, to_canonical_json(&model.to_model_file())?)?;
    eprintln!(
        "fitted {} points, residual {:e}",
        data.len(),
        model.diagnostics().residual
    );
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<(), HarnessError> {
    let file: ModelFile = serde_json::from_str(&fs::read_to_string(&args.model)?)?;
    let model = FittedField::from_model_file(file)?;
    for (x, t) in read_points(&args.points)? {
        println!("{}", format_prediction(x, t, &predict(&model, &[x], t)?));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Exp1(a) => run_exp(a, Experiment::Exp1),
        Command::Exp2(a) => run_exp(a, Experiment::Exp2),
        Command::Exp3(a) => run_exp(a, Experiment::Exp3),
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
