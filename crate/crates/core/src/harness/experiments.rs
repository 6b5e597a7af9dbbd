use std::f64::consts::PI;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig, Sampler};
use super::metrics::{center_rms, l2_error_quadrature, loglog_slope, max_abs_diff};
use super::record::{ConvergenceRow, ForecastDiagnostics, ForecastRow, GapRow, ResultRecord, SpectrumRow};
use super::HarnessError;
use crate::kernels::{KernelMode, OperatorKernelSpec, ScalarKernelSpec, SpaceTimePoint};
use crate::koopman::{build_forecast, fit_koopman, forecast_at, koopman_apply, KoopmanModel};
use crate::linalg::DenseMatrix;
use crate::ovkr::{fit, predict, FittedField, RidgeConfig, TrainingSet};
use crate::sampling::{
    eval_test_field, fill_distance, flow_rk4, halton_points, make_trajectory_pairs, uniform_points, PointCloud,
    TrajectoryPairs, DEFAULT_FLOW_STEP,
};

const NOISE_STREAM: u64 = 1;

/// Splits `n_total` into `n` spatial sites times `T` time slices, with `T` the
/// largest divisor not exceeding the square root.
pub fn space_time_split(n_total: usize) -> (usize, usize) {
    let mut t = (n_total as f64).sqrt().floor() as usize;
    while t > 1 && !n_total.is_multiple_of(t) {
        t -= 1;
    }
    let t = t.max(1);
    (n_total / t, t)
}

/// Tensor design `(x_i, j / T)` for `j = 0..T`.
pub fn space_time_design(n_total: usize, sampler: Sampler, seed: u64) -> Vec<SpaceTimePoint> {
    let (n, t) = space_time_split(n_total);
    let cloud = match sampler {
        Sampler::Uniform => uniform_points(n, 1, seed),
        Sampler::Halton => halton_points(n, 1, seed),
    };
    let mut out = Vec::with_capacity(n_total);
    for p in &cloud.points {
        for j in 0..t {
            out.push(SpaceTimePoint::new(p.clone(), j as f64 / t as f64));
        }
    }
    out
}

fn operator_kernel(cfg: &ExperimentConfig) -> Result<OperatorKernelSpec, HarnessError> {
    let sx = ScalarKernelSpec::gaussian(cfg.sigma_x)?;
    let st = ScalarKernelSpec::gaussian(cfg.sigma_t)?;
    Ok(match cfg.kernel_mode {
        KernelMode::Separable => OperatorKernelSpec::separable(sx, st, 2),
        KernelMode::TimeAligned => OperatorKernelSpec::time_aligned(sx, st, cfg.alpha, 2),
    })
}

fn elapsed_ms(cfg: &ExperimentConfig, start: Instant) -> f64 {
    if cfg.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// Fits the test field on `n_total` samples and returns the model with its training set.
pub fn fit_test_field(cfg: &ExperimentConfig, n_total: usize) -> Result<(FittedField, TrainingSet), HarnessError> {
    let inputs = space_time_design(n_total, cfg.sampler, cfg.seed);
    let mut targets: Vec<Vec<f64>> = inputs.iter().map(|p| eval_test_field(p.x[0], p.t).to_vec()).collect();
    if cfg.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(NOISE_STREAM);
        let normal = Normal::new(0.0, cfg.noise_std).expect("noise std validated");
        for y in targets.iter_mut().flatten() {
            *y += normal.sample(&mut rng);
        }
    }
    let data = TrainingSet::new(inputs, targets)?;
    let ridge = RidgeConfig {
        lambda: cfg.lambda.value(n_total),
        kernel: operator_kernel(cfg)?,
    };
    Ok((fit(&data, &ridge)?, data))
}

fn exp1_row(cfg: &ExperimentConfig, n_total: usize) -> Result<ConvergenceRow, HarnessError> {
    let start = Instant::now();
    let (model, data) = fit_test_field(cfg, n_total)?;
    let l2_error = l2_error_quadrature(
        |x, t| predict(&model, &[x], t).unwrap_or_else(|_| vec![f64::NAN; 2]),
        eval_test_field,
        cfg.quad_res,
    )?;
    let runtime_ms = elapsed_ms(cfg, start);
    let cloud = PointCloud::new(2, data.inputs().iter().map(|p| vec![p.x[0], p.t]).collect(), cfg.seed)?;
    Ok(ConvergenceRow {
        n: n_total,
        fill_distance: fill_distance(&cloud, cfg.fill_res)?,
        lambda: model.lambda(),
        alpha: cfg.alpha,
        kernel_mode: cfg.kernel_mode,
        noise_std: cfg.noise_std,
        l2_error,
        runtime_ms,
    })
}

pub fn run_exp1(cfg: &ExperimentConfig) -> Result<ResultRecord, HarnessError> {
    cfg.expect(Experiment::Exp1)?;
    let rows = cfg
        .ns
        .par_iter()
        .map(|&n| exp1_row(cfg, n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut record = ResultRecord::empty(cfg);
    if rows.len() >= 2 {
        let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let errs: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
        let fills: Vec<f64> = rows.iter().map(|r| r.fill_distance).collect();
        record.loglog_slope = Some(loglog_slope(&ns, &errs)?);
        record.fill_distance_slope = Some(loglog_slope(&ns, &fills)?);
    }
    record.convergence = rows;
    record.notes = vec![
        "l2_error: tensor Gauss-Legendre quadrature over [0,1]^2 with quad_res nodes per axis".into(),
        "design: N = n x T with T the largest divisor of N not above sqrt(N), t_j = j/T".into(),
        "fill_distance: over the (x, t) design on a fill_res^2 grid".into(),
    ];
    Ok(record)
}

fn sine(x: f64) -> f64 {
    (2.0 * PI * x).sin()
}

/// `max_i |koopman_apply(sin 2 pi x)_i - sin(2 pi Phi_dt(x_i))|`.
pub fn action_error(model: &KoopmanModel, pairs: &TrajectoryPairs) -> Result<f64, HarnessError> {
    let g: Vec<f64> = pairs.states.iter().map(|&x| sine(x)).collect();
    let direct: Vec<f64> = pairs.advanced.iter().map(|&x| sine(x)).collect();
    Ok(max_abs_diff(&koopman_apply(model, &g)?, &direct))
}

fn koopman_run(cfg: &ExperimentConfig, n: usize) -> Result<(TrajectoryPairs, KoopmanModel, Vec<SpectrumRow>), HarnessError> {
    let pairs = make_trajectory_pairs(n, cfg.dt, cfg.seed)?;
    let model = fit_koopman(&pairs, &ScalarKernelSpec::gaussian(cfg.sigma_x)?, cfg.pinv_tol)?;
    let act = action_error(&model, &pairs)?;
    let rows = model
        .spectrum()
        .eigenvalues()
        .iter()
        .take(cfg.top_k)
        .enumerate()
        .map(|(k, z)| SpectrumRow {
            n,
            k: k + 1,
            eig_re: z.re,
            eig_im: z.im,
            eig_abs: z.norm(),
            action_error: act,
        })
        .collect();
    Ok((pairs, model, rows))
}

pub fn run_exp2(cfg: &ExperimentConfig) -> Result<ResultRecord, HarnessError> {
    cfg.expect(Experiment::Exp2)?;
    let runs = cfg
        .ns
        .par_iter()
        .map(|&n| koopman_run(cfg, n).map(|(_, _, rows)| rows))
        .collect::<Result<Vec<_>, _>>()?;
    let mut record = ResultRecord::empty(cfg);
    for (a, b) in runs.iter().zip(runs.iter().skip(1)) {
        for (ra, rb) in a.iter().zip(b) {
            let gap = ((rb.eig_re - ra.eig_re).powi(2) + (rb.eig_im - ra.eig_im).powi(2)).sqrt();
            record.gaps.push(GapRow {
                n_from: ra.n,
                n_to: rb.n,
                k: ra.k,
                gap,
            });
        }
    }
    if runs.len() >= 2 {
        let ns: Vec<f64> = cfg.ns.iter().map(|&n| n as f64).collect();
        let errs: Vec<f64> = runs.iter().map(|r| r[0].action_error).collect();
        record.loglog_slope = Some(loglog_slope(&ns, &errs)?);
    }
    record.spectrum = runs.into_iter().flatten().collect();
    record.notes = vec![
        "eigenvalues: K_N = pinv(G) G', sorted by descending modulus".into(),
        "action_error: max over centers of |koopman_apply(sin 2 pi x) - sin(2 pi Phi_dt(x))|, surrogate for the operator-norm error".into(),
        "loglog_slope: action_error against N".into(),
    ];
    Ok(record)
}

fn observable_rows(xs: &[f64]) -> Vec<Vec<f64>> {
    xs.iter().map(|&x| vec![sine(x), (2.0 * PI * x).cos()]).collect()
}

type ForecastTables = (Vec<SpectrumRow>, Vec<ForecastRow>, Vec<ForecastDiagnostics>);

fn exp3_run(cfg: &ExperimentConfig, n: usize) -> Result<ForecastTables, HarnessError> {
    let (pairs, model, spectrum) = koopman_run(cfg, n)?;
    let obs_rows = observable_rows(&pairs.states);
    let observable = DenseMatrix::from_rows(&obs_rows)?;
    let truth = (0..=cfg.horizon)
        .map(|s| {
            let moved = pairs
                .states
                .par_iter()
                .map(|&x| flow_rk4(x, s as f64 * cfg.dt, DEFAULT_FLOW_STEP))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(observable_rows(&moved))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let mut ranks: Vec<usize> = cfg.ranks.iter().map(|r| r.resolve(n)).collect();
    ranks.sort_unstable();
    ranks.dedup();
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for rank in ranks {
        let fc = build_forecast(&model, &observable, rank)?;
        let mut worst_imag: f64 = 0.0;
        for (s, target) in truth.iter().enumerate() {
            let snap = forecast_at(&fc, s as u32);
            worst_imag = worst_imag.max(snap.imag_residual);
            let pred: Vec<Vec<f64>> = (0..n).map(|i| snap.values.row(i).to_vec()).collect();
            rows.push(ForecastRow {
                n,
                rank,
                step: s as u32,
                t: s as f64 * cfg.dt,
                err: center_rms(&pred, target),
            });
        }
        diagnostics.push(ForecastDiagnostics {
            n,
            rank,
            max_modulus: fc.max_modulus(),
            max_imag_residual: worst_imag,
        });
    }
    Ok((spectrum, rows, diagnostics))
}

pub fn run_exp3(cfg: &ExperimentConfig) -> Result<ResultRecord, HarnessError> {
    cfg.expect(Experiment::Exp3)?;
    let runs = cfg
        .ns
        .par_iter()
        .map(|&n| exp3_run(cfg, n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut record = ResultRecord::empty(cfg);
    for (spectrum, rows, diagnostics) in runs {
        record.spectrum.extend(spectrum);
        record.forecast.extend(rows);
        record.forecast_diagnostics.extend(diagnostics);
    }
    record.notes = vec![
        "observable: f(x) = [sin 2 pi x, cos 2 pi x]".into(),
        "err: center-averaged RMS of the rank-r forecast against f(Phi_{step dt}(x_i))".into(),
        "forecast: Re sum_k phi_k lambda_k^step b_k with b fitted by least squares at step 0".into(),
    ];
    Ok(record)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultRecord, HarnessError> {
    match cfg.experiment {
        Experiment::Exp1 => run_exp1(cfg),
        Experiment::Exp2 => run_exp2(cfg),
        Experiment::Exp3 => run_exp3(cfg),
    }
}
