//! Experiment pipelines shared by the CLI and the test suites. Every function
//! returns its results; the `write_*` helpers put them on disk.

use std::path::Path;
use std::time::Instant;

use kedmd_core::control::{
    conditioning_stats, piecewise_constant_schedule, run_algorithm1, sample_micro_data, ClusterRegression,
    ControlDataset, ControlSurrogate, ControlSystem, DeclaredConstants, ErrorDiagnostic, MicroSampling,
    OnesTermMethod,
};
use kedmd_core::geometry::{
    chebyshev_grid, default_probe_resolution, fill_distance, staggered_grid, uniform_grid, AxisBox, PointCloud,
};
use kedmd_core::koopman::{
    fit_autonomous, max_over_box, validation_errors, AutonomousSurrogate, DynamicalSystem, Trajectory,
};
use kedmd_core::linalg::{distance, Matrix};
use kedmd_core::stability::{check_decrease, check_powerform_transfer, MarginReport, DEFAULT_SPLIT};
use kedmd_core::systems::NamedSystem;
use kedmd_core::wendland::WendlandKernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{EpsRule, ExperimentConfig, GridSpec, VariantName};
use crate::error::{Failure, Result};
use crate::io::{names, write_json, write_table};
use crate::svg;

/// Sampling draws from stream 0 of the seeded ChaCha8 generator, rollout
/// controls from stream 1, so adding one never perturbs the other.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn make_grid(spec: &GridSpec, domain: &AxisBox) -> Result<PointCloud> {
    Ok(match spec {
        GridSpec::Uniform { delta } => uniform_grid(domain, *delta)?,
        GridSpec::Chebyshev { points_per_axis } => chebyshev_grid(domain, *points_per_axis)?,
        GridSpec::File { path } => crate::io::read_point_cloud(path)?,
    })
}

pub fn make_kernel(cfg: &ExperimentConfig, domain: &AxisBox) -> Result<WendlandKernel> {
    let sigma = cfg.kernel.support_radius.unwrap_or_else(|| domain.diameter());
    Ok(WendlandKernel::new(domain.dim(), cfg.kernel.smoothness, sigma)?)
}

pub fn validation_region(cfg: &ExperimentConfig, domain: &AxisBox) -> Result<AxisBox> {
    Ok(match cfg.validation.region {
        Some([lo, hi]) => AxisBox::cube(domain.dim(), lo, hi)?,
        None => domain.clone(),
    })
}

pub fn validation_grid(cfg: &ExperimentConfig, domain: &AxisBox) -> Result<PointCloud> {
    Ok(staggered_grid(&validation_region(cfg, domain)?, cfg.validation.delta)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedMax {
    pub half_width: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub points: usize,
    pub max_error: f64,
    pub nested: Vec<NestedMax>,
}

fn summarize(cfg: &ExperimentConfig, validation: &PointCloud, errors: &[f64]) -> Result<ValidationSummary> {
    let n = validation.dim();
    let nested = cfg
        .validation
        .nested
        .iter()
        .map(|&w| Ok(NestedMax { half_width: w, max_error: max_over_box(validation, errors, &AxisBox::cube(n, -w, w)?) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationSummary {
        points: validation.len(),
        max_error: errors.iter().copied().fold(0.0, f64::max),
        nested,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutonomousMetrics {
    pub system: String,
    pub centers: usize,
    pub support_radius: f64,
    pub smoothness: u32,
    pub lambda: f64,
    pub variant: VariantName,
    pub fill_distance: f64,
    pub jitter: f64,
    /// `max_i ‖F̂(x_i) − F(x_i)‖`.
    pub site_residual: f64,
    /// Data sites whose successor leaves the domain.
    pub invariance_violations: usize,
    pub validation: ValidationSummary,
}

pub struct AutonomousRun {
    pub system: NamedSystem,
    pub surrogate: AutonomousSurrogate,
    pub validation: PointCloud,
    pub errors: Vec<f64>,
    pub metrics: AutonomousMetrics,
    pub fit_seconds: f64,
}

fn require_autonomous(system: &NamedSystem) -> Result<()> {
    if system.is_autonomous() {
        Ok(())
    } else {
        Err(Failure::config(format!("system `{}` has inputs; use the control commands", system.name)))
    }
}

pub fn run_fit_autonomous(cfg: &ExperimentConfig) -> Result<AutonomousRun> {
    let system = cfg.system()?;
    require_autonomous(&system)?;
    let domain = DynamicalSystem::domain(&system).clone();
    let data = make_grid(&cfg.grid, &domain)?;
    let kernel = make_kernel(cfg, &domain)?;
    let start = Instant::now();
    let surrogate = fit_autonomous(&system, &data, &kernel, cfg.lambda, cfg.variant.into())?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let site_residual = data
        .iter()
        .map(|x| distance(&surrogate.predict(x), &DynamicalSystem::step(&system, x)))
        .fold(0.0, f64::max);
    let validation = validation_grid(cfg, &domain)?;
    let errors = validation_errors(&system, &surrogate, &validation);
    let metrics = AutonomousMetrics {
        system: system.name.clone(),
        centers: data.len(),
        support_radius: kernel.support_radius(),
        smoothness: kernel.smoothness(),
        lambda: cfg.lambda,
        variant: cfg.variant,
        fill_distance: fill_distance(&data, &domain, default_probe_resolution(&domain))?,
        jitter: surrogate.model().jitter(),
        site_residual,
        invariance_violations: surrogate.invariance_violations().len(),
        validation: summarize(cfg, &validation, &errors)?,
    };
    Ok(AutonomousRun { system, surrogate, validation, errors, metrics, fit_seconds })
}

#[derive(Serialize)]
struct Timing {
    fit_seconds: f64,
}

/// Bundle under `out/model`, deterministic `metrics.json`, and wall-clock
/// timings kept apart in `timing.json`.
pub fn write_fit_autonomous(out: &Path, run: &AutonomousRun) -> Result<()> {
    std::fs::create_dir_all(out)?;
    crate::io::save_autonomous(&out.join("model"), &run.system.name, &run.surrogate)?;
    write_json(&out.join("metrics.json"), &run.metrics)?;
    write_json(&out.join("timing.json"), &Timing { fit_seconds: run.fit_seconds })
}

pub struct HeatmapResult {
    pub validation: PointCloud,
    pub errors: Vec<f64>,
    pub summary: ValidationSummary,
}

/// Pointwise errors of a (possibly reloaded) surrogate on the staggered grid.
pub fn run_heatmap(cfg: &ExperimentConfig, surrogate: &AutonomousSurrogate) -> Result<HeatmapResult> {
    let system = cfg.system()?;
    require_autonomous(&system)?;
    let validation = validation_grid(cfg, DynamicalSystem::domain(&system))?;
    let errors = validation_errors(&system, surrogate, &validation);
    let summary = summarize(cfg, &validation, &errors)?;
    Ok(HeatmapResult { validation, errors, summary })
}

fn write_point_values(path: &Path, cloud: &PointCloud, values: &[f64], column: &str) -> Result<()> {
    let mut header = names("x", cloud.dim());
    header.push(column.to_string());
    write_table(
        path,
        &header,
        cloud.iter().zip(values).map(|(x, v)| {
            let mut r = x.to_vec();
            r.push(*v);
            r
        }),
    )
}

fn write_svg(path: &Path, title: &str, cloud: &PointCloud, values: &[f64], cell: f64) -> Result<()> {
    if cloud.dim() != 2 {
        return Ok(());
    }
    let pts: Vec<(f64, f64)> = cloud.iter().map(|x| (x[0], x[1])).collect();
    let scale = svg::LogScale::fit(values);
    std::fs::write(path, svg::heatmap(title, &pts, values, cell, scale))?;
    Ok(())
}

pub fn write_heatmap(out: &Path, cfg: &ExperimentConfig, h: &HeatmapResult) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_point_values(&out.join("error_heatmap.csv"), &h.validation, &h.errors, "error")?;
    write_svg(&out.join("error_heatmap.svg"), "one-step error |F(x) - F_hat(x)|", &h.validation, &h.errors, cfg.validation.delta)?;
    let mut rows = vec![vec![f64::INFINITY, h.summary.max_error]];
    rows.extend(h.summary.nested.iter().map(|n| vec![n.half_width, n.max_error]));
    write_table(&out.join("nested_box_maxima.csv"), &["half_width".into(), "max_error".into()], rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSummary {
    pub points: usize,
    pub min_margin: f64,
    pub failure_count: usize,
    /// Largest distance of a failing point to `x*`.
    pub ball_radius: f64,
    /// Largest `V` over failing points.
    pub c_fail: f64,
    /// Violations of the relaxed decrease with split `s`, if `V` is a power of the norm.
    pub transfer_split: Option<f64>,
    pub transfer_violations: Option<usize>,
}

pub struct LyapunovResult {
    pub validation: PointCloud,
    pub report: MarginReport,
    pub summary: LyapunovSummary,
}

pub fn run_lyapunov(cfg: &ExperimentConfig, surrogate: &AutonomousSurrogate) -> Result<LyapunovResult> {
    let system = cfg.system()?;
    let spec = system
        .lyapunov
        .clone()
        .ok_or_else(|| Failure::config(format!("system `{}` declares no Lyapunov function", system.name)))?;
    let validation = validation_grid(cfg, DynamicalSystem::domain(&system))?;
    let report = check_decrease(|x| surrogate.predict(x), &spec, &validation);
    let transfer = match spec.power_p() {
        Some(_) => Some(check_powerform_transfer(
            |x| DynamicalSystem::step(&system, x),
            |x| surrogate.predict(x),
            &spec,
            &validation,
            DEFAULT_SPLIT,
        )?),
        None => None,
    };
    let summary = LyapunovSummary {
        points: validation.len(),
        min_margin: report.min_margin,
        failure_count: report.failures.len(),
        ball_radius: report.max_failure_distance,
        c_fail: report.max_failure_value,
        transfer_split: transfer.as_ref().map(|t| t.split),
        transfer_violations: transfer.as_ref().map(|t| t.violations.len()),
    };
    Ok(LyapunovResult { validation, report, summary })
}

pub fn write_lyapunov(out: &Path, cfg: &ExperimentConfig, r: &LyapunovResult) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_point_values(&out.join("lyapunov_margins.csv"), &r.validation, &r.report.margins, "margin")?;
    // Color by the magnitude of negative margins: zero (bottom color) means certified.
    let deficits: Vec<f64> = r.report.margins.iter().map(|m| (-m).max(0.0)).collect();
    write_svg(&out.join("lyapunov_deficit.svg"), "decrease deficit max(0, -margin)", &r.validation, &deficits, cfg.validation.delta)?;
    write_json(&out.join("lyapunov_summary.json"), &r.summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditioningSummary {
    pub max_scaled_pinv_norm: f64,
    pub median_scaled_pinv_norm: f64,
    pub min_lambda_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticSummary {
    /// The `x`-independent second term of `D(x)`.
    pub term2: f64,
    pub ones_term: f64,
    pub ones_method: String,
    pub native_norm: f64,
    /// `declared` or `fitted-columns` (a computable lower stand-in).
    pub native_norm_source: String,
    /// Max of the first term over the validation grid.
    pub max_term1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlMetrics {
    pub system: String,
    pub centers: usize,
    pub micro_samples: usize,
    pub neighbors: usize,
    pub eps_rule: EpsRule,
    pub eps: f64,
    pub support_radius: f64,
    pub lambda: f64,
    pub jitter: f64,
    pub fill_distance: f64,
    pub rejected: Vec<usize>,
    pub conditioning: ConditioningSummary,
    /// `max_ℓ ‖Ĥ(x_ℓ) − H*_ℓ‖_F` over retained centers.
    pub center_residual: f64,
    /// `max_ℓ ‖H*_ℓ − [g₀(x_ℓ) G(x_ℓ)]‖_F` against the analytic split.
    pub recovery_residual: f64,
    pub diagnostic: Option<DiagnosticSummary>,
}

pub struct ControlRun {
    pub system: NamedSystem,
    pub dataset: ControlDataset,
    pub surrogate: ControlSurrogate,
    pub regression: ClusterRegression,
    pub metrics: ControlMetrics,
    pub fit_seconds: f64,
}

fn require_control(system: &NamedSystem) -> Result<()> {
    if system.is_autonomous() {
        Err(Failure::config(format!("system `{}` has no inputs; use the autonomous commands", system.name)))
    } else {
        Ok(())
    }
}

/// `[g₀ G]` of the true system at `x`, `n × (m+1)`.
pub fn analytic_h<S: ControlSystem + ?Sized>(system: &S, x: &[f64]) -> Matrix {
    let g0 = system.drift(x);
    let g = system.input_matrix(x);
    Matrix::from_fn(system.dim(), system.control_dim() + 1, |p, q| if q == 0 { g0[p] } else { g[(p, q - 1)] })
}

pub fn run_fit_control(cfg: &ExperimentConfig) -> Result<ControlRun> {
    let system = cfg.system()?;
    require_control(&system)?;
    let spec = cfg.control.clone().unwrap_or_default();
    let m = system.control_dim();
    if spec.neighbors < m + 1 {
        return Err(Failure::config(format!("neighbors N = {} must be at least m + 1 = {}", spec.neighbors, m + 1)));
    }
    let domain = ControlSystem::domain(&system).clone();
    let centers = make_grid(&cfg.grid, &domain)?;
    let kernel = make_kernel(cfg, &domain)?;
    let sampling = match spec.eps {
        EpsRule::InverseCenters => MicroSampling::Ball { radius: 1.0 / centers.len() as f64 },
        EpsRule::Exact | EpsRule::Fixed(0.0) => MicroSampling::ExactCenter,
        EpsRule::Fixed(r) => MicroSampling::Ball { radius: r },
    };
    let per_center = spec.samples_per_center.unwrap_or(spec.neighbors);
    let mut rng = rng_for(cfg.seed, 0);
    let dataset = sample_micro_data(&system, &centers, per_center, sampling, &mut rng)?;
    let start = Instant::now();
    let (surrogate, regression) = run_algorithm1(&dataset, &centers, spec.neighbors, &kernel, cfg.lambda)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let stats = conditioning_stats(&regression);
    let mut center_residual = 0.0f64;
    let mut recovery_residual = 0.0f64;
    for c in &regression.clusters {
        let x = centers.point(c.center_index);
        center_residual = center_residual.max(surrogate.h_matrix(x).sub(&c.h).frobenius_norm());
        recovery_residual = recovery_residual.max(c.h.sub(&analytic_h(&system, x)).frobenius_norm());
    }
    let fill = fill_distance(surrogate.centers(), &domain, default_probe_resolution(&domain))?;
    let diagnostic = if spec.lipschitz_drift > 0.0 || spec.lipschitz_input > 0.0 || spec.native_norm_bound.is_some() {
        let declared = DeclaredConstants {
            lipschitz_drift: spec.lipschitz_drift,
            lipschitz_input: spec.lipschitz_input,
            native_norm_bound: spec.native_norm_bound,
        };
        let d = ErrorDiagnostic::prepare(&surrogate, &regression, declared, fill, spec.ones_crossover)?;
        let validation = validation_grid(cfg, &domain)?;
        let max_term1 = validation.iter().map(|x| d.evaluate(x).term1).fold(0.0, f64::max);
        Some(DiagnosticSummary {
            term2: d.term2(),
            ones_term: d.ones_term,
            ones_method: match d.ones_method {
                OnesTermMethod::Exhaustive => "exhaustive".into(),
                OnesTermMethod::EigenvalueBound => "eigenvalue-bound".into(),
            },
            native_norm: d.native_norm,
            native_norm_source: if d.native_norm_declared { "declared" } else { "fitted-columns" }.into(),
            max_term1,
        })
    } else {
        None
    };
    let metrics = ControlMetrics {
        system: system.name.clone(),
        centers: centers.len(),
        micro_samples: dataset.len(),
        neighbors: spec.neighbors,
        eps_rule: spec.eps,
        eps: regression.eps(),
        support_radius: kernel.support_radius(),
        lambda: cfg.lambda,
        jitter: surrogate.model().jitter(),
        fill_distance: fill,
        rejected: regression.rejected.iter().map(|r| r.center_index).collect(),
        conditioning: ConditioningSummary {
            max_scaled_pinv_norm: stats.max_scaled,
            median_scaled_pinv_norm: stats.median_scaled,
            min_lambda_min: stats.min_lambda,
        },
        center_residual,
        recovery_residual,
        diagnostic,
    };
    Ok(ControlRun { system, dataset, surrogate, regression, metrics, fit_seconds })
}

pub fn write_fit_control(out: &Path, run: &ControlRun) -> Result<()> {
    std::fs::create_dir_all(out)?;
    crate::io::save_control(&out.join("control_model"), &run.system.name, &run.surrogate, &run.regression)?;
    crate::io::write_control_dataset(&out.join("micro_data.csv"), &run.dataset)?;
    let centers = &run.regression.assignment.centers;
    let mut header = vec!["center".to_string()];
    header.extend(names("x", centers.dim()));
    header.push("lambda_min".into());
    header.push("scaled_pinv_norm".into());
    let rows = run.regression.clusters.iter().map(|c| {
        let mut r = vec![c.center_index as f64];
        r.extend_from_slice(centers.point(c.center_index));
        r.push(c.lambda_min);
        r.push(c.scaled_pinv_norm);
        r
    });
    write_table(&out.join("cluster_stats.csv"), &header, rows)?;
    write_json(&out.join("control_metrics.json"), &run.metrics)?;
    write_json(&out.join("control_timing.json"), &Timing { fit_seconds: run.fit_seconds })
}

/// `−R + 0.2(j − 1)` for `j = 1..=20` unless configured.
pub fn heatmap_controls(cfg: &ExperimentConfig, bound: f64) -> Vec<Vec<f64>> {
    match cfg.control.as_ref().and_then(|c| c.heatmap_controls.clone()) {
        Some(v) => v.into_iter().map(|u| vec![u]).collect(),
        None => (0..20).map(|j| vec![-bound + 0.2 * j as f64]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlHeatmapSummary {
    pub points: usize,
    pub controls: Vec<f64>,
    pub max_error: f64,
    pub nested: Vec<NestedMax>,
}

pub struct ControlHeatmapResult {
    pub validation: PointCloud,
    pub errors: Vec<f64>,
    pub summary: ControlHeatmapSummary,
}

pub fn run_control_heatmap(cfg: &ExperimentConfig, surrogate: &ControlSurrogate) -> Result<ControlHeatmapResult> {
    let system = cfg.system()?;
    require_control(&system)?;
    if system.control_dim() != 1 && cfg.control.as_ref().and_then(|c| c.heatmap_controls.as_ref()).is_none() {
        return Err(Failure::config("default heatmap controls assume m = 1"));
    }
    let validation = validation_grid(cfg, ControlSystem::domain(&system))?;
    let controls = heatmap_controls(cfg, system.control_bound());
    let errors = surrogate.error_map(&system, &validation, &controls);
    let s = summarize(cfg, &validation, &errors)?;
    let summary = ControlHeatmapSummary {
        points: validation.len(),
        controls: controls.iter().flatten().copied().collect(),
        max_error: s.max_error,
        nested: s.nested,
    };
    Ok(ControlHeatmapResult { validation, errors, summary })
}

pub fn write_control_heatmap(out: &Path, cfg: &ExperimentConfig, r: &ControlHeatmapResult) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_point_values(&out.join("control_error_heatmap.csv"), &r.validation, &r.errors, "max_error")?;
    write_svg(
        &out.join("control_error_heatmap.svg"),
        "max_j |f(x,u_j) - f_hat(x,u_j)|",
        &r.validation,
        &r.errors,
        cfg.validation.delta,
    )?;
    write_json(&out.join("control_heatmap_summary.json"), &r.summary)
}

/// Any fitted surrogate usable for rollouts.
pub enum Model {
    Autonomous(AutonomousSurrogate),
    Control(ControlSurrogate),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub step: usize,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
}

pub struct RolloutResult {
    pub schedule: Vec<Vec<f64>>,
    pub trajectories: Vec<Trajectory>,
    /// Accumulated-error statistics across initial conditions.
    pub envelope: Vec<EnvelopeRow>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    // Nearest-rank quantile.
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

pub fn run_rollout(cfg: &ExperimentConfig, model: &Model) -> Result<RolloutResult> {
    let system = cfg.system()?;
    let spec = cfg.rollout.clone().ok_or_else(|| Failure::config("rollout section missing"))?;
    let policy = spec.exit_policy.into();
    let n = ControlSystem::dim(&system);
    if spec.initial.iter().any(|x| x.len() != n) {
        return Err(Failure::config(format!("initial conditions must have {n} components")));
    }
    let (schedule, trajectories) = match model {
        Model::Autonomous(s) => {
            require_autonomous(&system)?;
            let t: Vec<Trajectory> = spec.initial.iter().map(|x0| s.rollout(x0, spec.steps, Some(&system), policy)).collect();
            (Vec::new(), t)
        }
        Model::Control(s) => {
            require_control(&system)?;
            let m = system.control_dim();
            let bound = system.control_bound();
            let values: Vec<Vec<f64>> = match (&spec.controls, spec.random_controls) {
                (Some(v), _) => v.clone(),
                (None, Some(count)) => {
                    let mut rng = rng_for(cfg.seed, 1);
                    (0..count).map(|_| (0..m).map(|_| rng.gen_range(-bound..=bound)).collect()).collect()
                }
                (None, None) => vec![vec![0.0; m]],
            };
            if values.iter().any(|u| u.len() != m) {
                return Err(Failure::config(format!("controls must have {m} components")));
            }
            let mut schedule = piecewise_constant_schedule(&values, spec.hold.max(1));
            schedule.resize(spec.steps, values.last().cloned().unwrap_or_else(|| vec![0.0; m]));
            let domain = ControlSystem::domain(&system).clone();
            let t: Vec<Trajectory> = spec.initial.iter().map(|x0| s.rollout(x0, &schedule, Some(&system), &domain, policy)).collect();
            (schedule, t)
        }
    };
    let mut envelope = Vec::new();
    for step in 0..=spec.steps {
        let mut errs: Vec<f64> =
            trajectories.iter().filter_map(|t: &Trajectory| t.accumulated_errors.get(step).copied()).collect();
        if errs.is_empty() {
            break;
        }
        errs.sort_by(|a, b| a.total_cmp(b));
        envelope.push(EnvelopeRow {
            step,
            median: quantile(&errs, 0.5),
            q90: quantile(&errs, 0.9),
            max: *errs.last().expect("non-empty"),
        });
    }
    Ok(RolloutResult { schedule, trajectories, envelope })
}

pub fn write_rollout(out: &Path, r: &RolloutResult) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for (i, t) in r.trajectories.iter().enumerate() {
        let n = t.states[0].len();
        let m = r.schedule.first().map_or(0, Vec::len);
        let mut header = vec!["step".to_string()];
        header.extend(names("xhat", n));
        header.extend(names("x", n));
        header.extend(names("u", m));
        header.push("one_step_error".into());
        header.push("accumulated_error".into());
        let truth = t.truth.as_ref().expect("rollouts always carry the true trajectory");
        let rows = (0..t.states.len()).map(|k| {
            let mut row = vec![k as f64];
            row.extend_from_slice(&t.states[k]);
            row.extend_from_slice(&truth[k]);
            // The last state has no applied control or one-step error yet.
            match r.schedule.get(k) {
                Some(u) if k + 1 < t.states.len() => row.extend_from_slice(u),
                _ => row.extend(std::iter::repeat(f64::NAN).take(m)),
            }
            row.push(t.one_step_errors.get(k).copied().filter(|_| k + 1 < t.states.len()).unwrap_or(f64::NAN));
            row.push(t.accumulated_errors[k]);
            row
        });
        write_table(&out.join(format!("trajectory_{i}.csv")), &header, rows)?;
    }
    let header: Vec<String> = ["step", "median", "q90", "max"].iter().map(|s| s.to_string()).collect();
    write_table(
        &out.join("error_envelope.csv"),
        &header,
        r.envelope.iter().map(|e| vec![e.step as f64, e.median, e.q90, e.max]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), passed: value <= tolerance, value, tolerance }
    }
}

/// Largest Gram size on which the regularizer identities are checked.
const VERIFY_IDENTITY_LIMIT: usize = 2000;

/// Quick invariant suite for the configured system. Never errors on a failed
/// check; the caller decides how to report.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let system = cfg.system()?;
    let mut checks = Vec::new();
    if system.is_autonomous() {
        let run = run_fit_autonomous(cfg)?;
        let scale = run.surrogate.centers().iter().map(kedmd_core::linalg::norm).fold(1.0, f64::max);
        if cfg.lambda == 0.0 {
            checks.push(Check::at_most("interpolation at data sites", run.metrics.site_residual, 1e-8 * scale));
        }
        for x_star in &system.equilibria {
            if run.surrogate.centers().position(x_star).is_some() {
                let (_, drift) = kedmd_core::koopman::check_equilibrium_preservation(&system, &run.surrogate, x_star)?;
                checks.push(Check::at_most(format!("equilibrium {x_star:?} preserved"), drift, 1e-10));
            }
        }
        let centers = run.surrogate.centers();
        if centers.len() <= VERIFY_IDENTITY_LIMIT {
            let mut rng = rng_for(cfg.seed, 0);
            let kernel = run.surrogate.model().kernel();
            let lambda = cfg.lambda.max(1e-3);
            let tol = 1e-8;
            let passed = kedmd_core::rkhs::verify_regularizer_identities(kernel, centers, lambda, 5, tol, &mut rng);
            checks.push(Check {
                name: format!("regularizer identities (lambda = {lambda})"),
                passed: passed.is_ok(),
                value: if passed.is_ok() { 0.0 } else { 1.0 },
                tolerance: tol,
            });
        }
        if let Some(spec) = &system.lyapunov {
            let r = check_decrease(|x| DynamicalSystem::step(&system, x), spec, &run.validation);
            checks.push(Check::at_most("true system decrease (negated min margin)", -r.min_margin, 0.0));
        }
    } else {
        let run = run_fit_control(cfg)?;
        let scale = run.regression.clusters.iter().map(|c| c.h.frobenius_norm()).fold(1.0, f64::max);
        if cfg.lambda == 0.0 {
            checks.push(Check::at_most("interpolation of H* at centers", run.metrics.center_residual, 1e-8 * scale));
        }
        let rejected = run.regression.rejected.len() as f64 / run.metrics.centers as f64;
        checks.push(Check::at_most("rejected cluster fraction", rejected, kedmd_core::control::MAX_REJECTED_FRACTION));
        // Affinity in u holds by construction; confirm it numerically.
        let x = run.surrogate.centers().point(0).to_vec();
        let m = system.control_dim();
        let bound = system.control_bound();
        let (ua, ub) = (vec![bound; m], vec![-bound; m]);
        let mid = vec![0.0; m];
        let (fa, fb, fm) = (run.surrogate.predict(&x, &ua), run.surrogate.predict(&x, &ub), run.surrogate.predict(&x, &mid));
        let affine = fa.iter().zip(&fb).zip(&fm).map(|((a, b), c)| (0.5 * (a + b) - c).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most("affinity in the control", affine, 1e-10 * scale));
    }
    Ok(checks)
}
