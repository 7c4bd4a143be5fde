//! Configuration-driven experiment runner.
//!
//! One JSON config describes one experiment. Subcommands: `simulate` (CSV
//! trajectory + JSON diagnostics), `compare` (twin-run equivalence report),
//! `validate` (assumption report only), and `certify` (simulate + rate
//! certificates only). Exit codes: 0 success, 2 config error, 3 integration
//! failure, 4 mapping mismatch.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::diagnostics::{
    self, certify_rate_weighted, energy_function_case, energy_operator_case, operator_burn_in,
    residual_series, EnergyParams, RateCertificate, Series,
};
use crate::dynamics::{
    validate_assumption_function, validate_assumption_operator, AssumptionReport, Scaling,
    SystemSpec, Variant,
};
use crate::integrator::{integrate, IntegrateError, IntegratorControls, Trajectory};
use crate::norm;
use crate::problems::{build_operator_problem, build_scalar_problem, ProblemParams};
use crate::rescaling::{
    equivalence_check, map_initial_conditions, special_b, special_mu_gamma, MapDirection, TimeMap,
};

/// Top-level experiment description, one per invocation.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandTag,
    pub system: SystemConfig,
    #[serde(default = "default_controls")]
    pub integrator: IntegratorControls,
    #[serde(default)]
    pub outputs: OutputsConfig,
    /// Rate certificates to compute (simulate/certify).
    #[serde(default)]
    pub diagnostics: Vec<RateRequest>,
    #[serde(default)]
    pub seed: u64,
}

fn default_controls() -> IntegratorControls {
    IntegratorControls::dormand_prince(1e-9, 1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandTag {
    Simulate,
    Compare,
    Validate,
    Certify,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub variant: Variant,
    pub problem: ProblemConfig,
    /// Friction coefficient (Heavy Ball variants).
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Damping exponent (vanishing-damping variants; also sizes the twin in
    /// compare mode).
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Gradient scaling b(t) (Heavy Ball function variant).
    #[serde(default)]
    pub scaling: Option<Scaling>,
    /// Correction scaling μ(t) (Heavy Ball operator variant).
    #[serde(default)]
    pub mu: Option<Scaling>,
    /// Operator scaling γ(t) (Heavy Ball operator variant).
    #[serde(default)]
    pub gamma: Option<Scaling>,
    pub start_time: f64,
    pub horizon: f64,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    /// Compare mode only: explicit Heavy Ball twin data to check against the
    /// auto-constructed twin (mismatch beyond 1e-12 exits 4), plus λ for the
    /// function-case twin and an optional perturbed map α for controls.
    #[serde(default)]
    pub twin: Option<TwinConfig>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub id: String,
    pub dim: usize,
    #[serde(default)]
    pub params: ProblemParams,
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinConfig {
    /// λ of the function-case Heavy Ball twin (defaults to 1).
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Explicit twin initial velocity, checked against the mapped one.
    #[serde(default)]
    pub y1: Option<Vec<f64>>,
    /// Perturbs the α used by the time map (negative-control runs).
    #[serde(default)]
    pub map_alpha: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    /// Number of CSV sample rows (≥ 2); also the compare sample count.
    pub sample_count: usize,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig { sample_count: 200 }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateRequest {
    /// One of the residual series names: `f_gap`, `velocity_norm`,
    /// `operator_norm`, `anchor_inner_product`.
    pub series: String,
    pub exponent: f64,
    pub window_start: f64,
    #[serde(default)]
    pub weight: WeightKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// t^exponent.
    #[default]
    Power,
    /// ∫_{(t+t₀)/2}^t b(r) dr, computed from the analytic antiderivative.
    IntegralB,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("integration failed: {message} (last good time {last_time})")]
    Integration { message: String, last_time: f64 },
    #[error("mapping mismatch: {0}")]
    Mapping(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Integration { .. } => 3,
            CliError::Mapping(_) => 4,
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

/// Builds the validated system from its config description.
pub fn build_system(sys: &SystemConfig, seed: u64) -> Result<SystemSpec, CliError> {
    let p = &sys.problem;
    match sys.variant {
        Variant::HbfFunction => {
            let lambda = sys.lambda.ok_or(CliError::Config("hbf_function needs lambda".into()))?;
            let b = sys
                .scaling
                .clone()
                .ok_or(CliError::Config("hbf_function needs scaling".into()))?;
            let problem = build_scalar_problem(&p.id, p.dim, &p.params, seed).map_err(config_err)?;
            SystemSpec::hbf_function(lambda, b, problem, sys.start_time, sys.y0.clone(), sys.y1.clone())
                .map_err(config_err)
        }
        Variant::AvdFunction => {
            let alpha = sys.alpha.ok_or(CliError::Config("avd_function needs alpha".into()))?;
            let problem = build_scalar_problem(&p.id, p.dim, &p.params, seed).map_err(config_err)?;
            SystemSpec::avd_function(alpha, problem, sys.start_time, sys.y0.clone(), sys.y1.clone())
                .map_err(config_err)
        }
        Variant::HbOperator => {
            let lambda = sys.lambda.ok_or(CliError::Config("hb_operator needs lambda".into()))?;
            let mu = sys.mu.clone().ok_or(CliError::Config("hb_operator needs mu".into()))?;
            let gamma =
                sys.gamma.clone().ok_or(CliError::Config("hb_operator needs gamma".into()))?;
            let problem =
                build_operator_problem(&p.id, p.dim, &p.params, seed).map_err(config_err)?;
            SystemSpec::hb_operator(
                lambda,
                mu,
                gamma,
                problem,
                sys.start_time,
                sys.y0.clone(),
                sys.y1.clone(),
            )
            .map_err(config_err)
        }
        Variant::FogdaOperator => {
            let alpha = sys.alpha.ok_or(CliError::Config("fogda_operator needs alpha".into()))?;
            let problem =
                build_operator_problem(&p.id, p.dim, &p.params, seed).map_err(config_err)?;
            SystemSpec::fogda_operator(alpha, problem, sys.start_time, sys.y0.clone(), sys.y1.clone())
                .map_err(config_err)
        }
    }
}

fn check_config(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if !(cfg.system.horizon > cfg.system.start_time) {
        return Err(CliError::Config(format!(
            "horizon {} must exceed start_time {}",
            cfg.system.horizon, cfg.system.start_time
        )));
    }
    if cfg.outputs.sample_count < 2 {
        return Err(CliError::Config("sample_count must be at least 2".into()));
    }
    Ok(())
}

fn run_integration(
    spec: &SystemSpec,
    horizon: f64,
    controls: &IntegratorControls,
) -> Result<Trajectory, CliError> {
    integrate(&spec.flat_rhs(), spec.start_time(), &spec.flat_initial_state(), horizon, controls)
        .map_err(|e| match e {
            IntegrateError::MaxStepsExceeded { last_time, .. }
            | IntegrateError::StepSizeUnderflow { last_time, .. } => {
                CliError::Integration { message: e.to_string(), last_time }
            }
            other => CliError::Config(other.to_string()),
        })
}

/// Anchor point used by the energy columns and inner-product residuals.
fn anchor_of(spec: &SystemSpec) -> Option<Vec<f64>> {
    match spec {
        SystemSpec::HbfFunction { problem, .. } | SystemSpec::AvdFunction { problem, .. } => {
            problem.minimizer.clone()
        }
        SystemSpec::HbOperator { problem, .. } | SystemSpec::FogdaOperator { problem, .. } => {
            problem.zero.clone()
        }
    }
}

/// Default η: midpoint between sup ḃ/b and λ in the function case,
/// λ − (λ−L)/2 in the operator case (L estimated at the horizon).
fn default_eta(spec: &SystemSpec, horizon: f64) -> f64 {
    match spec {
        SystemSpec::HbfFunction { lambda, b, start_time, .. } => {
            0.5 * (b.log_deriv_sup(*start_time) + lambda)
        }
        SystemSpec::HbOperator { lambda, mu, gamma, .. } => {
            let l = gamma.value(horizon) / mu.value(horizon);
            lambda - 0.5 * (lambda - l)
        }
        _ => 0.0,
    }
}

/// Per-variant scalar columns for the trajectory CSV: (residual, energy,
/// W_or_total) at one recovered state.
fn csv_scalars(
    spec: &SystemSpec,
    eta: f64,
    anchor: Option<&[f64]>,
    t: f64,
    p: &[f64],
    v: &[f64],
) -> (f64, f64, f64) {
    match spec {
        SystemSpec::HbfFunction { lambda, b, problem, .. } => {
            let gap = (problem.value)(p) - problem.inf_value;
            let w = gap + norm(v).powi(2) / (2.0 * b.value(t));
            let energy = match anchor {
                Some(xs) => {
                    let dev: Vec<f64> = p.iter().zip(xs).map(|(a, b)| a - b).collect();
                    let mixed: Vec<f64> = dev.iter().zip(v).map(|(d, vi)| eta * d + vi).collect();
                    b.value(t) * gap
                        + 0.5 * norm(&mixed).powi(2)
                        + 0.5 * eta * (lambda - eta) * norm(&dev).powi(2)
                }
                None => f64::NAN,
            };
            (gap, energy, w)
        }
        SystemSpec::AvdFunction { problem, .. } => {
            // Mechanical energy (f − inf) + ½‖ẋ‖², nonincreasing under the
            // vanishing damping; doubles as both energy columns.
            let gap = (problem.value)(p) - problem.inf_value;
            let e = gap + 0.5 * norm(v).powi(2);
            (gap, e, e)
        }
        SystemSpec::HbOperator { lambda, mu, problem, .. } => {
            let vp = (problem.apply)(p);
            let res = norm(&vp);
            let total = match anchor {
                Some(xs) => {
                    let m = mu.value(t);
                    let dev: Vec<f64> = p.iter().zip(xs).map(|(a, b)| a - b).collect();
                    let e1v: Vec<f64> = dev
                        .iter()
                        .zip(v)
                        .zip(&vp)
                        .map(|((d, vi), w)| 2.0 * eta * d + 2.0 * vi + m * w)
                        .collect();
                    0.5 * norm(&e1v).powi(2)
                        + 2.0 * eta * (lambda - eta) * norm(&dev).powi(2)
                        + 2.0 * eta * m * crate::dot(&dev, &vp)
                        + 0.5 * m * m * res * res
                }
                None => f64::NAN,
            };
            (res, total, total)
        }
        SystemSpec::FogdaOperator { problem, .. } => {
            // Kinetic + field magnitude, a simple decay observable.
            let vp = (problem.apply)(p);
            let res = norm(&vp);
            let e = 0.5 * norm(v).powi(2) + 0.5 * res * res;
            (res, e, e)
        }
    }
}

fn write_trajectory_csv(
    path: &Path,
    spec: &SystemSpec,
    traj: &Trajectory,
    horizon: f64,
    sample_count: usize,
    eta: f64,
    anchor: Option<&[f64]>,
) -> Result<(), CliError> {
    let d = spec.dim();
    let mut out = String::from("t");
    for i in 0..d {
        write!(out, ",p_{i}").unwrap();
    }
    for i in 0..d {
        write!(out, ",u_{i}").unwrap();
    }
    for i in 0..d {
        write!(out, ",v_{i}").unwrap();
    }
    out.push_str(",residual,energy,W_or_total\n");
    let t0 = traj.start_time();
    for k in 0..sample_count {
        let t = t0 + (horizon - t0) * k as f64 / (sample_count - 1) as f64;
        let z = traj.dense_eval(t).map_err(|e| CliError::Config(e.to_string()))?;
        let (p, u) = z.split_at(d);
        let v = spec.velocity(t, p, u);
        let (res, energy, w) = csv_scalars(spec, eta, anchor, t, p, &v);
        write!(out, "{t}").unwrap();
        for x in p.iter().chain(u.iter()).chain(v.iter()) {
            write!(out, ",{x}").unwrap();
        }
        writeln!(out, ",{res},{energy},{w}").unwrap();
    }
    std::fs::write(path, out).map_err(config_err)
}

fn assumption_of(spec: &SystemSpec, horizon: f64) -> Option<AssumptionReport> {
    match spec {
        SystemSpec::HbfFunction { lambda, b, start_time, .. } => {
            Some(validate_assumption_function(*lambda, b, *start_time, horizon))
        }
        SystemSpec::HbOperator { lambda, mu, gamma, start_time, .. } => {
            Some(validate_assumption_operator(*lambda, mu, gamma, *start_time, horizon))
        }
        _ => None,
    }
}

fn rate_certificates(
    spec: &SystemSpec,
    traj: &Trajectory,
    requests: &[RateRequest],
) -> Result<BTreeMap<String, RateCertificate>, CliError> {
    if requests.is_empty() {
        return Ok(BTreeMap::new());
    }
    let series = residual_series(traj, spec).map_err(config_err)?;
    let mut out = BTreeMap::new();
    for req in requests {
        let s = series
            .get(&req.series)
            .ok_or_else(|| CliError::Config(format!("unknown series `{}`", req.series)))?;
        let cert = match req.weight {
            WeightKind::Power => {
                diagnostics::certify_rate(s, req.exponent, req.window_start).map_err(config_err)?
            }
            WeightKind::IntegralB => {
                let (b, t0) = match spec {
                    SystemSpec::HbfFunction { b, start_time, .. } => (b, *start_time),
                    _ => {
                        return Err(CliError::Config(
                            "integral_b weights need the Heavy Ball function variant".into(),
                        ))
                    }
                };
                let weights: Vec<f64> = s
                    .times
                    .iter()
                    .map(|&t| b.antiderivative(t) - b.antiderivative(0.5 * (t + t0)))
                    .collect();
                certify_rate_weighted(s, &weights, req.exponent, req.window_start)
                    .map_err(config_err)?
            }
        };
        out.insert(format!("{}_exp{}", req.series, req.exponent), cert);
    }
    Ok(out)
}

#[derive(serde::Serialize)]
struct SimulateReport {
    command: CommandTag,
    variant: Variant,
    seed: u64,
    final_time: f64,
    final_residual: f64,
    node_count: usize,
    assumption: Option<AssumptionReport>,
    burn_in: Option<f64>,
    energy_nonincreasing: Option<bool>,
    certificates: BTreeMap<String, RateCertificate>,
}

/// `simulate` and `certify`: integrate, write `trajectory.csv` (simulate
/// only) and `report.json`.
pub fn run_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    check_config(cfg)?;
    let spec = build_system(&cfg.system, cfg.seed)?;
    let horizon = cfg.system.horizon;
    std::fs::create_dir_all(out_dir).map_err(config_err)?;
    let traj = match run_integration(&spec, horizon, &cfg.integrator) {
        Ok(t) => t,
        Err(e) => {
            if let CliError::Integration { message, last_time } = &e {
                let partial = serde_json::json!({
                    "command": cfg.command,
                    "error": message,
                    "last_good_time": last_time,
                });
                let _ = std::fs::write(
                    out_dir.join("report.json"),
                    serde_json::to_string_pretty(&partial).unwrap(),
                );
            }
            return Err(e);
        }
    };

    let eta = default_eta(&spec, horizon);
    let anchor = anchor_of(&spec);
    if cfg.command == CommandTag::Simulate {
        write_trajectory_csv(
            &out_dir.join("trajectory.csv"),
            &spec,
            &traj,
            horizon,
            cfg.outputs.sample_count,
            eta,
            anchor.as_deref(),
        )?;
    }

    let burn_in = match &spec {
        SystemSpec::HbOperator { mu, gamma, start_time, .. } => {
            Some(operator_burn_in(mu, gamma, *start_time, horizon))
        }
        _ => None,
    };
    let energy_nonincreasing = energy_monotone_flag(&spec, &traj, eta, anchor.as_deref(), burn_in);
    let certificates = rate_certificates(&spec, &traj, &cfg.diagnostics)?;

    let d = spec.dim();
    let last = traj.nodes.last().expect("nonempty trajectory");
    let (p, u) = last.z.split_at(d);
    let v = spec.velocity(last.t, p, u);
    let (final_residual, _, _) = csv_scalars(&spec, eta, anchor.as_deref(), last.t, p, &v);

    let report = SimulateReport {
        command: cfg.command,
        variant: spec.variant(),
        seed: cfg.seed,
        final_time: last.t,
        final_residual,
        node_count: traj.nodes.len(),
        assumption: assumption_of(&spec, horizon),
        burn_in,
        energy_nonincreasing,
        certificates,
    };
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report).unwrap())
        .map_err(config_err)
}

/// Node-to-node monotonicity of the variant's Lyapunov energy, when defined.
fn energy_monotone_flag(
    spec: &SystemSpec,
    traj: &Trajectory,
    eta: f64,
    anchor: Option<&[f64]>,
    burn_in: Option<f64>,
) -> Option<bool> {
    let anchor = anchor?;
    let params = EnergyParams { eta, anchor: anchor.to_vec() };
    let series = match spec {
        SystemSpec::HbfFunction { .. } => energy_function_case(traj, spec, &params).ok()?,
        SystemSpec::HbOperator { .. } => energy_operator_case(traj, spec, &params).ok()?.0,
        _ => lyapunov_like_series(spec, traj)?,
    };
    let from = burn_in.unwrap_or(f64::NEG_INFINITY);
    let mut ok = true;
    for k in 1..series.len() {
        if series.times[k - 1] < from {
            continue;
        }
        if series.values[k] - series.values[k - 1] > 1e-9 * (1.0 + series.values[k - 1].abs()) {
            ok = false;
            break;
        }
    }
    Some(ok)
}

/// Mechanical-energy series for the vanishing-damping variants.
fn lyapunov_like_series(spec: &SystemSpec, traj: &Trajectory) -> Option<Series> {
    let d = spec.dim();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for n in &traj.nodes {
        let (p, u) = n.z.split_at(d);
        let v = spec.velocity(n.t, p, u);
        let e = match spec {
            SystemSpec::AvdFunction { problem, .. } => {
                (problem.value)(p) - problem.inf_value + 0.5 * norm(&v).powi(2)
            }
            SystemSpec::FogdaOperator { problem, .. } => {
                0.5 * norm(&v).powi(2) + 0.5 * norm(&(problem.apply)(p)).powi(2)
            }
            _ => return None,
        };
        times.push(n.t);
        values.push(e);
    }
    Some(Series::new(times, values))
}

#[derive(serde::Serialize)]
struct CompareReport {
    command: CommandTag,
    map_alpha: f64,
    twin_lambda: f64,
    s0: f64,
    t0: f64,
    heavy_horizon: f64,
    max_deviation: f64,
    velocity_max_deviation: f64,
    sample_count: usize,
}

/// `compare`: builds the Heavy Ball twin of the configured vanishing-damping
/// system, runs both, and reports pointwise deviations.
pub fn run_compare(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    check_config(cfg)?;
    let vanishing = build_system(&cfg.system, cfg.seed)?;
    let alpha = cfg.system.alpha.ok_or(CliError::Config("compare needs alpha".into()))?;
    let s0 = cfg.system.start_time;
    let t0 = 0.0;
    let twin_cfg = cfg.system.twin.clone().unwrap_or_default();

    // Twin construction per variant.
    let (heavy, map) = match vanishing.variant() {
        Variant::AvdFunction => {
            let lambda = twin_cfg.lambda.unwrap_or(1.0);
            let b = special_b(alpha, lambda, s0, t0).map_err(config_err)?;
            let map = TimeMap::function_case(alpha, lambda, s0, t0).map_err(config_err)?;
            let (y0, y1) = map_initial_conditions(
                &map,
                MapDirection::VanishingToHeavy,
                &cfg.system.y0,
                &cfg.system.y1,
            );
            check_twin_velocity(&twin_cfg, &y1)?;
            let problem =
                build_scalar_problem(&cfg.system.problem.id, cfg.system.problem.dim, &cfg.system.problem.params, cfg.seed)
                    .map_err(config_err)?;
            let spec = SystemSpec::hbf_function(lambda, b, problem, t0, y0, twin_cfg.y1.clone().unwrap_or(y1))
                .map_err(config_err)?;
            (spec, map)
        }
        Variant::FogdaOperator => {
            let (mu, gamma, lambda) = special_mu_gamma(alpha, s0, t0).map_err(config_err)?;
            let map = TimeMap::operator_case(alpha, s0, t0).map_err(config_err)?;
            let (y0, y1) = map_initial_conditions(
                &map,
                MapDirection::VanishingToHeavy,
                &cfg.system.y0,
                &cfg.system.y1,
            );
            check_twin_velocity(&twin_cfg, &y1)?;
            let problem = build_operator_problem(
                &cfg.system.problem.id,
                cfg.system.problem.dim,
                &cfg.system.problem.params,
                cfg.seed,
            )
            .map_err(config_err)?;
            let spec = SystemSpec::hb_operator(lambda, mu, gamma, problem, t0, y0, twin_cfg.y1.clone().unwrap_or(y1))
                .map_err(config_err)?;
            (spec, map)
        }
        _ => {
            return Err(CliError::Config(
                "compare takes the vanishing-damping side (avd_function or fogda_operator)".into(),
            ))
        }
    };

    let heavy_horizon = map.tau(cfg.system.horizon).map_err(config_err)?;
    let traj_v = run_integration(&vanishing, cfg.system.horizon, &cfg.integrator)?;
    let traj_h = run_integration(&heavy, heavy_horizon, &cfg.integrator)?;

    // Optionally re-map with a perturbed α (negative control).
    let eval_map = match twin_cfg.map_alpha {
        Some(a) => match map.case {
            crate::rescaling::MapCase::FunctionCase => {
                TimeMap::function_case(a, map.lambda, s0, t0).map_err(config_err)?
            }
            crate::rescaling::MapCase::OperatorCase => {
                TimeMap::operator_case(a, s0, t0).map_err(config_err)?
            }
        },
        None => map.clone(),
    };
    let report = equivalence_check(
        &traj_h,
        &heavy,
        &traj_v,
        &vanishing,
        &eval_map,
        cfg.outputs.sample_count,
    )
    .map_err(|e| CliError::Mapping(e.to_string()))?;

    std::fs::create_dir_all(out_dir).map_err(config_err)?;
    let mut csv = String::from("s,t,deviation,velocity_deviation\n");
    for (i, &s) in report.sample_times.iter().enumerate() {
        let t = eval_map.tau(s).map_err(config_err)?;
        writeln!(csv, "{s},{t},{},{}", report.deviations[i], report.velocity_deviations[i])
            .unwrap();
    }
    std::fs::write(out_dir.join("equivalence.csv"), csv).map_err(config_err)?;

    let summary = CompareReport {
        command: cfg.command,
        map_alpha: eval_map.alpha,
        twin_lambda: map.lambda,
        s0,
        t0,
        heavy_horizon,
        max_deviation: report.max_deviation,
        velocity_max_deviation: report.velocity_max_deviation,
        sample_count: report.sample_times.len(),
    };
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&summary).unwrap())
        .map_err(config_err)
}

fn check_twin_velocity(twin: &TwinConfig, mapped: &[f64]) -> Result<(), CliError> {
    if let Some(given) = &twin.y1 {
        if given.len() != mapped.len() {
            return Err(CliError::Mapping("twin y1 dimension mismatch".into()));
        }
        let dev = norm(&given.iter().zip(mapped).map(|(a, b)| a - b).collect::<Vec<_>>());
        if dev > 1e-12 {
            return Err(CliError::Mapping(format!(
                "twin y1 deviates from the mapped initial velocity by {dev}"
            )));
        }
    }
    Ok(())
}

/// `validate`: assumption report only, no integration.
pub fn run_validate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    check_config(cfg)?;
    let spec = build_system(&cfg.system, cfg.seed)?;
    let report = assumption_of(&spec, cfg.system.horizon).ok_or(CliError::Config(
        "validate needs a Heavy Ball variant (hbf_function or hb_operator)".into(),
    ))?;
    std::fs::create_dir_all(out_dir).map_err(config_err)?;
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report).unwrap())
        .map_err(config_err)
}

/// Dispatches a parsed config; returns the process exit code.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path) -> i32 {
    let result = match cfg.command {
        CommandTag::Simulate | CommandTag::Certify => run_simulate(cfg, out_dir),
        CommandTag::Compare => run_compare(cfg, out_dir),
        CommandTag::Validate => run_validate(cfg, out_dir),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[derive(Parser)]
#[command(name = "hbflow", about = "Inertial dynamics experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(clap::Subcommand)]
enum CliCommand {
    /// Integrate a system and write trajectory.csv + report.json.
    Simulate(RunArgs),
    /// Run a vanishing-damping system against its Heavy Ball twin.
    Compare(RunArgs),
    /// Check the parameter assumptions without integrating.
    Validate(RunArgs),
    /// Integrate and emit rate certificates only.
    Certify(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Entry point for the binary; returns the process exit code.
pub fn cli_main() -> i32 {
    let cli = Cli::parse();
    let (args, expected) = match &cli.command {
        CliCommand::Simulate(a) => (a, CommandTag::Simulate),
        CliCommand::Compare(a) => (a, CommandTag::Compare),
        CliCommand::Validate(a) => (a, CommandTag::Validate),
        CliCommand::Certify(a) => (a, CommandTag::Certify),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read config {}: {e}", args.config.display());
            return 2;
        }
    };
    let mut cfg: ExperimentConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if cfg.command != expected {
        eprintln!("config command tag does not match the `{:?}` subcommand", expected);
        return 2;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    execute(&cfg, &args.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn avd_config(command: CommandTag) -> ExperimentConfig {
        ExperimentConfig {
            command,
            system: SystemConfig {
                variant: Variant::AvdFunction,
                problem: ProblemConfig {
                    id: "quadratic".into(),
                    dim: 2,
                    params: ProblemParams::default(),
                },
                lambda: None,
                alpha: Some(4.0),
                scaling: None,
                mu: None,
                gamma: None,
                start_time: 1.0,
                horizon: 20.0,
                y0: vec![1.0, -0.5],
                y1: vec![0.0, 0.0],
                twin: None,
            },
            integrator: default_controls(),
            outputs: OutputsConfig { sample_count: 100 },
            diagnostics: vec![],
            seed: 0,
        }
    }

    #[test]
    fn simulate_writes_csv_with_contracted_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = avd_config(CommandTag::Simulate);
        run_simulate(&cfg, dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,p_0,p_1,u_0,u_1,v_0,v_1,residual,energy,W_or_total"
        );
        assert_eq!(lines.count(), 100);
        let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&report).unwrap();
        assert_eq!(v["variant"], "avd_function");
        assert!(v["final_residual"].as_f64().unwrap() >= 0.0);
    }

    #[test]
    fn misspelled_variant_is_a_config_error() {
        let text = r#"{
            "command": "simulate",
            "system": {
                "variant": "avd_functoin",
                "problem": {"id": "quadratic", "dim": 1},
                "alpha": 4.0, "start_time": 1.0, "horizon": 5.0,
                "y0": [1.0], "y1": [0.0]
            }
        }"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
    }

    #[test]
    fn compare_auto_twin_function_case() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = avd_config(CommandTag::Compare);
        cfg.system.horizon = 10.0;
        run_compare(&cfg, dir.path()).unwrap();
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("report.json")).unwrap(),
        )
        .unwrap();
        assert!(report["max_deviation"].as_f64().unwrap() <= 1e-5);
        let csv = std::fs::read_to_string(dir.path().join("equivalence.csv")).unwrap();
        assert!(csv.starts_with("s,t,deviation,velocity_deviation\n"));
    }

    #[test]
    fn compare_mismatched_twin_velocity_is_exit_4() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = avd_config(CommandTag::Compare);
        cfg.system.twin = Some(TwinConfig {
            lambda: Some(1.0),
            y1: Some(vec![5.0, 5.0]),
            map_alpha: None,
        });
        let err = run_compare(&cfg, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn validate_reports_pass() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            command: CommandTag::Validate,
            system: SystemConfig {
                variant: Variant::HbfFunction,
                problem: ProblemConfig {
                    id: "quadratic".into(),
                    dim: 1,
                    params: ProblemParams::default(),
                },
                lambda: Some(1.0),
                alpha: None,
                scaling: Some(Scaling::Exponential { kappa: 1.0, rho: 0.5 }),
                mu: None,
                gamma: None,
                start_time: 0.0,
                horizon: 10.0,
                y0: vec![1.0],
                y1: vec![0.0],
                twin: None,
            },
            integrator: default_controls(),
            outputs: OutputsConfig::default(),
            diagnostics: vec![],
            seed: 0,
        };
        run_validate(&cfg, dir.path()).unwrap();
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report["pass"], true);
    }

    #[test]
    fn identical_configs_are_byte_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg = avd_config(CommandTag::Simulate);
        run_simulate(&cfg, d1.path()).unwrap();
        run_simulate(&cfg, d2.path()).unwrap();
        for f in ["trajectory.csv", "report.json"] {
            let a = std::fs::read(d1.path().join(f)).unwrap();
            let b = std::fs::read(d2.path().join(f)).unwrap();
            assert_eq!(a, b, "{f} differs between runs");
        }
    }
}
