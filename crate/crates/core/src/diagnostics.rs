//! Energy/Lyapunov evaluation along trajectories, the discriminant and
//! quadratic-form sign checks behind the operator-case monotonicity proof,
//! residual series extraction, decade-based rate certification, and tail
//! stabilization as a trajectory-convergence proxy.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dot;
use crate::dynamics::{Scaling, SystemSpec};
use crate::integrator::Trajectory;
use crate::norm;

/// A time-indexed scalar observable sampled at trajectory nodes.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len(), "series length mismatch");
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]), "times not increasing");
        Series { times, values }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Parameters of the anchored energies: the damping split η and the anchor
/// point x* (a minimizer in the function case, a zero in the operator case).
#[derive(Debug, Clone)]
pub struct EnergyParams {
    pub eta: f64,
    pub anchor: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("problem provides no anchor point (minimizer/zero)")]
    MissingAnchor,
    #[error("trajectory variant does not match: expected {expected}")]
    VariantMismatch { expected: &'static str },
    #[error("rate certification needs at least two full decades after {window_start}, series ends at {end}")]
    InsufficientDecades { window_start: f64, end: f64 },
    #[error("series and weights have different lengths: {series} vs {weights}")]
    WeightLengthMismatch { series: usize, weights: usize },
    #[error("empty trajectory")]
    EmptyTrajectory,
}

/// Extracts (t, p, u, velocity) at every node.
fn node_states<'a>(
    traj: &'a Trajectory,
    spec: &'a SystemSpec,
) -> impl Iterator<Item = (f64, &'a [f64], &'a [f64], Vec<f64>)> + 'a {
    let d = spec.dim();
    traj.nodes.iter().map(move |n| {
        let (p, u) = n.z.split_at(d);
        let v = spec.velocity(n.t, p, u);
        (n.t, p, u, v)
    })
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// E_η(t) = b(t)(f(y) − inf f) + ½‖η(y−x*) + ẏ‖² + ½η(λ−η)‖y−x*‖² for the
/// Heavy Ball function system.
pub fn energy_function_case(
    traj: &Trajectory,
    spec: &SystemSpec,
    params: &EnergyParams,
) -> Result<Series, DiagnosticsError> {
    let (lambda, b, problem) = match spec {
        SystemSpec::HbfFunction { lambda, b, problem, .. } => (*lambda, b, problem),
        _ => return Err(DiagnosticsError::VariantMismatch { expected: "HbfFunction" }),
    };
    let eta = params.eta;
    let xstar = &params.anchor;
    let mut times = Vec::with_capacity(traj.nodes.len());
    let mut values = Vec::with_capacity(traj.nodes.len());
    for (t, p, _u, v) in node_states(traj, spec) {
        let gap = (problem.value)(p) - problem.inf_value;
        let dev = diff(p, xstar);
        let mixed: Vec<f64> = dev.iter().zip(&v).map(|(d, vi)| eta * d + vi).collect();
        let e = b.value(t) * gap
            + 0.5 * norm(&mixed).powi(2)
            + 0.5 * eta * (lambda - eta) * norm(&dev).powi(2);
        times.push(t);
        values.push(e);
    }
    Ok(Series::new(times, values))
}

/// W(t) = (f(y) − inf f) + ‖ẏ‖²/(2b(t)) for the Heavy Ball function system.
pub fn lyapunov_w(traj: &Trajectory, spec: &SystemSpec) -> Result<Series, DiagnosticsError> {
    let (b, problem) = match spec {
        SystemSpec::HbfFunction { b, problem, .. } => (b, problem),
        _ => return Err(DiagnosticsError::VariantMismatch { expected: "HbfFunction" }),
    };
    let mut times = Vec::with_capacity(traj.nodes.len());
    let mut values = Vec::with_capacity(traj.nodes.len());
    for (t, p, _u, v) in node_states(traj, spec) {
        let gap = (problem.value)(p) - problem.inf_value;
        times.push(t);
        values.push(gap + norm(&v).powi(2) / (2.0 * b.value(t)));
    }
    Ok(Series::new(times, values))
}

/// The four-part operator energy:
/// E¹ = ½‖2η(y−x*) + 2ẏ + μV(y)‖², E² = 2η(λ−η)‖y−x*‖²,
/// E³ = 2ημ⟨y−x*, V(y)⟩, E⁴ = ½μ²‖V(y)‖².
pub fn energy_operator_case(
    traj: &Trajectory,
    spec: &SystemSpec,
    params: &EnergyParams,
) -> Result<(Series, [Series; 4]), DiagnosticsError> {
    let (lambda, mu, problem) = match spec {
        SystemSpec::HbOperator { lambda, mu, problem, .. } => (*lambda, mu, problem),
        _ => return Err(DiagnosticsError::VariantMismatch { expected: "HbOperator" }),
    };
    let eta = params.eta;
    let xstar = &params.anchor;
    let n = traj.nodes.len();
    let mut times = Vec::with_capacity(n);
    let mut total = Vec::with_capacity(n);
    let mut parts: [Vec<f64>; 4] =
        [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for (t, p, _u, v) in node_states(traj, spec) {
        let m = mu.value(t);
        let vp = (problem.apply)(p);
        let dev = diff(p, xstar);
        let e1_vec: Vec<f64> = dev
            .iter()
            .zip(&v)
            .zip(&vp)
            .map(|((d, vi), w)| 2.0 * eta * d + 2.0 * vi + m * w)
            .collect();
        let e1 = 0.5 * norm(&e1_vec).powi(2);
        let e2 = 2.0 * eta * (lambda - eta) * norm(&dev).powi(2);
        let e3 = 2.0 * eta * m * dot(&dev, &vp);
        let e4 = 0.5 * m * m * norm(&vp).powi(2);
        times.push(t);
        total.push(e1 + e2 + e3 + e4);
        parts[0].push(e1);
        parts[1].push(e2);
        parts[2].push(e3);
        parts[3].push(e4);
    }
    let [p1, p2, p3, p4] = parts;
    Ok((
        Series::new(times.clone(), total),
        [
            Series::new(times.clone(), p1),
            Series::new(times.clone(), p2),
            Series::new(times.clone(), p3),
            Series::new(times, p4),
        ],
    ))
}

/// Reduced discriminant Δ_t = 4[(λ − γ/μ)² − (λ − 2γ/μ + μ̇/μ)²] of the
/// ε-parabola controlling operator-energy decrease; when positive, also the
/// roots ε̲_t = ½(λ − γ/μ) − ¼√Δ_t and ε̄_t = ½(λ − γ/μ) + ¼√Δ_t.
pub fn parabola_discriminant(
    t: f64,
    lambda: f64,
    mu: &Scaling,
    gamma: &Scaling,
) -> (f64, Option<(f64, f64)>) {
    let r = gamma.value(t) / mu.value(t);
    let m = mu.derivative(t) / mu.value(t);
    let delta = 4.0 * ((lambda - r).powi(2) - (lambda - 2.0 * r + m).powi(2));
    if delta > 0.0 {
        let mid = 0.5 * (lambda - r);
        let half = 0.25 * delta.sqrt();
        (delta, Some((mid - half, mid + half)))
    } else {
        (delta, None)
    }
}

/// Sign classification of the quadratic form A‖x‖² + 2B⟨x,y⟩ + C‖y‖².
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormSign {
    NonnegativeForm,
    NonpositiveForm,
    Indefinite,
}

/// The form is sign-definite exactly when B² − AC ≤ 0, with the sign of A.
pub fn quadratic_form_sign(a: f64, b: f64, c: f64) -> FormSign {
    if a == 0.0 {
        return FormSign::Indefinite;
    }
    if b * b - a * c <= 0.0 {
        if a > 0.0 {
            FormSign::NonnegativeForm
        } else {
            FormSign::NonpositiveForm
        }
    } else {
        FormSign::Indefinite
    }
}

/// Convergence observables along a run: `f_gap` and `velocity_norm` for the
/// function variants; `operator_norm`, `anchor_inner_product`, and
/// `velocity_norm` for the operator variants.
pub fn residual_series(
    traj: &Trajectory,
    spec: &SystemSpec,
) -> Result<BTreeMap<String, Series>, DiagnosticsError> {
    let mut out = BTreeMap::new();
    let n = traj.nodes.len();
    let mut times = Vec::with_capacity(n);
    match spec {
        SystemSpec::HbfFunction { problem, .. } | SystemSpec::AvdFunction { problem, .. } => {
            let mut gaps = Vec::with_capacity(n);
            let mut vels = Vec::with_capacity(n);
            for (t, p, _u, v) in node_states(traj, spec) {
                times.push(t);
                gaps.push((problem.value)(p) - problem.inf_value);
                vels.push(norm(&v));
            }
            out.insert("f_gap".into(), Series::new(times.clone(), gaps));
            out.insert("velocity_norm".into(), Series::new(times, vels));
        }
        SystemSpec::HbOperator { problem, .. } | SystemSpec::FogdaOperator { problem, .. } => {
            let xstar = problem.zero.clone().ok_or(DiagnosticsError::MissingAnchor)?;
            let mut vnorms = Vec::with_capacity(n);
            let mut inners = Vec::with_capacity(n);
            let mut vels = Vec::with_capacity(n);
            for (t, p, _u, v) in node_states(traj, spec) {
                let vp = (problem.apply)(p);
                times.push(t);
                vnorms.push(norm(&vp));
                inners.push(dot(&diff(p, &xstar), &vp));
                vels.push(norm(&v));
            }
            out.insert("operator_norm".into(), Series::new(times.clone(), vnorms));
            out.insert("anchor_inner_product".into(), Series::new(times.clone(), inners));
            out.insert("velocity_norm".into(), Series::new(times, vels));
        }
    }
    Ok(out)
}

/// Outcome of a decade-maxima decay certification.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RateCertificate {
    /// The claimed decay power: the certified quantity is t^exponent·value.
    pub exponent: f64,
    /// (decade start, max of weighted value over the decade), per full decade.
    pub decade_maxima: Vec<(f64, f64)>,
    /// Maxima nonincreasing within relative slack.
    pub nonincreasing: bool,
    /// Last decade maximum < 0.9 × first: separates o(·) from plain O(·).
    pub strict_decay: bool,
    pub pass: bool,
    pub slack: f64,
}

const RATE_SLACK: f64 = 0.05;
const STRICT_DECAY_FACTOR: f64 = 0.9;

/// Certifies value(t) = o(t^−exponent) on [window_start, end] by checking
/// that per-decade maxima of t^exponent·value are nonincreasing and strictly
/// lower in the last decade than in the first.
pub fn certify_rate(
    series: &Series,
    exponent: f64,
    window_start: f64,
) -> Result<RateCertificate, DiagnosticsError> {
    let weights: Vec<f64> = series.times.iter().map(|t| t.powf(exponent)).collect();
    certify_rate_weighted(series, &weights, exponent, window_start)
}

/// Same certification with caller-supplied weights w(t) in place of
/// t^exponent (e.g. analytic ∫b integrals); `exponent` is kept as a label.
pub fn certify_rate_weighted(
    series: &Series,
    weights: &[f64],
    exponent: f64,
    window_start: f64,
) -> Result<RateCertificate, DiagnosticsError> {
    if weights.len() != series.len() {
        return Err(DiagnosticsError::WeightLengthMismatch {
            series: series.len(),
            weights: weights.len(),
        });
    }
    let end = *series.times.last().ok_or(DiagnosticsError::EmptyTrajectory)?;
    // Full decades only: decade k is [window_start·10^k, window_start·10^(k+1)].
    let n_decades = ((end / window_start).log10() + 1e-12).floor() as i32;
    if n_decades < 2 {
        return Err(DiagnosticsError::InsufficientDecades { window_start, end });
    }
    let mut decade_maxima = Vec::with_capacity(n_decades as usize);
    for k in 0..n_decades {
        let lo = window_start * 10f64.powi(k);
        let hi = window_start * 10f64.powi(k + 1);
        let mut m = f64::NEG_INFINITY;
        for ((&t, &v), &w) in series.times.iter().zip(&series.values).zip(weights) {
            if t >= lo && t <= hi {
                m = m.max(w * v);
            }
        }
        decade_maxima.push((lo, m));
    }
    let nonincreasing = decade_maxima
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 * (1.0 + RATE_SLACK) + f64::MIN_POSITIVE);
    let first = decade_maxima.first().unwrap().1;
    let last = decade_maxima.last().unwrap().1;
    let strict_decay = last < STRICT_DECAY_FACTOR * first;
    Ok(RateCertificate {
        exponent,
        decade_maxima,
        nonincreasing,
        strict_decay,
        pass: nonincreasing && strict_decay,
        slack: RATE_SLACK,
    })
}

/// ‖p(t_c) − p(t_end)‖ at each checkpoint: a finite-dimensional proxy for
/// trajectory convergence.
pub fn tail_stabilization(traj: &Trajectory, dim: usize, checkpoints: &[f64]) -> Series {
    let end = traj.nodes.last().expect("nonempty trajectory");
    let p_end = &end.z[..dim];
    let mut times = Vec::with_capacity(checkpoints.len());
    let mut values = Vec::with_capacity(checkpoints.len());
    for &tc in checkpoints {
        let z = traj.dense_eval(tc).expect("checkpoint inside range");
        times.push(tc);
        values.push(norm(&diff(&z[..dim], p_end)));
    }
    Series::new(times, values)
}

/// First time after which γ/μ and μ̇/μ sit within 1% of their limits; the
/// monotone-case energy is only guaranteed to decrease beyond some
/// non-constructive threshold, so certification starts here.
pub fn operator_burn_in(mu: &Scaling, gamma: &Scaling, t0: f64, horizon: f64) -> f64 {
    // Limits for the closed-form families in scope: μ̇/μ tends to its infimum
    // and γ/μ stabilizes (finite by assumption when this is called).
    let m_lim = mu.log_deriv_inf(t0);
    let far = t0 + 0.99 * (horizon - t0);
    let r_lim = gamma.value(far) / mu.value(far);
    let n = 400;
    let within = |t: f64| {
        let r = gamma.value(t) / mu.value(t);
        let m = mu.derivative(t) / mu.value(t);
        let r_tol = 0.01 * r_lim.abs().max(0.01);
        let m_tol = 0.01 * m_lim.abs().max(0.01);
        (r - r_lim).abs() <= r_tol && (m - m_lim).abs() <= m_tol
    };
    for i in 0..=n {
        let t = t0 + (horizon - t0) * i as f64 / n as f64;
        if within(t) {
            return t;
        }
    }
    horizon
}
