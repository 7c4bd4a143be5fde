//! First-order fields for the four inertial systems and validation of the
//! standing parameter assumptions.
//!
//! Each second-order system is integrated through a two-variable reduction
//! `(p, u)`. The meaning of `u` is variant specific; `velocity` recovers the
//! physical velocity so diagnostics never re-derive it:
//!
//! * `HBF_function`:   ṗ = u − λp,               u̇ = −b(t)∇f(p),   ẏ = u − λp
//! * `AVD_function`:   ṗ = u,                    u̇ = −(α/s)u − ∇f(p), ẋ = u
//! * `HB_operator`:    ṗ = u − λp − μ(t)V(p),    u̇ = (μ̇(t) − γ(t))V(p)
//! * `FOGDA_operator`: ṗ = u − V(p),             u̇ = −(α/s)u + (α/2s)V(p)

use std::collections::BTreeMap;

use thiserror::Error;

use crate::problems::{OperatorProblem, ScalarProblem};

/// A positive, differentiable time scaling with analytic derivative.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Scaling {
    /// b(t) = κ·exp(ρt)
    Exponential { kappa: f64, rho: f64 },
    /// b(t) = κ·t^ρ (needs t ≥ t₀ > 0 when ρ > 0)
    Polynomial { kappa: f64, rho: f64 },
    /// b(t) = (λs₀/(α−1))²·exp(2λ(t−t₀)/(α−1)); the scaling that turns the
    /// Heavy Ball function system into the vanishing-damping one
    SpecialFunctionCase { alpha: f64, lambda: f64, s0: f64, t0: f64 },
    /// μ(t) = γ(t) = (2s₀/α)·exp(2(t−t₀)/α); the operator-case analogue
    SpecialOperatorCase { alpha: f64, s0: f64, t0: f64 },
    /// b(t) = κ
    Constant { kappa: f64 },
}

impl Scaling {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Scaling::Exponential { kappa, rho } => kappa * (rho * t).exp(),
            Scaling::Polynomial { kappa, rho } => kappa * t.powf(rho),
            Scaling::SpecialFunctionCase { alpha, lambda, s0, t0 } => {
                let c = lambda * s0 / (alpha - 1.0);
                c * c * (2.0 * lambda * (t - t0) / (alpha - 1.0)).exp()
            }
            Scaling::SpecialOperatorCase { alpha, s0, t0 } => {
                2.0 * s0 / alpha * (2.0 * (t - t0) / alpha).exp()
            }
            Scaling::Constant { kappa } => kappa,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Scaling::Exponential { rho, .. } => rho * self.value(t),
            Scaling::Polynomial { kappa, rho } => {
                if rho == 0.0 {
                    0.0
                } else {
                    kappa * rho * t.powf(rho - 1.0)
                }
            }
            Scaling::SpecialFunctionCase { alpha, lambda, .. } => {
                2.0 * lambda / (alpha - 1.0) * self.value(t)
            }
            Scaling::SpecialOperatorCase { alpha, .. } => 2.0 / alpha * self.value(t),
            Scaling::Constant { .. } => 0.0,
        }
    }

    /// sup over [t₀, ∞) of ḃ/b, in closed form.
    pub fn log_deriv_sup(&self, t0: f64) -> f64 {
        match *self {
            Scaling::Exponential { rho, .. } => rho,
            Scaling::Polynomial { rho, .. } => {
                if rho == 0.0 {
                    0.0
                } else {
                    rho / t0
                }
            }
            Scaling::SpecialFunctionCase { alpha, lambda, .. } => 2.0 * lambda / (alpha - 1.0),
            Scaling::SpecialOperatorCase { alpha, .. } => 2.0 / alpha,
            Scaling::Constant { .. } => 0.0,
        }
    }

    /// inf over [t₀, ∞) of ḃ/b, in closed form.
    pub fn log_deriv_inf(&self, _t0: f64) -> f64 {
        match *self {
            Scaling::Exponential { rho, .. } => rho,
            // ρ/t decreases to 0; the infimum is the limit.
            Scaling::Polynomial { .. } => 0.0,
            Scaling::SpecialFunctionCase { alpha, lambda, .. } => 2.0 * lambda / (alpha - 1.0),
            Scaling::SpecialOperatorCase { alpha, .. } => 2.0 / alpha,
            Scaling::Constant { .. } => 0.0,
        }
    }

    /// Antiderivative B with B' = b, used for the ∫b rate weights.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match *self {
            Scaling::Exponential { kappa, rho } => {
                if rho == 0.0 {
                    kappa * t
                } else {
                    kappa / rho * (rho * t).exp()
                }
            }
            Scaling::Polynomial { kappa, rho } => kappa * t.powf(rho + 1.0) / (rho + 1.0),
            Scaling::SpecialFunctionCase { alpha, lambda, s0, t0 } => {
                let c = lambda * s0 / (alpha - 1.0);
                let rate = 2.0 * lambda / (alpha - 1.0);
                c * c / rate * (rate * (t - t0)).exp()
            }
            Scaling::SpecialOperatorCase { alpha, s0, t0 } => {
                s0 * (2.0 * (t - t0) / alpha).exp()
            }
            Scaling::Constant { kappa } => kappa * t,
        }
    }

    /// Exponential-or-polynomial normal form for ratio analytics. Every
    /// family except `polynomial` is a pure exponential κ'·e^{ρ't}.
    fn normal_form(&self) -> NormalForm {
        match *self {
            Scaling::Exponential { kappa, rho } => NormalForm::Exp { coeff: kappa, rate: rho },
            Scaling::Constant { kappa } => NormalForm::Exp { coeff: kappa, rate: 0.0 },
            Scaling::SpecialFunctionCase { alpha, lambda, s0, t0 } => {
                let c = lambda * s0 / (alpha - 1.0);
                let rate = 2.0 * lambda / (alpha - 1.0);
                NormalForm::Exp { coeff: c * c * (-rate * t0).exp(), rate }
            }
            Scaling::SpecialOperatorCase { alpha, s0, t0 } => {
                let rate = 2.0 / alpha;
                NormalForm::Exp { coeff: 2.0 * s0 / alpha * (-rate * t0).exp(), rate }
            }
            Scaling::Polynomial { kappa, rho } => NormalForm::Poly { coeff: kappa, power: rho },
        }
    }
}

enum NormalForm {
    Exp { coeff: f64, rate: f64 },
    Poly { coeff: f64, power: f64 },
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("AVD requires alpha > 3, got {0}")]
    AvdAlphaTooSmall(f64),
    #[error("Fast OGDA requires alpha > 2, got {0}")]
    FogdaAlphaTooSmall(f64),
    #[error("vanishing-damping variants require start_time > 0, got {0}")]
    NonpositiveStartTime(f64),
    #[error("heavy ball start_time must be >= 0, got {0}")]
    NegativeStartTime(f64),
    #[error("lambda must be positive, got {0}")]
    NonpositiveLambda(f64),
    #[error("initial data dimension {got} does not match problem dim {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("field evaluated at s = {0} <= 0 (singular damping)")]
    SingularTime(f64),
}

/// The instantaneous state of a first-order reformulation.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    HbfFunction,
    AvdFunction,
    HbOperator,
    FogdaOperator,
}

/// A fully validated system description: which dynamics to run, with which
/// parameters, problem, and Cauchy data.
#[derive(Debug, Clone)]
pub enum SystemSpec {
    HbfFunction {
        lambda: f64,
        b: Scaling,
        problem: ScalarProblem,
        start_time: f64,
        y0: Vec<f64>,
        y1: Vec<f64>,
    },
    AvdFunction {
        alpha: f64,
        problem: ScalarProblem,
        start_time: f64,
        y0: Vec<f64>,
        y1: Vec<f64>,
    },
    HbOperator {
        lambda: f64,
        mu: Scaling,
        gamma: Scaling,
        problem: OperatorProblem,
        start_time: f64,
        y0: Vec<f64>,
        y1: Vec<f64>,
    },
    FogdaOperator {
        alpha: f64,
        problem: OperatorProblem,
        start_time: f64,
        y0: Vec<f64>,
        y1: Vec<f64>,
    },
}

impl SystemSpec {
    pub fn hbf_function(
        lambda: f64,
        b: Scaling,
        problem: ScalarProblem,
        start_time: f64,
        y0: Vec<f64>,
        y1: Vec<f64>,
    ) -> Result<Self, DynamicsError> {
        if lambda <= 0.0 {
            return Err(DynamicsError::NonpositiveLambda(lambda));
        }
        if start_time < 0.0 {
            return Err(DynamicsError::NegativeStartTime(start_time));
        }
        check_dims(&y0, &y1, problem.dim)?;
        Ok(SystemSpec::HbfFunction { lambda, b, problem, start_time, y0, y1 })
    }

    pub fn avd_function(
        alpha: f64,
        problem: ScalarProblem,
        start_time: f64,
        y0: Vec<f64>,
        y1: Vec<f64>,
    ) -> Result<Self, DynamicsError> {
        if alpha <= 3.0 {
            return Err(DynamicsError::AvdAlphaTooSmall(alpha));
        }
        if start_time <= 0.0 {
            return Err(DynamicsError::NonpositiveStartTime(start_time));
        }
        check_dims(&y0, &y1, problem.dim)?;
        Ok(SystemSpec::AvdFunction { alpha, problem, start_time, y0, y1 })
    }

    pub fn hb_operator(
        lambda: f64,
        mu: Scaling,
        gamma: Scaling,
        problem: OperatorProblem,
        start_time: f64,
        y0: Vec<f64>,
        y1: Vec<f64>,
    ) -> Result<Self, DynamicsError> {
        if lambda <= 0.0 {
            return Err(DynamicsError::NonpositiveLambda(lambda));
        }
        if start_time < 0.0 {
            return Err(DynamicsError::NegativeStartTime(start_time));
        }
        check_dims(&y0, &y1, problem.dim)?;
        Ok(SystemSpec::HbOperator { lambda, mu, gamma, problem, start_time, y0, y1 })
    }

    pub fn fogda_operator(
        alpha: f64,
        problem: OperatorProblem,
        start_time: f64,
        y0: Vec<f64>,
        y1: Vec<f64>,
    ) -> Result<Self, DynamicsError> {
        if alpha <= 2.0 {
            return Err(DynamicsError::FogdaAlphaTooSmall(alpha));
        }
        if start_time <= 0.0 {
            return Err(DynamicsError::NonpositiveStartTime(start_time));
        }
        check_dims(&y0, &y1, problem.dim)?;
        Ok(SystemSpec::FogdaOperator { alpha, problem, start_time, y0, y1 })
    }

    pub fn variant(&self) -> Variant {
        match self {
            SystemSpec::HbfFunction { .. } => Variant::HbfFunction,
            SystemSpec::AvdFunction { .. } => Variant::AvdFunction,
            SystemSpec::HbOperator { .. } => Variant::HbOperator,
            SystemSpec::FogdaOperator { .. } => Variant::FogdaOperator,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemSpec::HbfFunction { problem, .. } => problem.dim,
            SystemSpec::AvdFunction { problem, .. } => problem.dim,
            SystemSpec::HbOperator { problem, .. } => problem.dim,
            SystemSpec::FogdaOperator { problem, .. } => problem.dim,
        }
    }

    pub fn start_time(&self) -> f64 {
        match self {
            SystemSpec::HbfFunction { start_time, .. }
            | SystemSpec::AvdFunction { start_time, .. }
            | SystemSpec::HbOperator { start_time, .. }
            | SystemSpec::FogdaOperator { start_time, .. } => *start_time,
        }
    }

    pub fn scalar_problem(&self) -> Option<&ScalarProblem> {
        match self {
            SystemSpec::HbfFunction { problem, .. } | SystemSpec::AvdFunction { problem, .. } => {
                Some(problem)
            }
            _ => None,
        }
    }

    pub fn operator_problem(&self) -> Option<&OperatorProblem> {
        match self {
            SystemSpec::HbOperator { problem, .. }
            | SystemSpec::FogdaOperator { problem, .. } => Some(problem),
            _ => None,
        }
    }

    /// Builds the initial `(p, u)` state from the Cauchy data `(y0, y1)`.
    pub fn initial_state(&self) -> State {
        match self {
            SystemSpec::HbfFunction { lambda, start_time, y0, y1, .. } => State {
                time: *start_time,
                p: y0.clone(),
                u: y0.iter().zip(y1).map(|(p, v)| lambda * p + v).collect(),
            },
            SystemSpec::AvdFunction { start_time, y0, y1, .. } => State {
                time: *start_time,
                p: y0.clone(),
                u: y1.clone(),
            },
            SystemSpec::HbOperator { lambda, mu, problem, start_time, y0, y1, .. } => {
                let v0 = (problem.apply)(y0);
                let m0 = mu.value(*start_time);
                State {
                    time: *start_time,
                    p: y0.clone(),
                    u: (0..y0.len()).map(|i| lambda * y0[i] + y1[i] + m0 * v0[i]).collect(),
                }
            }
            SystemSpec::FogdaOperator { problem, start_time, y0, y1, .. } => {
                let v0 = (problem.apply)(y0);
                State {
                    time: *start_time,
                    p: y0.clone(),
                    u: y1.iter().zip(&v0).map(|(v, w)| v + w).collect(),
                }
            }
        }
    }

    /// Evaluates the first-order field at `(t, p, u)`.
    pub fn rhs(&self, t: f64, p: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
        match self {
            SystemSpec::HbfFunction { lambda, b, problem, .. } => {
                let grad = (problem.gradient)(p);
                let bt = b.value(t);
                let dp = (0..p.len()).map(|i| u[i] - lambda * p[i]).collect();
                let du = grad.iter().map(|g| -bt * g).collect();
                Ok((dp, du))
            }
            SystemSpec::AvdFunction { alpha, problem, .. } => {
                if t <= 0.0 {
                    return Err(DynamicsError::SingularTime(t));
                }
                let grad = (problem.gradient)(p);
                let dp = u.to_vec();
                let du = (0..p.len()).map(|i| -alpha / t * u[i] - grad[i]).collect();
                Ok((dp, du))
            }
            SystemSpec::HbOperator { lambda, mu, gamma, problem, .. } => {
                let v = (problem.apply)(p);
                let mt = mu.value(t);
                let coeff = mu.derivative(t) - gamma.value(t);
                let dp = (0..p.len()).map(|i| u[i] - lambda * p[i] - mt * v[i]).collect();
                let du = v.iter().map(|vi| coeff * vi).collect();
                Ok((dp, du))
            }
            SystemSpec::FogdaOperator { alpha, problem, .. } => {
                if t <= 0.0 {
                    return Err(DynamicsError::SingularTime(t));
                }
                let v = (problem.apply)(p);
                let dp = (0..p.len()).map(|i| u[i] - v[i]).collect();
                let du = (0..p.len())
                    .map(|i| -alpha / t * u[i] + alpha / (2.0 * t) * v[i])
                    .collect();
                Ok((dp, du))
            }
        }
    }

    /// Recovers the physical velocity ẏ (or ẋ) from the reformulated state.
    pub fn velocity(&self, t: f64, p: &[f64], u: &[f64]) -> Vec<f64> {
        match self {
            SystemSpec::HbfFunction { lambda, .. } => {
                (0..p.len()).map(|i| u[i] - lambda * p[i]).collect()
            }
            SystemSpec::AvdFunction { .. } => u.to_vec(),
            SystemSpec::HbOperator { lambda, mu, problem, .. } => {
                let v = (problem.apply)(p);
                let mt = mu.value(t);
                (0..p.len()).map(|i| u[i] - lambda * p[i] - mt * v[i]).collect()
            }
            SystemSpec::FogdaOperator { problem, .. } => {
                let v = (problem.apply)(p);
                (0..p.len()).map(|i| u[i] - v[i]).collect()
            }
        }
    }

    /// Flattened field over z = [p, u], for the generic integrator.
    pub fn flat_rhs(&self) -> impl Fn(f64, &[f64]) -> Vec<f64> + '_ {
        let d = self.dim();
        move |t, z| {
            let (p, u) = z.split_at(d);
            let (dp, du) = self
                .rhs(t, p, u)
                .expect("field evaluated outside its validated time domain");
            let mut out = dp;
            out.extend(du);
            out
        }
    }

    pub fn flat_initial_state(&self) -> Vec<f64> {
        let s = self.initial_state();
        let mut z = s.p;
        z.extend(s.u);
        z
    }
}

fn check_dims(y0: &[f64], y1: &[f64], dim: usize) -> Result<(), DynamicsError> {
    if y0.len() != dim {
        return Err(DynamicsError::DimensionMismatch { got: y0.len(), want: dim });
    }
    if y1.len() != dim {
        return Err(DynamicsError::DimensionMismatch { got: y1.len(), want: dim });
    }
    Ok(())
}

/// Three-valued outcome of an assumption check; `Indeterminate` means the
/// required limit could not be pinned down, which is distinct from a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionOutcome {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AssumptionReport {
    pub pass: bool,
    pub outcome: AssumptionOutcome,
    pub quantities: BTreeMap<String, f64>,
    pub violated: Vec<String>,
    /// (3(α−1)/(2α−1), α−1), reported for the special operator family.
    pub lambda_window: Option<(f64, f64)>,
    /// Set when a supremum had to be grid-sampled instead of computed in
    /// closed form.
    pub sampled: bool,
}

// Assumption checks are strict inequalities; require this much slack.
const STRICT_MARGIN: f64 = 1e-12;

/// Checks sup ḃ/b < λ for the function-case system.
pub fn validate_assumption_function(
    lambda: f64,
    b: &Scaling,
    t0: f64,
    _horizon: f64,
) -> AssumptionReport {
    let sup = b.log_deriv_sup(t0);
    let mut quantities = BTreeMap::new();
    quantities.insert("sup_bdot_over_b".into(), sup);
    quantities.insert("lambda".into(), lambda);
    quantities.insert("margin".into(), lambda - sup);
    let mut violated = Vec::new();
    if !(lambda - sup > STRICT_MARGIN) {
        violated.push("sup_bdot_over_b_lt_lambda".into());
    }
    // The scalings in scope are nondecreasing families; a negative growth
    // parameter breaks the standing assumption on b.
    if b.derivative(t0) < 0.0 {
        violated.push("b_nondecreasing".into());
    }
    let pass = violated.is_empty();
    AssumptionReport {
        pass,
        outcome: if pass { AssumptionOutcome::Pass } else { AssumptionOutcome::Fail },
        quantities,
        violated,
        lambda_window: None,
        sampled: false,
    }
}

/// Checks the three operator-case conditions:
/// lim γ/μ = L > 0, sup μ̇/γ < 1, and 2λ − 3L + inf μ̇/μ > 0.
pub fn validate_assumption_operator(
    lambda: f64,
    mu: &Scaling,
    gamma: &Scaling,
    t0: f64,
    horizon: f64,
) -> AssumptionReport {
    let mut quantities = BTreeMap::new();
    let mut violated = Vec::new();
    let mut sampled = false;
    quantities.insert("lambda".into(), lambda);

    let lambda_window = match *mu {
        Scaling::SpecialOperatorCase { alpha, .. } => {
            let lo = 3.0 * (alpha - 1.0) / (2.0 * alpha - 1.0);
            let hi = alpha - 1.0;
            quantities.insert("lambda_window_lo".into(), lo);
            quantities.insert("lambda_window_hi".into(), hi);
            Some((lo, hi))
        }
        _ => None,
    };

    let limit = ratio_limit(gamma, mu);
    let l = match limit {
        RatioLimit::Finite(l) => {
            quantities.insert("L".into(), l);
            if !(l > 0.0) {
                violated.push("gamma_over_mu_limit_positive".into());
            }
            l
        }
        RatioLimit::Infinite => {
            quantities.insert("L".into(), f64::INFINITY);
            violated.push("gamma_over_mu_limit_positive".into());
            f64::INFINITY
        }
        RatioLimit::Sampled => {
            // Fall back to the ratio at the horizon with a last-decade
            // stabilization check.
            sampled = true;
            let r_end = gamma.value(horizon) / mu.value(horizon);
            let r_prev = gamma.value(t0 + 0.9 * (horizon - t0)) / mu.value(t0 + 0.9 * (horizon - t0));
            quantities.insert("L".into(), r_end);
            if (r_end - r_prev).abs() > 1e-6 * r_end.abs().max(1e-300) {
                return AssumptionReport {
                    pass: false,
                    outcome: AssumptionOutcome::Indeterminate,
                    quantities,
                    violated: vec!["gamma_over_mu_limit_not_stabilized".into()],
                    lambda_window,
                    sampled,
                };
            }
            r_end
        }
    };

    let sup_mudot_gamma = match sup_ratio_mudot_over_gamma(mu, gamma, t0) {
        Some(s) => s,
        None => {
            sampled = true;
            grid_sup(|t| mu.derivative(t) / gamma.value(t), t0, horizon)
        }
    };
    quantities.insert("sup_mudot_over_gamma".into(), sup_mudot_gamma);
    if !(1.0 - sup_mudot_gamma > STRICT_MARGIN) {
        violated.push("sup_mudot_over_gamma_lt_one".into());
    }

    let inf_mudot_mu = mu.log_deriv_inf(t0);
    quantities.insert("inf_mudot_over_mu".into(), inf_mudot_mu);
    let third = 2.0 * lambda - 3.0 * l + inf_mudot_mu;
    quantities.insert("two_lambda_minus_3L_plus_inf".into(), third);
    if !(third > STRICT_MARGIN) {
        violated.push("two_lambda_minus_3L_plus_inf_positive".into());
    }

    if l.is_finite() {
        quantities.insert("lambda_minus_L".into(), lambda - l);
    }

    let pass = violated.is_empty();
    AssumptionReport {
        pass,
        outcome: if pass { AssumptionOutcome::Pass } else { AssumptionOutcome::Fail },
        quantities,
        violated,
        lambda_window,
        sampled,
    }
}

enum RatioLimit {
    Finite(f64),
    Infinite,
    /// No analytic limit available; callers fall back to grid sampling.
    #[allow(dead_code)]
    Sampled,
}

/// lim_{t→∞} γ(t)/μ(t) via exponential/polynomial normal forms.
fn ratio_limit(gamma: &Scaling, mu: &Scaling) -> RatioLimit {
    use NormalForm::*;
    match (gamma.normal_form(), mu.normal_form()) {
        (Exp { coeff: cg, rate: rg }, Exp { coeff: cm, rate: rm }) => {
            if (rg - rm).abs() <= f64::EPSILON * rg.abs().max(rm.abs()).max(1.0) {
                RatioLimit::Finite(cg / cm)
            } else if rg < rm {
                RatioLimit::Finite(0.0)
            } else {
                RatioLimit::Infinite
            }
        }
        (Poly { coeff: cg, power: pg }, Poly { coeff: cm, power: pm }) => {
            if pg == pm {
                RatioLimit::Finite(cg / cm)
            } else if pg < pm {
                RatioLimit::Finite(0.0)
            } else {
                RatioLimit::Infinite
            }
        }
        (Exp { rate: rg, .. }, Poly { .. }) => {
            if rg > 0.0 {
                RatioLimit::Infinite
            } else {
                RatioLimit::Finite(0.0)
            }
        }
        (Poly { .. }, Exp { rate: rm, .. }) => {
            if rm > 0.0 {
                RatioLimit::Finite(0.0)
            } else {
                RatioLimit::Infinite
            }
        }
    }
}

/// Closed-form sup over [t₀, ∞) of μ̇/γ where the ratio is monotone; mixed
/// exponential/polynomial pairs fall back to grid sampling.
fn sup_ratio_mudot_over_gamma(mu: &Scaling, gamma: &Scaling, t0: f64) -> Option<f64> {
    use NormalForm::*;
    match (mu.normal_form(), gamma.normal_form()) {
        (Exp { coeff: cm, rate: rm }, Exp { coeff: cg, rate: rg }) => {
            // μ̇/γ = rm·(cm/cg)·e^{(rm−rg)t}
            if rm <= 0.0 {
                Some(0.0_f64.max(rm * cm / cg * ((rm - rg) * t0).exp()))
            } else if rm <= rg {
                Some(rm * cm / cg * ((rm - rg) * t0).exp())
            } else {
                Some(f64::INFINITY)
            }
        }
        (Poly { coeff: cm, power: pm }, Poly { coeff: cg, power: pg }) => {
            // μ̇/γ = pm·(cm/cg)·t^{pm−1−pg}
            if pm == 0.0 {
                return Some(0.0);
            }
            let e = pm - 1.0 - pg;
            if e <= 0.0 {
                Some(pm * cm / cg * t0.powf(e))
            } else {
                Some(f64::INFINITY)
            }
        }
        _ => None,
    }
}

fn grid_sup(f: impl Fn(f64) -> f64, t0: f64, horizon: f64) -> f64 {
    let n = 10_000;
    let lo = t0.max(1e-12);
    let ratio = (horizon / lo).max(1.0);
    (0..=n)
        .map(|i| lo * ratio.powf(i as f64 / n as f64))
        .map(f)
        .fold(f64::NEG_INFINITY, f64::max)
}
