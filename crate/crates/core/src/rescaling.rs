//! Closed-form time maps between Heavy Ball time `t` and vanishing-damping
//! time `s`, the special scalings that make the two systems equivalent, and
//! the trajectory equivalence checker.
//!
//! Both cases share the same logarithmic shape: τ(s) = c·ln(s/s₀) + t₀ and
//! σ(t) = s₀·exp((t − t₀)/c), with c = (α−1)/λ in the function case and
//! c = α/2 in the operator case (where λ is pinned to 2(α−1)/α).

use thiserror::Error;

use crate::dynamics::{Scaling, SystemSpec};
use crate::integrator::Trajectory;
use crate::norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapCase {
    FunctionCase,
    OperatorCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    HeavyToVanishing,
    VanishingToHeavy,
}

/// An invertible reparametrization between the two time axes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeMap {
    pub case: MapCase,
    pub alpha: f64,
    pub lambda: f64,
    pub s0: f64,
    pub t0: f64,
    /// True when α is large enough for the convergence transfer (α > 3
    /// function case, α > 2 operator case). The maps themselves only need
    /// α > 1; constructing one below the transfer threshold sets this flag
    /// instead of failing.
    pub transfer_valid: bool,
}

#[derive(Debug, Error)]
pub enum RescaleError {
    #[error("time maps need alpha > 1, got {0}")]
    AlphaTooSmall(f64),
    #[error("special function scaling needs alpha > 3, got {0}")]
    SpecialFunctionAlpha(f64),
    #[error("special operator scaling needs alpha > 2, got {0}")]
    SpecialOperatorAlpha(f64),
    #[error("lambda must be positive, got {0}")]
    NonpositiveLambda(f64),
    #[error("s0 must be positive, got {0}")]
    NonpositiveS0(f64),
    #[error("tau evaluated at s = {s} < s0 = {s0}")]
    BelowS0 { s: f64, s0: f64 },
    #[error("sigma evaluated at t = {t} < t0 = {t0}")]
    BelowT0 { t: f64, t0: f64 },
    #[error("trajectories do not overlap after mapping: [{lo}, {hi}]")]
    NoOverlap { lo: f64, hi: f64 },
}

impl TimeMap {
    pub fn function_case(alpha: f64, lambda: f64, s0: f64, t0: f64) -> Result<Self, RescaleError> {
        if alpha <= 1.0 {
            return Err(RescaleError::AlphaTooSmall(alpha));
        }
        if lambda <= 0.0 {
            return Err(RescaleError::NonpositiveLambda(lambda));
        }
        if s0 <= 0.0 {
            return Err(RescaleError::NonpositiveS0(s0));
        }
        Ok(TimeMap {
            case: MapCase::FunctionCase,
            alpha,
            lambda,
            s0,
            t0,
            transfer_valid: alpha > 3.0,
        })
    }

    pub fn operator_case(alpha: f64, s0: f64, t0: f64) -> Result<Self, RescaleError> {
        if alpha <= 1.0 {
            return Err(RescaleError::AlphaTooSmall(alpha));
        }
        if s0 <= 0.0 {
            return Err(RescaleError::NonpositiveS0(s0));
        }
        Ok(TimeMap {
            case: MapCase::OperatorCase,
            alpha,
            lambda: 2.0 * (alpha - 1.0) / alpha,
            s0,
            t0,
            transfer_valid: alpha > 2.0,
        })
    }

    /// The logarithmic slope c: τ(s) = c·ln(s/s₀) + t₀.
    pub fn slope(&self) -> f64 {
        match self.case {
            MapCase::FunctionCase => (self.alpha - 1.0) / self.lambda,
            MapCase::OperatorCase => self.alpha / 2.0,
        }
    }

    /// Heavy Ball time at vanishing-damping time `s`.
    pub fn tau(&self, s: f64) -> Result<f64, RescaleError> {
        if s < self.s0 {
            return Err(RescaleError::BelowS0 { s, s0: self.s0 });
        }
        Ok(self.slope() * (s / self.s0).ln() + self.t0)
    }

    /// τ̇(s) = c/s.
    pub fn tau_dot(&self, s: f64) -> f64 {
        self.slope() / s
    }

    /// Vanishing-damping time at Heavy Ball time `t`.
    pub fn sigma(&self, t: f64) -> Result<f64, RescaleError> {
        if t < self.t0 {
            return Err(RescaleError::BelowT0 { t, t0: self.t0 });
        }
        Ok(self.s0 * ((t - self.t0) / self.slope()).exp())
    }

    /// Velocity factor for `map_initial_conditions`: ẋ(s₀) = (c/s₀)·ẏ(t₀).
    pub fn velocity_factor(&self, direction: MapDirection) -> f64 {
        match direction {
            MapDirection::HeavyToVanishing => self.slope() / self.s0,
            MapDirection::VanishingToHeavy => self.s0 / self.slope(),
        }
    }
}

/// The exponential b(t) that makes the Heavy Ball function system a time
/// reparametrization of the vanishing-damping system.
pub fn special_b(alpha: f64, lambda: f64, s0: f64, t0: f64) -> Result<Scaling, RescaleError> {
    if alpha <= 3.0 {
        return Err(RescaleError::SpecialFunctionAlpha(alpha));
    }
    if lambda <= 0.0 {
        return Err(RescaleError::NonpositiveLambda(lambda));
    }
    if s0 <= 0.0 {
        return Err(RescaleError::NonpositiveS0(s0));
    }
    Ok(Scaling::SpecialFunctionCase { alpha, lambda, s0, t0 })
}

/// The exponential μ = γ (with λ = 2(α−1)/α) that makes the operator Heavy
/// Ball system a time reparametrization of the Fast OGDA dynamics.
pub fn special_mu_gamma(
    alpha: f64,
    s0: f64,
    t0: f64,
) -> Result<(Scaling, Scaling, f64), RescaleError> {
    if alpha <= 2.0 {
        return Err(RescaleError::SpecialOperatorAlpha(alpha));
    }
    if s0 <= 0.0 {
        return Err(RescaleError::NonpositiveS0(s0));
    }
    let mu = Scaling::SpecialOperatorCase { alpha, s0, t0 };
    Ok((mu.clone(), mu, 2.0 * (alpha - 1.0) / alpha))
}

/// Maps Cauchy data across the reparametrization: positions carry over
/// unchanged, velocities scale by the proposition's factor.
pub fn map_initial_conditions(
    map: &TimeMap,
    direction: MapDirection,
    position: &[f64],
    velocity: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let f = map.velocity_factor(direction);
    (position.to_vec(), velocity.iter().map(|v| f * v).collect())
}

/// Pointwise comparison of a Heavy Ball run against its vanishing-damping
/// twin on a shared sample grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EquivalenceReport {
    pub sample_times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub velocity_deviations: Vec<f64>,
    pub max_deviation: f64,
    pub velocity_max_deviation: f64,
}

/// Compares `x(s)` against `y(τ(s))` at `n_samples` log-spaced times in the
/// intersection of both ranges. Velocities are compared through the chain
/// rule ẏ(τ(s)) = ẋ(s)/τ̇(s) rather than by differentiating dense output.
pub fn equivalence_check(
    traj_heavy: &Trajectory,
    spec_heavy: &SystemSpec,
    traj_vanishing: &Trajectory,
    spec_vanishing: &SystemSpec,
    map: &TimeMap,
    n_samples: usize,
) -> Result<EquivalenceReport, RescaleError> {
    let s_lo = traj_vanishing.start_time().max(map.s0);
    // Sample only where the Heavy Ball run covers τ(s).
    let s_from_heavy_end = map.sigma(traj_heavy.end_time())?;
    let s_from_heavy_start = map.sigma(traj_heavy.start_time().max(map.t0))?;
    let lo = s_lo.max(s_from_heavy_start);
    let hi = traj_vanishing.end_time().min(s_from_heavy_end);
    if !(hi > lo) {
        return Err(RescaleError::NoOverlap { lo, hi });
    }

    let d = spec_heavy.dim();
    let mut sample_times = Vec::with_capacity(n_samples);
    let mut deviations = Vec::with_capacity(n_samples);
    let mut velocity_deviations = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let frac = i as f64 / (n_samples - 1).max(1) as f64;
        let s = lo * (hi / lo).powf(frac);
        let t = map.tau(s)?;
        let zx = traj_vanishing
            .dense_eval(s)
            .expect("sample inside intersected range");
        let zy = traj_heavy.dense_eval(t).expect("mapped sample inside heavy range");
        let (px, ux) = zx.split_at(d);
        let (py, uy) = zy.split_at(d);
        let dev = norm(&px.iter().zip(py).map(|(a, b)| a - b).collect::<Vec<_>>());

        let vx = spec_vanishing.velocity(s, px, ux);
        let vy = spec_heavy.velocity(t, py, uy);
        let td = map.tau_dot(s);
        let vdev = norm(
            &vx.iter()
                .zip(&vy)
                .map(|(a, b)| a / td - b)
                .collect::<Vec<_>>(),
        );

        sample_times.push(s);
        deviations.push(dev);
        velocity_deviations.push(vdev);
    }
    let max_deviation = deviations.iter().cloned().fold(0.0_f64, f64::max);
    let velocity_max_deviation = velocity_deviations.iter().cloned().fold(0.0_f64, f64::max);
    Ok(EquivalenceReport {
        sample_times,
        deviations,
        velocity_deviations,
        max_deviation,
        velocity_max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Scaling;

    #[test]
    fn tau_sigma_examples() {
        let m = TimeMap::function_case(4.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(m.tau(1.0).unwrap(), 0.0);
        assert!((m.tau(std::f64::consts::E).unwrap() - 3.0).abs() < 1e-14);
        assert!((m.sigma(3.0).unwrap() - std::f64::consts::E).abs() < 1e-14);
        assert_eq!(m.sigma(0.0).unwrap(), 1.0);
        assert!(m.tau(0.5).is_err());
        assert!(m.sigma(-0.1).is_err());

        let op = TimeMap::operator_case(4.0, 1.0, 0.0).unwrap();
        assert!((op.tau(std::f64::consts::E).unwrap() - 2.0).abs() < 1e-14);
        assert!((op.lambda - 1.5).abs() < 1e-15);
    }

    #[test]
    fn tau_sigma_are_mutual_inverses() {
        for m in [
            TimeMap::function_case(4.0, 1.0, 1.0, 0.0).unwrap(),
            TimeMap::function_case(5.5, 0.7, 2.0, 1.0).unwrap(),
            TimeMap::operator_case(4.0, 1.0, 0.0).unwrap(),
            TimeMap::operator_case(3.0, 0.5, 2.0).unwrap(),
        ] {
            for i in 0..100 {
                let s = m.s0 * 10f64.powf(3.0 * i as f64 / 99.0);
                let back = m.sigma(m.tau(s).unwrap()).unwrap();
                assert!((back - s).abs() <= 1e-10 * s, "roundtrip {s} -> {back}");
            }
        }
    }

    #[test]
    fn damping_identities() {
        // Function case: λτ̇ − τ̈/τ̇ = α/s.
        let m = TimeMap::function_case(4.0, 1.3, 1.0, 0.0).unwrap();
        let c = m.slope();
        for i in 0..50 {
            let s = 1.0 + i as f64;
            let lhs = m.lambda * (c / s) - (-c / (s * s)) / (c / s);
            assert!((lhs - m.alpha / s).abs() <= 1e-10 * (m.alpha / s));
        }
        // Operator case: α·σ̇/σ − σ̈/σ̇ = 2(α−1)/α.
        let op = TimeMap::operator_case(4.0, 1.0, 0.0).unwrap();
        let c = op.slope();
        for i in 0..50 {
            let _t = i as f64 * 0.1;
            // σ(t) = s₀ e^{(t−t₀)/c}: σ̇/σ = 1/c and σ̈/σ̇ = 1/c.
            let lhs = op.alpha / c - 1.0 / c;
            assert!((lhs - op.lambda).abs() <= 1e-10);
        }
    }

    #[test]
    fn special_b_examples_and_identities() {
        let (alpha, lambda, s0, t0) = (4.0, 1.0, 1.0, 0.0);
        let b = special_b(alpha, lambda, s0, t0).unwrap();
        // b(t0) = (λs0/(α−1))².
        assert!((b.value(t0) - (lambda * s0 / (alpha - 1.0)).powi(2)).abs() < 1e-15);
        // α=4, λ=1: b(t) = e^{2t/3}/9 and ḃ/b = 2/3.
        assert!((b.value(1.0) - (2.0 / 3.0_f64).exp() / 9.0).abs() < 1e-15);
        assert!((b.log_deriv_sup(t0) - 2.0 / 3.0).abs() < 1e-15);
        // (τ̇)²·b(τ(s)) ≡ 1.
        let m = TimeMap::function_case(alpha, lambda, s0, t0).unwrap();
        for i in 0..30 {
            let s = s0 * 10f64.powf(2.0 * i as f64 / 29.0);
            let td = m.tau_dot(s);
            let val = td * td * b.value(m.tau(s).unwrap());
            assert!((val - 1.0).abs() <= 1e-12, "coefficient identity at s={s}: {val}");
        }
        assert!(special_b(3.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn special_mu_gamma_examples_and_identities() {
        let (alpha, s0, t0) = (4.0, 1.0, 0.0);
        let (mu, gamma, lambda) = special_mu_gamma(alpha, s0, t0).unwrap();
        assert!((lambda - 1.5).abs() < 1e-15);
        assert!((mu.value(0.0) - 0.5).abs() < 1e-15);
        // μ̇/μ = 2/α = λ/(α−1).
        assert!((mu.log_deriv_sup(t0) - 2.0 / alpha).abs() < 1e-15);
        assert!((mu.log_deriv_sup(t0) - lambda / (alpha - 1.0)).abs() < 1e-15);
        let m = TimeMap::operator_case(alpha, s0, t0).unwrap();
        for i in 0..30 {
            let s = s0 * 10f64.powf(2.0 * i as f64 / 29.0);
            let t = m.tau(s).unwrap();
            let td = m.tau_dot(s);
            // μ(τ(s)) = 2s/α, τ̇·μ∘τ ≡ 1, (τ̇)²·γ∘τ = α/(2s).
            assert!((mu.value(t) - 2.0 * s / alpha).abs() <= 1e-12 * s);
            assert!((td * mu.value(t) - 1.0).abs() <= 1e-12);
            assert!((td * td * gamma.value(t) - alpha / (2.0 * s)).abs() <= 1e-12 / s);
        }
        assert!(special_mu_gamma(2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn initial_condition_factors() {
        let m = TimeMap::function_case(4.0, 1.0, 1.0, 0.0).unwrap();
        let (p, v) = map_initial_conditions(&m, MapDirection::HeavyToVanishing, &[1.0], &[2.0]);
        assert_eq!(p, vec![1.0]);
        assert_eq!(v, vec![6.0]); // (α−1)/(λs0) = 3
        let (_, back) = map_initial_conditions(&m, MapDirection::VanishingToHeavy, &p, &v);
        assert_eq!(back, vec![2.0]);

        let op = TimeMap::operator_case(4.0, 1.0, 0.0).unwrap();
        let (_, v) =
            map_initial_conditions(&op, MapDirection::HeavyToVanishing, &[1.0, 0.0], &[1.0, 0.0]);
        assert_eq!(v, vec![2.0, 0.0]); // α/(2s0) = 2

        // y1 = 0 maps to x1 = 0.
        let (_, v) = map_initial_conditions(&m, MapDirection::HeavyToVanishing, &[1.0], &[0.0]);
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn map_allows_small_alpha_with_flag() {
        let m = TimeMap::function_case(2.0, 1.0, 1.0, 0.0).unwrap();
        assert!(!m.transfer_valid);
        assert!(TimeMap::function_case(1.0, 1.0, 1.0, 0.0).is_err());
        let b = Scaling::SpecialFunctionCase { alpha: 2.0, lambda: 1.0, s0: 1.0, t0: 0.0 };
        assert!(b.value(0.0) > 0.0);
    }
}
