//! Initial-value-problem solver with dense output.
//!
//! Two methods are available: an embedded Dormand-Prince 4(5) pair with a PI
//! step controller, and fixed-step classical RK4. Both store the field value
//! at every node, so trajectories support cubic Hermite dense evaluation
//! between nodes without re-integrating.

use thiserror::Error;

/// Integration method and error control settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed { h: f64 },
    DormandPrince { rtol: f64, atol: f64, h_init: f64, h_max: f64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntegratorControls {
    #[serde(flatten)]
    pub method: Method,
    pub max_steps: usize,
    /// Extra times (ascending, within the window) materialized as nodes via
    /// dense evaluation.
    #[serde(default)]
    pub sample_times: Option<Vec<f64>>,
}

impl IntegratorControls {
    pub fn dormand_prince(rtol: f64, atol: f64) -> Self {
        IntegratorControls {
            method: Method::DormandPrince { rtol, atol, h_init: 1e-4, h_max: f64::INFINITY },
            max_steps: 10_000_000,
            sample_times: None,
        }
    }

    pub fn rk4(h: f64) -> Self {
        IntegratorControls { method: Method::Rk4Fixed { h }, max_steps: 100_000_000, sample_times: None }
    }
}

/// One accepted node: time, state, and the field evaluated there.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub t: f64,
    pub z: Vec<f64>,
    pub dz: Vec<f64>,
}

/// Time-ordered samples of a solution with stored derivatives.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub nodes: Vec<Node>,
    pub controls: IntegratorControls,
}

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("max_steps ({max_steps}) exceeded at t = {last_time}")]
    MaxStepsExceeded { max_steps: usize, last_time: f64, partial: Trajectory },
    #[error("step size underflow ({h}) at t = {last_time}")]
    StepSizeUnderflow { h: f64, last_time: f64, partial: Trajectory },
    #[error("t_end ({t_end}) must exceed t_start ({t_start})")]
    EmptyWindow { t_start: f64, t_end: f64 },
    #[error("controls invalid: {0}")]
    BadControls(String),
}

#[derive(Debug, Error)]
#[error("time {t} outside trajectory range [{lo}, {hi}]")]
pub struct RangeError {
    pub t: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Trajectory {
    pub fn start_time(&self) -> f64 {
        self.nodes.first().map(|n| n.t).unwrap_or(f64::NAN)
    }

    pub fn end_time(&self) -> f64 {
        self.nodes.last().map(|n| n.t).unwrap_or(f64::NAN)
    }

    /// Cubic Hermite interpolation on the bracketing node pair. Exact at
    /// nodes; no extrapolation.
    pub fn dense_eval(&self, t: f64) -> Result<Vec<f64>, RangeError> {
        let (lo, hi) = (self.start_time(), self.end_time());
        if !(t >= lo && t <= hi) {
            return Err(RangeError { t, lo, hi });
        }
        // Rightmost node with n.t <= t.
        let idx = match self.nodes.binary_search_by(|n| n.t.total_cmp(&t)) {
            Ok(i) => return Ok(self.nodes[i].z.clone()),
            Err(i) => i - 1,
        };
        let a = &self.nodes[idx];
        let b = &self.nodes[idx + 1];
        let h = b.t - a.t;
        let theta = (t - a.t) / h;
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok((0..a.z.len())
            .map(|i| h00 * a.z[i] + h10 * h * a.dz[i] + h01 * b.z[i] + h11 * h * b.dz[i])
            .collect())
    }
}

// Dormand-Prince 4(5) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA1: f64 = 0.7 / 4.0;
const BETA2: f64 = 0.4 / 4.0;
const FACTOR_MIN: f64 = 0.2;
const FACTOR_MAX: f64 = 5.0;

/// Integrates `field` from `t_start` to `t_end` starting at `z0`.
pub fn integrate(
    field: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    t_start: f64,
    z0: &[f64],
    t_end: f64,
    controls: &IntegratorControls,
) -> Result<Trajectory, IntegrateError> {
    if !(t_end > t_start) {
        return Err(IntegrateError::EmptyWindow { t_start, t_end });
    }
    let mut traj = match controls.method {
        Method::Rk4Fixed { h } => {
            if !(h > 0.0) {
                return Err(IntegrateError::BadControls(format!("h = {h} must be positive")));
            }
            rk4_fixed(field, t_start, z0, t_end, h, controls)
        }
        Method::DormandPrince { rtol, atol, h_init, h_max } => {
            if !(rtol > 0.0 && atol > 0.0 && h_init > 0.0 && h_max > 0.0) {
                return Err(IntegrateError::BadControls(
                    "rtol, atol, h_init, h_max must be positive".into(),
                ));
            }
            dopri45(field, t_start, z0, t_end, rtol, atol, h_init, h_max, controls)
        }
    }?;
    if let Some(times) = &controls.sample_times {
        insert_sample_times(&mut traj, field, times);
    }
    Ok(traj)
}

fn rk4_fixed(
    field: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    t_start: f64,
    z0: &[f64],
    t_end: f64,
    h: f64,
    controls: &IntegratorControls,
) -> Result<Trajectory, IntegrateError> {
    let mut t = t_start;
    let mut z = z0.to_vec();
    let mut dz = field(t, &z);
    let mut nodes = vec![Node { t, z: z.clone(), dz: dz.clone() }];
    let mut steps = 0usize;
    while t < t_end {
        if steps >= controls.max_steps {
            return Err(IntegrateError::MaxStepsExceeded {
                max_steps: controls.max_steps,
                last_time: t,
                partial: Trajectory { nodes, controls: controls.clone() },
            });
        }
        let step = h.min(t_end - t);
        let k1 = dz.clone();
        let k2 = field(t + 0.5 * step, &axpy(&z, 0.5 * step, &k1));
        let k3 = field(t + 0.5 * step, &axpy(&z, 0.5 * step, &k2));
        let k4 = field(t + step, &axpy(&z, step, &k3));
        for i in 0..z.len() {
            z[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += step;
        dz = field(t, &z);
        nodes.push(Node { t, z: z.clone(), dz: dz.clone() });
        steps += 1;
    }
    Ok(Trajectory { nodes, controls: controls.clone() })
}

#[allow(clippy::too_many_arguments)]
fn dopri45(
    field: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    t_start: f64,
    z0: &[f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
    h_init: f64,
    h_max: f64,
    controls: &IntegratorControls,
) -> Result<Trajectory, IntegrateError> {
    let n = z0.len();
    let h_floor = 1e-14 * (t_end - t_start).abs();

    let mut t = t_start;
    let mut z = z0.to_vec();
    let mut k1 = field(t, &z); // FSAL
    let mut nodes = vec![Node { t, z: z.clone(), dz: k1.clone() }];
    let mut h = h_init.min(h_max).min(t_end - t_start);
    let mut err_prev: f64 = 1.0;
    let mut attempts = 0usize;

    while t < t_end {
        if attempts >= controls.max_steps {
            return Err(IntegrateError::MaxStepsExceeded {
                max_steps: controls.max_steps,
                last_time: t,
                partial: Trajectory { nodes, controls: controls.clone() },
            });
        }
        if h < h_floor {
            return Err(IntegrateError::StepSizeUnderflow {
                h,
                last_time: t,
                partial: Trajectory { nodes, controls: controls.clone() },
            });
        }
        attempts += 1;
        let step = h.min(t_end - t);

        let mut k = vec![k1.clone()];
        for stage in 0..6 {
            let mut zs = z.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    for i in 0..n {
                        zs[i] += step * a * kj[i];
                    }
                }
            }
            k.push(field(t + C[stage + 1] * step, &zs));
        }

        let mut z5 = z.clone();
        let mut z4 = z.clone();
        for (j, kj) in k.iter().enumerate() {
            for i in 0..n {
                z5[i] += step * B5[j] * kj[i];
                z4[i] += step * B4[j] * kj[i];
            }
        }

        // Scaled RMS error norm; accept when <= 1.
        let mut err_sq = 0.0;
        for i in 0..n {
            let scale = atol + rtol * z[i].abs().max(z5[i].abs());
            let e = (z5[i] - z4[i]) / scale;
            err_sq += e * e;
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            t += step;
            z = z5;
            k1 = k.pop().unwrap(); // FSAL: k7 is the field at the new node
            nodes.push(Node { t, z: z.clone(), dz: k1.clone() });

            let e = err.max(1e-10);
            let factor =
                (SAFETY * e.powf(-BETA1) * err_prev.powf(BETA2)).clamp(FACTOR_MIN, FACTOR_MAX);
            h = (h * factor).min(h_max);
            err_prev = e;
        } else {
            let factor = (SAFETY * err.powf(-0.25)).clamp(FACTOR_MIN, 1.0);
            h *= factor;
        }
    }
    Ok(Trajectory { nodes, controls: controls.clone() })
}

fn axpy(z: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    z.iter().zip(k).map(|(zi, ki)| zi + a * ki).collect()
}

/// Materializes requested sample times as nodes, skipping times that already
/// coincide with accepted nodes. Inserted states come from dense evaluation;
/// their derivatives are the field at the interpolated state, preserving the
/// node invariant.
fn insert_sample_times(
    traj: &mut Trajectory,
    field: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    times: &[f64],
) {
    let mut extra = Vec::new();
    for &ts in times {
        if traj.nodes.binary_search_by(|n| n.t.total_cmp(&ts)).is_ok() {
            continue;
        }
        if let Ok(z) = traj.dense_eval(ts) {
            let dz = field(ts, &z);
            extra.push(Node { t: ts, z, dz });
        }
    }
    if extra.is_empty() {
        return;
    }
    traj.nodes.extend(extra);
    traj.nodes.sort_by(|a, b| a.t.total_cmp(&b.t));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm;

    fn decay(t: f64, z: &[f64]) -> Vec<f64> {
        let _ = t;
        z.iter().map(|x| -x).collect()
    }

    #[test]
    fn exponential_decay_adaptive() {
        let controls = IntegratorControls {
            method: Method::DormandPrince { rtol: 1e-10, atol: 1e-12, h_init: 1e-3, h_max: 1.0 },
            max_steps: 100_000,
            sample_times: None,
        };
        let traj = integrate(&decay, 0.0, &[1.0], 1.0, &controls).unwrap();
        let z = &traj.nodes.last().unwrap().z;
        assert!((z[0] - (-1.0_f64).exp()).abs() <= 1e-9, "got {}", z[0]);
    }

    #[test]
    fn rk4_order_four_richardson() {
        // Halving h cuts the max error by ~16 on ż = −z.
        let run = |h: f64| -> f64 {
            let traj = integrate(&decay, 0.0, &[1.0], 1.0, &IntegratorControls::rk4(h)).unwrap();
            traj.nodes
                .iter()
                .map(|n| (n.z[0] - (-n.t).exp()).abs())
                .fold(0.0_f64, f64::max)
        };
        let e1 = run(0.02);
        let e2 = run(0.01);
        let ratio = e1 / e2;
        assert!((12.0..=20.0).contains(&ratio), "order-4 ratio was {ratio}");
    }

    #[test]
    fn dense_eval_exact_at_nodes_and_errors_out_of_range() {
        let traj = integrate(&decay, 0.0, &[1.0], 1.0, &IntegratorControls::rk4(0.1)).unwrap();
        let n = &traj.nodes[3];
        assert_eq!(traj.dense_eval(n.t).unwrap(), n.z);
        assert!(traj.dense_eval(1.5).is_err());
        assert!(traj.dense_eval(-0.1).is_err());
    }

    #[test]
    fn dense_eval_hermite_accuracy_order_four() {
        // Midpoint dense error on a linear ODE is O(h^4).
        let h = 0.05;
        let traj = integrate(&decay, 0.0, &[1.0], 1.0, &IntegratorControls::rk4(h)).unwrap();
        for w in traj.nodes.windows(2) {
            let mid = 0.5 * (w[0].t + w[1].t);
            let z = traj.dense_eval(mid).unwrap();
            let exact = (-mid).exp();
            assert!((z[0] - exact).abs() <= 2.0 * h.powi(4), "err {}", (z[0] - exact).abs());
        }
    }

    #[test]
    fn dense_eval_continuous_across_nodes() {
        let controls = IntegratorControls {
            method: Method::DormandPrince { rtol: 1e-8, atol: 1e-10, h_init: 1e-3, h_max: 1.0 },
            max_steps: 100_000,
            sample_times: None,
        };
        let traj = integrate(&decay, 0.0, &[1.0], 5.0, &controls).unwrap();
        let eps = 1e-9;
        for n in traj.nodes.iter().skip(1).take(100) {
            let left = traj.dense_eval(n.t - eps).unwrap();
            let right = traj.dense_eval((n.t + eps).min(traj.end_time())).unwrap();
            assert!((left[0] - right[0]).abs() <= 1e-7);
        }
    }

    #[test]
    fn deterministic_node_lists() {
        let controls = IntegratorControls::dormand_prince(1e-9, 1e-12);
        let a = integrate(&decay, 0.0, &[1.0, 2.0], 3.0, &controls).unwrap();
        let b = integrate(&decay, 0.0, &[1.0, 2.0], 3.0, &controls).unwrap();
        assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn sample_times_materialized() {
        let mut controls = IntegratorControls::dormand_prince(1e-9, 1e-12);
        controls.sample_times = Some(vec![0.25, 0.5, 0.75]);
        let traj = integrate(&decay, 0.0, &[1.0], 1.0, &controls).unwrap();
        for ts in [0.25, 0.5, 0.75] {
            assert!(traj.nodes.iter().any(|n| n.t == ts));
        }
        for w in traj.nodes.windows(2) {
            assert!(w[0].t < w[1].t);
        }
    }

    #[test]
    fn max_steps_reported_with_last_node() {
        let controls = IntegratorControls {
            method: Method::DormandPrince { rtol: 1e-10, atol: 1e-12, h_init: 1e-6, h_max: 1e-6 },
            max_steps: 10,
            sample_times: None,
        };
        match integrate(&decay, 0.0, &[1.0], 1.0, &controls) {
            Err(IntegrateError::MaxStepsExceeded { partial, .. }) => {
                assert!(!partial.nodes.is_empty());
            }
            other => panic!("expected MaxStepsExceeded, got {other:?}"),
        }
    }

    #[test]
    fn stiff_oscillator_matches_closed_form() {
        // ÿ + 2ẏ + y = 0 with y(0)=1, ẏ(0)=0 gives y(t) = (1+t)e^{−t}.
        let field = |_t: f64, z: &[f64]| vec![z[1], -2.0 * z[1] - z[0]];
        let controls = IntegratorControls::dormand_prince(1e-10, 1e-12);
        let traj = integrate(&field, 0.0, &[1.0, 0.0], 10.0, &controls).unwrap();
        let mut worst = 0.0_f64;
        for n in &traj.nodes {
            worst = worst.max((n.z[0] - (1.0 + n.t) * (-n.t).exp()).abs());
        }
        assert!(worst <= 1e-8, "max error {worst}");
        assert!(norm(&traj.nodes.last().unwrap().z) < 1e-3);
    }
}
