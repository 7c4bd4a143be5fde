//! Inertial dynamics for convex minimization and monotone equations.
//!
//! This crate simulates four second-order systems through their first-order
//! reformulations:
//!
//! * `HBF_function` — Heavy Ball with constant friction `λ` and a growing
//!   scaling `b(t)` on the gradient,
//! * `AVD_function` — the Su–Boyd–Candès system with vanishing damping `α/s`,
//! * `HB_operator` — a Heavy Ball system for monotone equations with a
//!   correction term scaled by `μ(t)` and `γ(t)`,
//! * `FOGDA_operator` — the Fast OGDA dynamics specialized to `β ≡ 1`.
//!
//! On top of the integrator it provides energy/Lyapunov monitoring, parameter
//! assumption validation, convergence-rate certification, and the closed-form
//! time maps that turn the Heavy Ball systems into their vanishing-damping
//! twins.

pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod integrator;
pub mod problems;
pub mod rescaling;

/// Euclidean norm of a slice.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Inner product of two slices of equal length.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
