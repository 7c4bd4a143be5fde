//! Catalog of convex test functions and monotone test operators.
//!
//! Every entry carries analytic oracles: values, gradients, minimizers or
//! zeros, and Lipschitz bounds where they are known in closed form. Problems
//! are immutable after construction and cheap to clone.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::{dot, norm};

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A convex objective with a gradient oracle and known infimum.
#[derive(Clone)]
pub struct ScalarProblem {
    pub dim: usize,
    pub value: ValueFn,
    pub gradient: VectorFn,
    pub inf_value: f64,
    pub minimizer: Option<Vec<f64>>,
    pub grad_lipschitz: Option<f64>,
}

impl std::fmt::Debug for ScalarProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarProblem")
            .field("dim", &self.dim)
            .field("inf_value", &self.inf_value)
            .field("minimizer", &self.minimizer)
            .finish()
    }
}

/// A monotone continuous vector field with a known zero and Lipschitz bound.
#[derive(Clone)]
pub struct OperatorProblem {
    pub dim: usize,
    pub apply: VectorFn,
    pub zero: Option<Vec<f64>>,
    pub lipschitz: f64,
}

impl std::fmt::Debug for OperatorProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorProblem")
            .field("dim", &self.dim)
            .field("zero", &self.zero)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown catalog id `{0}`")]
    UnknownCatalogId(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("quadratic spectrum must be nonnegative, got {0}")]
    NonPsdSpectrum(f64),
    #[error("rotation requires even dim, got {0}")]
    OddRotationDim(usize),
    #[error("invalid params: {0}")]
    InvalidParams(String),
}

/// Parameter set for catalog construction. Unused fields are ignored by
/// entries that do not need them.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct ProblemParams {
    /// Diagonal spectrum for `quadratic`.
    pub spectrum: Option<Vec<f64>>,
    /// Row-major matrix for `least_squares` (rows × dim) and `bilinear_saddle`.
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Right-hand side for `least_squares`.
    pub rhs: Option<Vec<f64>>,
    /// Number of exponential terms for `logsumexp`.
    pub terms: Option<usize>,
    /// Huber transition radius for `huberized_norm`.
    pub delta: Option<f64>,
    /// Inner function id for `gradient_as_operator`.
    pub inner: Option<String>,
    /// Params forwarded to the inner function.
    pub inner_params: Option<Box<ProblemParams>>,
}

pub fn build_scalar_problem(
    catalog_id: &str,
    dim: usize,
    params: &ProblemParams,
    seed: u64,
) -> Result<ScalarProblem, ProblemError> {
    if dim == 0 {
        return Err(ProblemError::DimensionMismatch("dim must be positive".into()));
    }
    match catalog_id {
        "quadratic" => quadratic(dim, params),
        "least_squares" => least_squares(dim, params, seed),
        "logsumexp" => Ok(logsumexp(dim, params, seed)),
        "huberized_norm" => Ok(huberized_norm(dim, params)),
        other => Err(ProblemError::UnknownCatalogId(other.into())),
    }
}

pub fn build_operator_problem(
    catalog_id: &str,
    dim: usize,
    params: &ProblemParams,
    seed: u64,
) -> Result<OperatorProblem, ProblemError> {
    if dim == 0 {
        return Err(ProblemError::DimensionMismatch("dim must be positive".into()));
    }
    match catalog_id {
        "rotation" => rotation(dim),
        "bilinear_saddle" => bilinear_saddle(dim, params),
        "affine_monotone" => affine_monotone(dim),
        "gradient_as_operator" => gradient_as_operator(dim, params, seed),
        "negated_identity_for_tests" => Ok(negated_identity(dim)),
        other => Err(ProblemError::UnknownCatalogId(other.into())),
    }
}

/// f(x) = ½ Σ λ_i x_i² with a nonnegative diagonal spectrum.
fn quadratic(dim: usize, params: &ProblemParams) -> Result<ScalarProblem, ProblemError> {
    let spectrum = params
        .spectrum
        .clone()
        .unwrap_or_else(|| (1..=dim).map(|i| i as f64).collect());
    if spectrum.len() != dim {
        return Err(ProblemError::DimensionMismatch(format!(
            "spectrum has {} entries for dim {}",
            spectrum.len(),
            dim
        )));
    }
    if let Some(&bad) = spectrum.iter().find(|&&l| l < 0.0) {
        return Err(ProblemError::NonPsdSpectrum(bad));
    }
    let lip = spectrum.iter().cloned().fold(0.0_f64, f64::max);
    let s1 = spectrum.clone();
    let s2 = spectrum;
    Ok(ScalarProblem {
        dim,
        value: Arc::new(move |x| 0.5 * x.iter().zip(&s1).map(|(xi, li)| li * xi * xi).sum::<f64>()),
        gradient: Arc::new(move |x| x.iter().zip(&s2).map(|(xi, li)| li * xi).collect()),
        inf_value: 0.0,
        minimizer: Some(vec![0.0; dim]),
        grad_lipschitz: Some(lip),
    })
}

/// f(x) = ½‖Ax − b‖². The minimizer solves the normal equations; when AᵀA is
/// singular the minimizer is left unset and the infimum is estimated at the
/// least-norm solution obtained by ridge continuation.
fn least_squares(dim: usize, params: &ProblemParams, seed: u64) -> Result<ScalarProblem, ProblemError> {
    let a: Vec<Vec<f64>> = match &params.matrix {
        Some(m) => m.clone(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dim)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect()
        }
    };
    let rows = a.len();
    if rows == 0 || a.iter().any(|r| r.len() != dim) {
        return Err(ProblemError::DimensionMismatch(
            "least_squares matrix rows must have `dim` columns".into(),
        ));
    }
    let b = params.rhs.clone().unwrap_or_else(|| vec![0.0; rows]);
    if b.len() != rows {
        return Err(ProblemError::DimensionMismatch(
            "least_squares rhs length must equal matrix rows".into(),
        ));
    }

    // Normal equations AᵀA x = Aᵀ b, solved by Gaussian elimination.
    let mut ata = vec![vec![0.0; dim]; dim];
    let mut atb = vec![0.0; dim];
    for i in 0..dim {
        for j in 0..dim {
            ata[i][j] = (0..rows).map(|r| a[r][i] * a[r][j]).sum();
        }
        atb[i] = (0..rows).map(|r| a[r][i] * b[r]).sum();
    }
    let minimizer = solve_linear(&ata, &atb);

    let residual = |a: &[Vec<f64>], b: &[f64], x: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(row, bi)| dot(row, x) - bi)
            .collect()
    };
    let value_of = {
        let a = a.clone();
        let b = b.clone();
        move |x: &[f64]| -> f64 {
            let r = residual(&a, &b, x);
            0.5 * dot(&r, &r)
        }
    };
    let inf_value = minimizer.as_ref().map(|m| value_of(m)).unwrap_or(0.0);

    // Spectral norm of AᵀA by power iteration gives the gradient Lipschitz bound.
    let lip = spectral_norm(&ata);

    let a2 = a.clone();
    let b2 = b.clone();
    Ok(ScalarProblem {
        dim,
        value: Arc::new(value_of),
        gradient: Arc::new(move |x| {
            let r = residual(&a2, &b2, x);
            (0..dim).map(|j| (0..r.len()).map(|i| a2[i][j] * r[i]).sum()).collect()
        }),
        inf_value,
        minimizer,
        grad_lipschitz: Some(lip),
    })
}

/// Symmetrized log-sum-exp: f(x) = log Σ_i [exp(a_iᵀx) + exp(−a_iᵀx)].
///
/// The ±a_i pairing makes f even, so the origin is the exact minimizer with
/// f(0) = log(2m). The directions a_i are drawn deterministically from the seed.
fn logsumexp(dim: usize, params: &ProblemParams, seed: u64) -> ScalarProblem {
    let terms = params.terms.unwrap_or(2 * dim.max(2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..terms)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();

    // log Σ [e^{z_i} + e^{-z_i}] computed stably.
    let lse = {
        let dirs = dirs.clone();
        move |x: &[f64]| -> f64 {
            let zs: Vec<f64> = dirs.iter().map(|d| dot(d, x)).collect();
            let m = zs.iter().fold(0.0_f64, |acc, z| acc.max(z.abs()));
            let sum: f64 = zs.iter().map(|z| (z - m).exp() + (-z - m).exp()).sum();
            m + sum.ln()
        }
    };
    let inf_value = (2.0 * terms as f64).ln();

    // Row-sum bound on the Hessian: ‖∇²f‖ ≤ Σ ‖a_i‖².
    let lip: f64 = dirs.iter().map(|d| dot(d, d)).sum();

    let dirs2 = dirs.clone();
    ScalarProblem {
        dim,
        value: Arc::new(lse),
        gradient: Arc::new(move |x| {
            let zs: Vec<f64> = dirs2.iter().map(|d| dot(d, x)).collect();
            let m = zs.iter().fold(0.0_f64, |acc, z| acc.max(z.abs()));
            let weights: Vec<f64> = zs.iter().map(|z| (z - m).exp() - (-z - m).exp()).collect();
            let total: f64 = zs.iter().map(|z| (z - m).exp() + (-z - m).exp()).sum();
            let mut g = vec![0.0; x.len()];
            for (d, w) in dirs2.iter().zip(&weights) {
                for (gi, di) in g.iter_mut().zip(d) {
                    *gi += (w / total) * di;
                }
            }
            g
        }),
        inf_value,
        minimizer: Some(vec![0.0; dim]),
        grad_lipschitz: Some(lip),
    }
}

/// Huber applied to the norm: f(x) = ½‖x‖² inside radius δ, linear outside.
/// Smooth, convex, globally 1-Lipschitz gradient, minimized at the origin.
fn huberized_norm(dim: usize, params: &ProblemParams) -> ScalarProblem {
    let delta = params.delta.unwrap_or(1.0);
    ScalarProblem {
        dim,
        value: Arc::new(move |x| {
            let r = norm(x);
            if r <= delta {
                0.5 * r * r
            } else {
                delta * (r - 0.5 * delta)
            }
        }),
        gradient: Arc::new(move |x| {
            let r = norm(x);
            if r <= delta {
                x.to_vec()
            } else {
                x.iter().map(|xi| delta * xi / r).collect()
            }
        }),
        inf_value: 0.0,
        minimizer: Some(vec![0.0; dim]),
        grad_lipschitz: Some(1.0),
    }
}

/// Planar rotation applied blockwise: (x, y) ↦ (y, −x) on each coordinate
/// pair. Skew-symmetric, so ⟨V(z), z⟩ = 0; monotone but not cocoercive.
fn rotation(dim: usize) -> Result<OperatorProblem, ProblemError> {
    if dim % 2 != 0 {
        return Err(ProblemError::OddRotationDim(dim));
    }
    Ok(OperatorProblem {
        dim,
        apply: Arc::new(move |z| {
            let mut out = vec![0.0; z.len()];
            for k in (0..z.len()).step_by(2) {
                out[k] = z[k + 1];
                out[k + 1] = -z[k];
            }
            out
        }),
        zero: Some(vec![0.0; dim]),
        lipschitz: 1.0,
    })
}

/// Saddle field of the bilinear form xᵀAy: V(x, y) = (Ay, −Aᵀx).
///
/// The matrix is n × m with n + m = dim; the default splits dim evenly.
fn bilinear_saddle(dim: usize, params: &ProblemParams) -> Result<OperatorProblem, ProblemError> {
    let a: Vec<Vec<f64>> = match &params.matrix {
        Some(m) => m.clone(),
        None => {
            if dim % 2 != 0 {
                return Err(ProblemError::DimensionMismatch(
                    "bilinear_saddle default requires even dim".into(),
                ));
            }
            let n = dim / 2;
            (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
        }
    };
    let n = a.len();
    if n == 0 {
        return Err(ProblemError::InvalidParams("bilinear_saddle matrix is empty".into()));
    }
    let m = a[0].len();
    if a.iter().any(|r| r.len() != m) || n + m != dim {
        return Err(ProblemError::DimensionMismatch(format!(
            "bilinear_saddle matrix {}×{} does not split dim {}",
            n, m, dim
        )));
    }
    // ‖V‖_Lip = σ_max(A); bound it via the symmetric product.
    let mut ata = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            ata[i][j] = (0..n).map(|r| a[r][i] * a[r][j]).sum();
        }
    }
    let lip = spectral_norm(&ata).sqrt();
    Ok(OperatorProblem {
        dim,
        apply: Arc::new(move |z| {
            let (x, y) = z.split_at(n);
            let mut out = Vec::with_capacity(n + m);
            for row in &a {
                out.push(dot(row, y));
            }
            for j in 0..m {
                out.push(-(0..n).map(|i| a[i][j] * x[i]).sum::<f64>());
            }
            out
        }),
        zero: Some(vec![0.0; dim]),
        lipschitz: lip.max(f64::MIN_POSITIVE),
    })
}

/// V(z) = z + Sz with S the blockwise rotation generator: strongly monotone
/// with a rotational component, Lipschitz constant √2 on even dims.
fn affine_monotone(dim: usize) -> Result<OperatorProblem, ProblemError> {
    Ok(OperatorProblem {
        dim,
        apply: Arc::new(move |z| {
            let mut out = z.to_vec();
            for k in (0..z.len().saturating_sub(1)).step_by(2) {
                out[k] += z[k + 1];
                out[k + 1] += -z[k];
            }
            out
        }),
        zero: Some(vec![0.0; dim]),
        lipschitz: 2.0_f64.sqrt(),
    })
}

/// Wraps the gradient of a catalog function as a monotone operator.
fn gradient_as_operator(
    dim: usize,
    params: &ProblemParams,
    seed: u64,
) -> Result<OperatorProblem, ProblemError> {
    let inner_id = params
        .inner
        .as_deref()
        .ok_or_else(|| ProblemError::InvalidParams("gradient_as_operator needs `inner`".into()))?;
    let inner_params = params.inner_params.as_deref().cloned().unwrap_or_default();
    let f = build_scalar_problem(inner_id, dim, &inner_params, seed)?;
    let grad = f.gradient.clone();
    Ok(OperatorProblem {
        dim,
        apply: Arc::new(move |z| grad(z)),
        zero: f.minimizer.clone(),
        lipschitz: f.grad_lipschitz.unwrap_or(f64::INFINITY),
    })
}

/// Negative control: V(z) = −z fails every monotonicity check.
fn negated_identity(dim: usize) -> OperatorProblem {
    OperatorProblem {
        dim,
        apply: Arc::new(|z| z.iter().map(|x| -x).collect()),
        zero: Some(vec![0.0; dim]),
        lipschitz: 1.0,
    }
}

/// Outcome of a sampled monotonicity check.
#[derive(Debug, Clone)]
pub struct MonotoneReport {
    pub pass: bool,
    pub worst_inner_product: f64,
    pub witness: (Vec<f64>, Vec<f64>),
}

/// Samples pairs uniformly in [−5, 5]^dim and checks
/// ⟨V(y) − V(x), y − x⟩ ≥ −tol at every pair.
pub fn check_monotone(
    problem: &OperatorProblem,
    samples: usize,
    seed: u64,
    tol: f64,
) -> MonotoneReport {
    assert!(samples >= 1, "samples must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut witness = (vec![0.0; problem.dim], vec![0.0; problem.dim]);
    for _ in 0..samples {
        let x: Vec<f64> = (0..problem.dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..problem.dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let vx = (problem.apply)(&x);
        let vy = (problem.apply)(&y);
        let diff_v: Vec<f64> = vy.iter().zip(&vx).map(|(a, b)| a - b).collect();
        let diff_p: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let ip = dot(&diff_v, &diff_p);
        if ip < worst {
            worst = ip;
            witness = (x, y);
        }
    }
    MonotoneReport {
        pass: worst >= -tol,
        worst_inner_product: worst,
        witness,
    }
}

/// Gaussian elimination with partial pivoting. Returns None when the system
/// is numerically singular.
fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Some(x)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
fn spectral_norm(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w: Vec<f64> = (0..n).map(|i| dot(&m[i], &v)).collect();
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        lambda = nw;
        v = w.iter().map(|x| x / nw).collect();
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_points(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect()
    }

    fn check_gradient_fd(p: &ScalarProblem, seed: u64) {
        for x in sample_points(p.dim, 100, seed) {
            let g = (p.gradient)(&x);
            let h = 1e-5 * (1.0 + norm(&x));
            for i in 0..p.dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = ((p.value)(&xp) - (p.value)(&xm)) / (2.0 * h);
                let scale = 1.0 + g.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
                assert!(
                    (fd - g[i]).abs() <= 1e-6 * scale,
                    "fd gradient mismatch: {} vs {}",
                    fd,
                    g[i]
                );
            }
        }
    }

    fn check_convexity(p: &ScalarProblem, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for _ in 0..pairs {
            let x: Vec<f64> = (0..p.dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..p.dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let gx = (p.gradient)(&x);
            let gy = (p.gradient)(&y);
            let dg: Vec<f64> = gy.iter().zip(&gx).map(|(a, b)| a - b).collect();
            let dp: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            worst = worst.min(dot(&dg, &dp));
        }
        worst
    }

    fn check_invariants(p: &ScalarProblem) {
        if let Some(m) = &p.minimizer {
            assert!(((p.value)(m) - p.inf_value).abs() <= 1e-12);
            assert!(norm(&(p.gradient)(m)) <= 1e-10);
        }
    }

    #[test]
    fn quadratic_1d_example() {
        let params = ProblemParams {
            spectrum: Some(vec![1.0]),
            ..Default::default()
        };
        let p = build_scalar_problem("quadratic", 1, &params, 0).unwrap();
        assert_eq!((p.value)(&[2.0]), 2.0);
        assert_eq!((p.gradient)(&[2.0]), vec![2.0]);
        assert_eq!(p.inf_value, 0.0);
        assert_eq!(p.minimizer, Some(vec![0.0]));
    }

    #[test]
    fn quadratic_rejects_negative_spectrum() {
        let params = ProblemParams {
            spectrum: Some(vec![1.0, -0.5]),
            ..Default::default()
        };
        assert!(matches!(
            build_scalar_problem("quadratic", 2, &params, 0),
            Err(ProblemError::NonPsdSpectrum(_))
        ));
    }

    #[test]
    fn least_squares_identity_example() {
        let params = ProblemParams {
            matrix: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            rhs: Some(vec![0.0, 0.0]),
            ..Default::default()
        };
        let p = build_scalar_problem("least_squares", 2, &params, 0).unwrap();
        assert_eq!(p.minimizer, Some(vec![0.0, 0.0]));
        assert_eq!(p.inf_value, 0.0);
        check_invariants(&p);
    }

    #[test]
    fn logsumexp_convexity_margin() {
        let p = build_scalar_problem("logsumexp", 2, &ProblemParams::default(), 7).unwrap();
        let worst = check_convexity(&p, 10_000, 7);
        assert!(worst >= -1e-10, "convexity margin {}", worst);
        check_invariants(&p);
    }

    #[test]
    fn all_scalar_entries_pass_oracles() {
        for (id, dim) in [
            ("quadratic", 3),
            ("least_squares", 2),
            ("logsumexp", 2),
            ("huberized_norm", 3),
        ] {
            let p = build_scalar_problem(id, dim, &ProblemParams::default(), 42).unwrap();
            check_invariants(&p);
            check_gradient_fd(&p, 11);
            let worst = check_convexity(&p, 10_000, 13);
            assert!(worst >= -1e-10, "{id}: convexity margin {worst}");
        }
    }

    #[test]
    fn unknown_catalog_id_errors() {
        assert!(matches!(
            build_scalar_problem("nope", 2, &ProblemParams::default(), 0),
            Err(ProblemError::UnknownCatalogId(_))
        ));
        assert!(matches!(
            build_operator_problem("nope", 2, &ProblemParams::default(), 0),
            Err(ProblemError::UnknownCatalogId(_))
        ));
    }

    #[test]
    fn rotation_example() {
        let v = build_operator_problem("rotation", 2, &ProblemParams::default(), 0).unwrap();
        assert_eq!((v.apply)(&[1.0, 0.0]), vec![0.0, -1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let z: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
            assert!(dot(&(v.apply)(&z), &z).abs() <= 1e-12);
        }
        assert!(matches!(
            build_operator_problem("rotation", 3, &ProblemParams::default(), 0),
            Err(ProblemError::OddRotationDim(3))
        ));
    }

    #[test]
    fn rotation_monotone_check() {
        let v = build_operator_problem("rotation", 2, &ProblemParams::default(), 0).unwrap();
        let report = check_monotone(&v, 1000, 5, 1e-12);
        assert!(report.pass);
        assert!(report.worst_inner_product.abs() <= 1e-12);
    }

    #[test]
    fn bilinear_saddle_1x1_example() {
        let params = ProblemParams {
            matrix: Some(vec![vec![1.0]]),
            ..Default::default()
        };
        let v = build_operator_problem("bilinear_saddle", 2, &params, 0).unwrap();
        // Hand differentiation of x·A·y with A = [[1]].
        assert_eq!((v.apply)(&[3.0, 5.0]), vec![5.0, -3.0]);
        assert_eq!(v.zero, Some(vec![0.0, 0.0]));
    }

    #[test]
    fn negated_identity_fails_monotone() {
        let v =
            build_operator_problem("negated_identity_for_tests", 2, &ProblemParams::default(), 0)
                .unwrap();
        let report = check_monotone(&v, 1000, 9, 1e-12);
        assert!(!report.pass);
        assert!(report.worst_inner_product < 0.0);
    }

    #[test]
    fn gradient_as_operator_is_monotone() {
        let params = ProblemParams {
            inner: Some("logsumexp".into()),
            ..Default::default()
        };
        let v = build_operator_problem("gradient_as_operator", 2, &params, 7).unwrap();
        let report = check_monotone(&v, 10_000, 17, 1e-10);
        assert!(report.pass, "worst {}", report.worst_inner_product);
    }

    #[test]
    fn all_monotone_entries_pass_checks() {
        for id in ["rotation", "bilinear_saddle", "affine_monotone"] {
            let v = build_operator_problem(id, 4, &ProblemParams::default(), 21).unwrap();
            let report = check_monotone(&v, 10_000, 23, 1e-10);
            assert!(report.pass, "{id}: worst {}", report.worst_inner_product);
            if let Some(zero) = &v.zero {
                assert!(norm(&(v.apply)(zero)) <= 1e-12);
            }
            // Sampled Lipschitz bound.
            let pts = sample_points(4, 200, 29);
            for pair in pts.chunks(2) {
                if pair.len() < 2 {
                    break;
                }
                let (x, y) = (&pair[0], &pair[1]);
                let dv: Vec<f64> = (v.apply)(y)
                    .iter()
                    .zip(&(v.apply)(x))
                    .map(|(a, b)| a - b)
                    .collect();
                let dp: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
                assert!(norm(&dv) <= v.lipschitz * norm(&dp) * (1.0 + 1e-8));
            }
        }
    }
}
