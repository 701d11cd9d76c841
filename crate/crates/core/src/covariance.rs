//! Steady-state estimation-error covariance under Bernoulli scheduling.
//!
//! With withholding probabilities `(p, q)` the stacked error covariance obeys
//! `Σₖ₊₁ = Σᵢ Aᵢ Σₖ Aᵢᵀ + G(p, q)`. Writing `Y = Φ X Φᵀ`, the map collapses to
//! a Hadamard product `T(X) = W ∘ Y` with `W = [[p, pq], [pq, q]]` blockwise,
//! which is what the Neumann iteration uses. The explicit `Aᵢ` are kept for
//! the Kronecker solve so the two solvers share no arithmetic.

use serde::Serialize;

use crate::error::CovarianceError;
use crate::linalg::{self, Mat};
use crate::model::DiscretizedModel;

/// Above this size (`2n`) the spectral radius switches from dense
/// eigenvalues of the Kronecker matrix to power iteration.
pub const DENSE_RHO_MAX_DIM: usize = 12;
/// Truncation used when none is given.
pub const DEFAULT_TP: usize = 400;

const POWER_MAX_ITERS: usize = 200_000;
const POWER_TOL: f64 = 1e-14;

/// Per-tick withholding probabilities: player 1 stays silent with
/// probability `p`, player 2 with probability `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchedulingPolicy {
    pub p: f64,
    pub q: f64,
}

impl SchedulingPolicy {
    pub fn new(p: f64, q: f64) -> Result<Self, CovarianceError> {
        if (0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q) {
            Ok(Self { p, q })
        } else {
            Err(CovarianceError::Policy { p, q })
        }
    }

    /// Per-tick transmission probabilities `(1 − p, 1 − q)`.
    pub fn transmit(&self) -> (f64, f64) {
        (1.0 - self.p, 1.0 - self.q)
    }
}

/// The linear map and forcing of the covariance recursion at one policy.
///
/// The `√(p(1−p))` factor of `A2` has an unbounded derivative at `p ∈ {0, 1}`,
/// so `da2dp` (and likewise `da3dq`) is `None` there. The products
/// `Aᵢ X Aᵢᵀ` stay smooth; [`CovOperators::transfer_dp`] differentiates those.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovOperators {
    pub n: usize,
    pub policy: SchedulingPolicy,
    pub phi: Mat,
    pub a1: Mat,
    pub a2: Mat,
    pub a3: Mat,
    pub gpq: Mat,
    pub da1dp: Mat,
    pub da2dp: Option<Mat>,
    pub da3dp: Mat,
    pub dgdp: Mat,
    pub da1dq: Mat,
    pub da2dq: Mat,
    pub da3dq: Option<Mat>,
    pub dgdq: Mat,
    gtilde: Mat,
}

/// `[[a, b], [b, c]]` with every block of size `n × n` filled with one value.
fn block_weights(n: usize, a: f64, b: f64, c: f64) -> Mat {
    Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => a,
        (false, false) => c,
        _ => b,
    })
}

fn top_rows(n: usize, m: &Mat) -> Mat {
    let mut out = m.clone();
    out.view_mut((n, 0), (n, 2 * n)).fill(0.0);
    out
}

fn bottom_rows(n: usize, m: &Mat) -> Mat {
    let mut out = m.clone();
    out.view_mut((0, 0), (n, 2 * n)).fill(0.0);
    out
}

/// Builds `A1, A2, A3, G(p, q)` and their partial derivatives.
pub fn build_operators(disc: &DiscretizedModel, policy: SchedulingPolicy) -> CovOperators {
    let n = disc.n;
    let SchedulingPolicy { p, q } = policy;
    let phi = disc.phi.clone();
    let top = top_rows(n, &phi);
    let bottom = bottom_rows(n, &phi);
    let gtilde = disc.gtilde();
    let zero = Mat::zeros(2 * n, 2 * n);

    let sp = (p * (1.0 - p)).sqrt();
    let sq = (q * (1.0 - q)).sqrt();
    let interior = |x: f64| x > 0.0 && x < 1.0;
    let dsqrt = |x: f64| (1.0 - 2.0 * x) / (2.0 * (x * (1.0 - x)).sqrt());

    CovOperators {
        n,
        policy,
        a1: &top * p + &bottom * q,
        a2: &top * sp,
        a3: &bottom * sq,
        gpq: block_weights(n, p, p * q, q).component_mul(&gtilde),
        da1dp: top.clone(),
        da2dp: interior(p).then(|| &top * dsqrt(p)),
        da3dp: zero.clone(),
        dgdp: block_weights(n, 1.0, q, 0.0).component_mul(&gtilde),
        da1dq: bottom.clone(),
        da2dq: zero,
        da3dq: interior(q).then(|| &bottom * dsqrt(q)),
        dgdq: block_weights(n, 0.0, p, 1.0).component_mul(&gtilde),
        phi,
        gtilde,
    }
}

impl CovOperators {
    fn weights(&self) -> Mat {
        let SchedulingPolicy { p, q } = self.policy;
        block_weights(self.n, p, p * q, q)
    }

    /// `T(X) = Σᵢ Aᵢ X Aᵢᵀ`, evaluated as `W ∘ (Φ X Φᵀ)`.
    pub fn transfer(&self, x: &Mat) -> Mat {
        self.weights().component_mul(&(&self.phi * x * self.phi.transpose()))
    }

    /// `Σᵢ Aᵢ X Aᵢᵀ` summed term by term.
    pub fn transfer_explicit(&self, x: &Mat) -> Mat {
        [&self.a1, &self.a2, &self.a3]
            .iter()
            .map(|a| *a * x * a.transpose())
            .fold(Mat::zeros(x.nrows(), x.ncols()), |acc, t| acc + t)
    }

    /// `∂T(X)/∂p`
    pub fn transfer_dp(&self, x: &Mat) -> Mat {
        let q = self.policy.q;
        block_weights(self.n, 1.0, q, 0.0).component_mul(&(&self.phi * x * self.phi.transpose()))
    }

    /// `∂T(X)/∂q`
    pub fn transfer_dq(&self, x: &Mat) -> Mat {
        let p = self.policy.p;
        block_weights(self.n, 0.0, p, 1.0).component_mul(&(&self.phi * x * self.phi.transpose()))
    }

    /// `Σᵢ Aᵢ ⊗ Aᵢ`, so that `vec T(X) = K vec X`.
    pub fn kronecker(&self) -> Mat {
        linalg::kron(&self.a1, &self.a1) + linalg::kron(&self.a2, &self.a2) + linalg::kron(&self.a3, &self.a3)
    }

    /// `[[G̃1, G̃2], [G̃2ᵀ, G̃3]]` of the underlying model.
    pub fn gtilde(&self) -> &Mat {
        &self.gtilde
    }
}

/// Spectral radius of `X ↦ Σᵢ Aᵢ X Aᵢᵀ`.
pub fn spectral_radius(ops: &CovOperators) -> f64 {
    if 2 * ops.n <= DENSE_RHO_MAX_DIM {
        if let Some(rho) = linalg::max_abs_eigenvalue(&ops.kronecker()) {
            return rho;
        }
    }
    spectral_radius_power(ops)
}

/// Power iteration from the identity.
///
/// The map is completely positive, so its spectral radius is attained by a
/// PSD eigenvector and the trace ratio of successive iterates converges to it.
pub fn spectral_radius_power(ops: &CovOperators) -> f64 {
    let dim = 2 * ops.n;
    let mut x = Mat::identity(dim, dim) / (dim as f64);
    let mut est = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let y = linalg::sym(&ops.transfer(&x));
        let t = y.trace();
        if t <= f64::MIN_POSITIVE {
            return 0.0;
        }
        let next = t / x.trace();
        x = y / t;
        if (next - est).abs() <= POWER_TOL * next {
            return next;
        }
        est = next;
    }
    est
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub sigma: Mat,
    pub rho: f64,
    /// `‖G(p,q)‖₂ ρ^(tp+1) / (1 − ρ)`. This bounds the 2-norm truncation
    /// error when `‖Tʲ‖ ≤ ρʲ` (normal `T`); for non-normal `T` it is only an
    /// estimate of the decay.
    pub bound: f64,
    pub tp: usize,
    pub converged: bool,
    /// Frobenius norm of `Σ − T(Σ) − G(p,q)`.
    pub residual: f64,
}

/// Partial Neumann sum `Σ_{j ≤ tp} Tʲ(G(p,q))`.
pub fn steady_state_neumann(ops: &CovOperators, tp: usize) -> Result<SteadyState, CovarianceError> {
    let rho = spectral_radius(ops);
    if !(rho < 1.0) {
        return Err(CovarianceError::Divergent { rho });
    }
    let sigma = neumann_sum(ops, &ops.gpq, tp);
    let bound = linalg::spectral_norm(&ops.gpq) * rho.powi(tp as i32 + 1) / (1.0 - rho);
    let residual = (&sigma - ops.transfer(&sigma) - &ops.gpq).norm();
    Ok(SteadyState {
        sigma,
        rho,
        bound,
        tp,
        converged: true,
        residual,
    })
}

fn neumann_sum(ops: &CovOperators, forcing: &Mat, tp: usize) -> Mat {
    let mut y = linalg::sym(forcing);
    let mut sum = y.clone();
    for _ in 0..tp {
        y = linalg::sym(&ops.transfer(&y));
        if y.amax() == 0.0 {
            break;
        }
        sum += &y;
        sum = linalg::sym(&sum);
    }
    sum
}

/// Solves `(I − Σᵢ Aᵢ ⊗ Aᵢ) vec Σ = vec G(p,q)` densely.
pub fn steady_state_direct(ops: &CovOperators) -> Result<Mat, CovarianceError> {
    solve_direct(ops, &ops.gpq)
}

fn solve_direct(ops: &CovOperators, forcing: &Mat) -> Result<Mat, CovarianceError> {
    let dim = 2 * ops.n;
    let k = ops.kronecker();
    let sys = Mat::identity(dim * dim, dim * dim) - k;
    let x = sys.lu().solve(&linalg::vec(forcing)).ok_or(CovarianceError::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CovarianceError::Singular);
    }
    Ok(linalg::sym(&linalg::unvec(&x, dim, dim)))
}

/// `k` steps of the covariance recursion from `sigma0`.
pub fn iterate_covariance(ops: &CovOperators, sigma0: &Mat, k: usize) -> Mat {
    let mut s = sigma0.clone();
    for _ in 0..k {
        s = linalg::sym(&(ops.transfer(&s) + &ops.gpq));
    }
    s
}

/// How fixed points of the covariance map are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Solver {
    Neumann { tp: usize },
    Direct,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Neumann { tp: DEFAULT_TP }
    }
}

/// Solves `X = T(X) + forcing` after checking `ρ < 1`.
pub fn solve_fixed_point(ops: &CovOperators, forcing: &Mat, solver: Solver) -> Result<Mat, CovarianceError> {
    let rho = spectral_radius(ops);
    if !(rho < 1.0) {
        return Err(CovarianceError::Divergent { rho });
    }
    solve_unchecked(ops, forcing, solver)
}

/// [`solve_fixed_point`] without the spectral-radius check.
pub(crate) fn solve_unchecked(ops: &CovOperators, forcing: &Mat, solver: Solver) -> Result<Mat, CovarianceError> {
    match solver {
        Solver::Neumann { tp } => Ok(neumann_sum(ops, forcing, tp)),
        Solver::Direct => solve_direct(ops, forcing),
    }
}

/// `Σ∞` at a policy with the chosen solver.
pub fn steady_state(
    disc: &DiscretizedModel,
    policy: SchedulingPolicy,
    solver: Solver,
) -> Result<(CovOperators, Mat), CovarianceError> {
    let ops = build_operators(disc, policy);
    let sigma = solve_fixed_point(&ops, &ops.gpq, solver)?;
    Ok((ops, sigma))
}
