use serde::Serialize;

use crate::covariance::{
    build_operators, solve_fixed_point, solve_unchecked, spectral_radius, CovOperators, SchedulingPolicy, Solver,
};
use crate::error::CovarianceError;
use crate::linalg::{self, Mat};
use crate::model::{CommCosts, DiscretizedModel};

/// Which withholding probability a derivative is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Which {
    P,
    Q,
}

/// `∂Σ∞/∂p` or `∂Σ∞/∂q`.
///
/// Differentiating the fixed-point equation gives `Σ' = T(Σ') + K` with
/// `K = ∂T/∂·(Σ∞) + ∂G/∂·`, solved with the same machinery as `Σ∞`.
pub fn grad_sigma(ops: &CovOperators, sigma: &Mat, which: Which, solver: Solver) -> Result<Mat, CovarianceError> {
    let forcing = match which {
        Which::P => ops.transfer_dp(sigma) + &ops.dgdp,
        Which::Q => ops.transfer_dq(sigma) + &ops.dgdq,
    };
    Ok(linalg::sym(&solve_fixed_point(ops, &linalg::sym(&forcing), solver)?))
}

/// Own-parameter cost derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostGradient {
    /// `∂J1/∂p = tr(Λ̃ Σ∞^(p)) − λ11`
    pub dj1dp: f64,
    /// `∂J2/∂q = tr(Λ̃ Σ∞^(q)) + λ22`
    pub dj2dq: f64,
}

/// Analytic `∂J1/∂p` and `∂J2/∂q`.
pub fn grad_cost(
    disc: &DiscretizedModel,
    lambda: &CommCosts,
    policy: SchedulingPolicy,
    solver: Solver,
) -> Result<CostGradient, CovarianceError> {
    let ops = build_operators(disc, policy);
    let sigma = solve_fixed_point(&ops, &ops.gpq, solver)?;
    let dp = grad_sigma(&ops, &sigma, Which::P, solver)?;
    let dq = grad_sigma(&ops, &sigma, Which::Q, solver)?;
    Ok(CostGradient {
        dj1dp: (&disc.lambda_tilde * dp).trace() - lambda.l11(),
        dj2dq: (&disc.lambda_tilde * dq).trace() + lambda.l22(),
    })
}

/// One player's own derivative only, skipping the other solve.
pub(crate) fn own_derivative(
    disc: &DiscretizedModel,
    lambda: &CommCosts,
    policy: SchedulingPolicy,
    which: Which,
    solver: Solver,
) -> Result<f64, CovarianceError> {
    let ops = build_operators(disc, policy);
    let rho = spectral_radius(&ops);
    if !(rho < 1.0) {
        return Err(CovarianceError::Divergent { rho });
    }
    let sigma = solve_unchecked(&ops, &ops.gpq, solver)?;
    let forcing = match which {
        Which::P => ops.transfer_dp(&sigma) + &ops.dgdp,
        Which::Q => ops.transfer_dq(&sigma) + &ops.dgdq,
    };
    let d = solve_unchecked(&ops, &linalg::sym(&forcing), solver)?;
    let tr = (&disc.lambda_tilde * d).trace();
    Ok(match which {
        Which::P => tr - lambda.l11(),
        Which::Q => tr + lambda.l22(),
    })
}
