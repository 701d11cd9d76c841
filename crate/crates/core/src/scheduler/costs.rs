use serde::Serialize;

use crate::covariance::{build_operators, solve_fixed_point, SchedulingPolicy, Solver};
use crate::error::CovarianceError;
use crate::model::{CommCosts, DiscretizedModel};
use crate::riccati::RiccatiSolution;

/// Per-tick ergodic costs of both players at a scheduling policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostPair {
    /// Minimizer's cost.
    pub j1: f64,
    /// Maximizer's payoff.
    pub j2: f64,
    /// `J* + φ(h)/h`, independent of the policy.
    pub jtilde: f64,
    /// `tr(Λ̃ Σ∞)`
    pub trace: f64,
    pub rho: f64,
}

impl CostPair {
    /// False when the error covariance diverges (`ρ ≥ 1`); then `j1 = +∞`.
    pub fn is_finite(&self) -> bool {
        self.j1.is_finite() && self.j2.is_finite()
    }
}

/// Communication part of `J1`: `λ11 (1 − p) + λ12 (1 − q)`.
pub fn comm_cost_p1(lambda: &CommCosts, policy: SchedulingPolicy) -> f64 {
    let (tp, tq) = policy.transmit();
    lambda.l11() * tp + lambda.l12() * tq
}

/// Communication part of `J2` with its sign: `−λ21 (1 − p) − λ22 (1 − q)`.
pub fn comm_cost_p2(lambda: &CommCosts, policy: SchedulingPolicy) -> f64 {
    let (tp, tq) = policy.transmit();
    -lambda.l21() * tp - lambda.l22() * tq
}

/// `J1 = J̃* + tr(Λ̃Σ∞) + λ11(1−p) + λ12(1−q)`,
/// `J2 = J̃* + tr(Λ̃Σ∞) − λ21(1−p) − λ22(1−q)`.
///
/// A divergent steady state is reported as `j1 = +∞` and `j2 = NaN`, with
/// the offending spectral radius in `rho`.
pub fn evaluate_costs(
    riccati: &RiccatiSolution,
    disc: &DiscretizedModel,
    lambda: &CommCosts,
    policy: SchedulingPolicy,
    solver: Solver,
) -> CostPair {
    let jtilde = riccati.jstar + disc.phi_over_h;
    let ops = build_operators(disc, policy);
    match solve_fixed_point(&ops, &ops.gpq, solver) {
        Ok(sigma) => costs_from_sigma(
            jtilde,
            disc,
            lambda,
            policy,
            &sigma,
            crate::covariance::spectral_radius(&ops),
        ),
        Err(CovarianceError::Divergent { rho }) => CostPair {
            j1: f64::INFINITY,
            j2: f64::NAN,
            jtilde,
            trace: f64::NAN,
            rho,
        },
        Err(_) => CostPair {
            j1: f64::INFINITY,
            j2: f64::NAN,
            jtilde,
            trace: f64::NAN,
            rho: f64::NAN,
        },
    }
}

pub(crate) fn costs_from_sigma(
    jtilde: f64,
    disc: &DiscretizedModel,
    lambda: &CommCosts,
    policy: SchedulingPolicy,
    sigma: &crate::linalg::Mat,
    rho: f64,
) -> CostPair {
    let trace = (&disc.lambda_tilde * sigma).trace();
    let base = jtilde + trace;
    CostPair {
        j1: base + comm_cost_p1(lambda, policy),
        j2: base + comm_cost_p2(lambda, policy),
        jtilde,
        trace,
        rho,
    }
}
