//! Discrete-time costs, their gradients and the equilibrium searches over
//! the withholding probabilities `(p, q)`.

mod best_response;
mod costs;
mod gradient;
mod nash;
mod sweep;

pub use best_response::{
    best_response, best_response_curve, unit_grid, BestResponseCurve, BrOptions, BrOutcome, Player,
};
pub use costs::{comm_cost_p1, comm_cost_p2, evaluate_costs, CostPair};
pub use gradient::{grad_cost, grad_sigma, CostGradient, Which};
pub use nash::{
    deviation_scan, dominates, nash_exhaustive, nash_iterative, nash_multistart, random_inits, DeviationReport,
    Equilibrium, ExhaustiveOptions, ExhaustiveResult, Method, MultiStart, NashOptions, NashResult, CLUSTER_TOL,
};
pub use sweep::{default_sweep_axes, sweep_lambda, trend_summary, SweepCell, TrendSummary};

use crate::covariance::{SchedulingPolicy, Solver};
use crate::error::CovarianceError;
use crate::model::{CommCosts, DiscretizedModel};
use crate::riccati::RiccatiSolution;

/// Everything the scheduling game needs once the controllers are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingGame {
    pub riccati: RiccatiSolution,
    pub disc: DiscretizedModel,
    pub lambda: CommCosts,
    pub solver: Solver,
}

impl SchedulingGame {
    /// Uses the communication costs of `spec` and a 400-term Neumann solver.
    pub fn new(spec: &crate::model::GameSpec, riccati: &RiccatiSolution, disc: &DiscretizedModel) -> Self {
        Self {
            riccati: riccati.clone(),
            disc: disc.clone(),
            lambda: spec.lambda,
            solver: Solver::default(),
        }
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_lambda(mut self, lambda: CommCosts) -> Self {
        self.lambda = lambda;
        self
    }

    /// `J̃* = J* + φ(h)/h`
    pub fn jtilde(&self) -> f64 {
        self.riccati.jstar + self.disc.phi_over_h
    }

    pub fn costs(&self, policy: SchedulingPolicy) -> CostPair {
        evaluate_costs(&self.riccati, &self.disc, &self.lambda, policy, self.solver)
    }

    pub fn gradient(&self, policy: SchedulingPolicy) -> Result<CostGradient, CovarianceError> {
        grad_cost(&self.disc, &self.lambda, policy, self.solver)
    }

    /// `∂J1/∂p` for P1, `∂J2/∂q` for P2.
    pub fn own_derivative(&self, player: Player, policy: SchedulingPolicy) -> Result<f64, CovarianceError> {
        let which = match player {
            Player::P1 => Which::P,
            Player::P2 => Which::Q,
        };
        gradient::own_derivative(&self.disc, &self.lambda, policy, which, self.solver)
    }
}
