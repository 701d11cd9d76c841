use rayon::prelude::*;
use serde::Serialize;

use super::SchedulingGame;
use crate::covariance::SchedulingPolicy;
use crate::error::{CovarianceError, SchedulerError};

/// Below this a divergent iterate is no longer halved; the opponent's
/// policy alone makes the error covariance unbounded.
const RETREAT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Player {
    /// Minimizer, chooses `p`.
    P1,
    /// Maximizer, chooses `q`.
    P2,
}

impl Player {
    /// Policy with `own` in this player's slot.
    pub fn policy(self, own: f64, opponent: f64) -> SchedulingPolicy {
        match self {
            Player::P1 => SchedulingPolicy { p: own, q: opponent },
            Player::P2 => SchedulingPolicy { p: opponent, q: own },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrOptions {
    pub eta: f64,
    /// Stop once an update moves the iterate by at most this much.
    pub kappa: f64,
    pub max_iters: usize,
    pub record_trace: bool,
}

impl Default for BrOptions {
    fn default() -> Self {
        Self {
            eta: 1e-4,
            kappa: 1e-6,
            max_iters: 1_000_000,
            record_trace: false,
        }
    }
}

impl BrOptions {
    pub(crate) fn check(&self) -> Result<(), SchedulerError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(SchedulerError::Parameter(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(SchedulerError::Parameter(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrOutcome {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Every iterate visited, when requested.
    pub trace: Vec<f64>,
}

fn check_unit(name: &str, x: f64) -> Result<(), SchedulerError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(SchedulerError::Parameter(format!("{name} must lie in [0, 1], got {x}")))
    }
}

/// Projected gradient descent on `J1` (P1) or ascent on `J2` (P2) in the
/// player's own withholding probability, the opponent's held fixed.
///
/// An iterate whose steady state diverges is halved (more frequent
/// communication) until the covariance is bounded again.
pub fn best_response(
    game: &SchedulingGame,
    player: Player,
    opponent: f64,
    init: f64,
    opts: &BrOptions,
) -> Result<BrOutcome, SchedulerError> {
    opts.check()?;
    check_unit("opponent probability", opponent)?;
    check_unit("initial probability", init)?;
    let mut x = init;
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        if opts.record_trace {
            trace.push(x);
        }
        match game.own_derivative(player, player.policy(x, opponent)) {
            Ok(g) => {
                let step = match player {
                    Player::P1 => -opts.eta * g,
                    Player::P2 => opts.eta * g,
                };
                let next = (x + step).clamp(0.0, 1.0);
                if (next - x).abs() <= opts.kappa {
                    return Ok(BrOutcome {
                        value: x,
                        iterations,
                        converged: true,
                        trace,
                    });
                }
                x = next;
            }
            Err(CovarianceError::Divergent { rho }) => {
                if x < RETREAT_FLOOR {
                    return Err(CovarianceError::Divergent { rho }.into());
                }
                x *= 0.5;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(BrOutcome {
        value: x,
        iterations,
        converged: false,
        trace,
    })
}

/// Best responses of one player over a grid of opponent probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponseCurve {
    pub player: Player,
    /// Opponent probabilities with a bounded best response.
    pub grid: Vec<f64>,
    pub responses: Vec<f64>,
    /// Opponent probabilities at which every own choice diverges.
    pub undefined: Vec<f64>,
    /// Grid points whose iteration hit the cap.
    pub unconverged: Vec<f64>,
}

impl BestResponseCurve {
    /// Points in `(p, q)` coordinates.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.grid
            .iter()
            .zip(&self.responses)
            .map(|(&o, &r)| match self.player {
                Player::P1 => (r, o),
                Player::P2 => (o, r),
            })
            .collect()
    }
}

/// Evaluates [`best_response`] at every grid point from the same `init`.
/// Grid points are independent and run on the rayon pool.
pub fn best_response_curve(
    game: &SchedulingGame,
    player: Player,
    grid: &[f64],
    init: f64,
    opts: &BrOptions,
) -> Result<BestResponseCurve, SchedulerError> {
    opts.check()?;
    let results: Vec<(f64, Result<BrOutcome, SchedulerError>)> = grid
        .par_iter()
        .map(|&o| (o, best_response(game, player, o, init, opts)))
        .collect();
    let mut curve = BestResponseCurve {
        player,
        grid: Vec::new(),
        responses: Vec::new(),
        undefined: Vec::new(),
        unconverged: Vec::new(),
    };
    for (o, r) in results {
        match r {
            Ok(out) => {
                if !out.converged {
                    curve.unconverged.push(o);
                }
                curve.grid.push(o);
                curve.responses.push(out.value);
            }
            Err(SchedulerError::Covariance(CovarianceError::Divergent { .. })) => curve.undefined.push(o),
            Err(e) => return Err(e),
        }
    }
    Ok(curve)
}

/// `0, step, 2·step, …, 1` (the last point is exactly 1).
pub fn unit_grid(step: f64) -> Result<Vec<f64>, SchedulerError> {
    if !(step > 0.0 && step < 1.0) {
        return Err(SchedulerError::Parameter(format!(
            "grid step must lie in (0, 1), got {step}"
        )));
    }
    let m = (1.0 / step).round() as usize;
    if ((m as f64) * step - 1.0).abs() > 1e-9 {
        let m = (1.0 / step).floor() as usize;
        let mut g: Vec<f64> = (0..=m).map(|k| k as f64 * step).collect();
        g.push(1.0);
        return Ok(g);
    }
    Ok((0..=m).map(|k| k as f64 / m as f64).collect())
}
