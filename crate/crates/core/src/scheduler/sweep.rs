use rayon::prelude::*;
use serde::Serialize;

use super::nash::{nash_iterative, NashOptions};
use super::SchedulingGame;
use crate::error::SchedulerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub l11: f64,
    pub l22: f64,
    pub p_star: f64,
    pub q_star: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `λ11 ∈ {5, 10, …, 50}` and `λ22 ∈ {3, 6, …, 30}`, bracketing `(25, 15)`.
pub fn default_sweep_axes() -> (Vec<f64>, Vec<f64>) {
    (
        (1..=10).map(|k| 5.0 * k as f64).collect(),
        (1..=10).map(|k| 3.0 * k as f64).collect(),
    )
}

/// Equilibrium over a `(λ11, λ22)` grid, cross costs held fixed.
///
/// Rows (fixed `λ11`) run in parallel; along a row each cell is warm-started
/// from its left neighbour's equilibrium. Output is row-major in `l11`.
/// A cell that fails to converge is recorded with `converged = false`.
pub fn sweep_lambda(
    game: &SchedulingGame,
    l11: &[f64],
    l22: &[f64],
    opts: &NashOptions,
    init: (f64, f64),
) -> Result<Vec<SweepCell>, SchedulerError> {
    if l11.iter().chain(l22).any(|&v| !(v > 0.0)) {
        return Err(SchedulerError::Parameter("sweep values must be positive".into()));
    }
    let rows: Vec<Result<Vec<SweepCell>, SchedulerError>> = l11
        .par_iter()
        .map(|&a| {
            let mut start = init;
            let mut row = Vec::with_capacity(l22.len());
            for &b in l22 {
                let g = game.clone().with_lambda(game.lambda.with_own_costs(a, b));
                let cell = match nash_iterative(&g, opts, start) {
                    Ok(r) => {
                        if r.converged {
                            start = (r.p_star, r.q_star);
                        }
                        SweepCell {
                            l11: a,
                            l22: b,
                            p_star: r.p_star,
                            q_star: r.q_star,
                            converged: r.converged,
                            iterations: r.iterations,
                        }
                    }
                    Err(SchedulerError::Covariance(_)) => SweepCell {
                        l11: a,
                        l22: b,
                        p_star: f64::NAN,
                        q_star: f64::NAN,
                        converged: false,
                        iterations: 0,
                    },
                    Err(e) => return Err(e),
                };
                row.push(cell);
            }
            Ok(row)
        })
        .collect();
    let mut out = Vec::with_capacity(l11.len() * l22.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Share of unit grid steps along which an equilibrium coordinate does not
/// decrease. Steps touching a non-converged cell are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendSummary {
    /// `p*` as `λ11` grows.
    pub p_along_l11: f64,
    /// `q*` as `λ22` grows.
    pub q_along_l22: f64,
    /// `p*` as `λ22` grows.
    pub p_along_l22: f64,
    /// `q*` as `λ11` grows.
    pub q_along_l11: f64,
}

/// Computes [`TrendSummary`] for a row-major sweep of `rows × cols` cells.
/// `slack` absorbs solver noise in the comparison.
pub fn trend_summary(cells: &[SweepCell], rows: usize, cols: usize, slack: f64) -> TrendSummary {
    assert_eq!(cells.len(), rows * cols);
    let at = |i: usize, j: usize| &cells[i * cols + j];
    let frac = |steps: Vec<(&SweepCell, &SweepCell)>, pick: fn(&SweepCell) -> f64| {
        let valid: Vec<_> = steps.into_iter().filter(|(a, b)| a.converged && b.converged).collect();
        if valid.is_empty() {
            return f64::NAN;
        }
        let up = valid.iter().filter(|(a, b)| pick(b) >= pick(a) - slack).count();
        up as f64 / valid.len() as f64
    };
    let along_l11 = || {
        (0..rows.saturating_sub(1))
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| (at(i, j), at(i + 1, j)))
            .collect::<Vec<_>>()
    };
    let along_l22 = || {
        (0..rows)
            .flat_map(|i| (0..cols.saturating_sub(1)).map(move |j| (i, j)))
            .map(|(i, j)| (at(i, j), at(i, j + 1)))
            .collect::<Vec<_>>()
    };
    TrendSummary {
        p_along_l11: frac(along_l11(), |c| c.p_star),
        q_along_l22: frac(along_l22(), |c| c.q_star),
        p_along_l22: frac(along_l22(), |c| c.p_star),
        q_along_l11: frac(along_l11(), |c| c.q_star),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(l11: f64, l22: f64, p: f64, q: f64) -> SweepCell {
        SweepCell {
            l11,
            l22,
            p_star: p,
            q_star: q,
            converged: true,
            iterations: 1,
        }
    }

    #[test]
    fn trend_fractions_count_steps() {
        // 2 × 2: p rises along l11, q falls along l22 in one row
        let cells = vec![
            cell(1.0, 1.0, 0.1, 0.5),
            cell(1.0, 2.0, 0.1, 0.4),
            cell(2.0, 1.0, 0.2, 0.5),
            cell(2.0, 2.0, 0.3, 0.6),
        ];
        let t = trend_summary(&cells, 2, 2, 0.0);
        assert_eq!(t.p_along_l11, 1.0);
        assert_eq!(t.q_along_l22, 0.5);
    }

    #[test]
    fn default_axes_bracket_base_point() {
        let (a, b) = default_sweep_axes();
        assert_eq!(a.len(), 10);
        assert!(a.contains(&25.0) && b.contains(&15.0));
    }
}
