use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::best_response::{best_response, best_response_curve, unit_grid, BestResponseCurve, BrOptions, Player};
use super::costs::CostPair;
use super::SchedulingGame;
use crate::covariance::SchedulingPolicy;
use crate::error::SchedulerError;

/// Fixed points closer than this (max-norm) are reported as one equilibrium.
pub const CLUSTER_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Iterative,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NashOptions {
    /// Outer tolerance on successive best-response pairs.
    pub eps: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub kappa: f64,
    pub max_br_iters: usize,
    pub max_outer: usize,
}

impl Default for NashOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            eta1: 1e-4,
            eta2: 1e-4,
            kappa: 1e-6,
            max_br_iters: 1_000_000,
            max_outer: 10_000,
        }
    }
}

impl NashOptions {
    pub fn br(&self, player: Player) -> BrOptions {
        BrOptions {
            eta: match player {
                Player::P1 => self.eta1,
                Player::P2 => self.eta2,
            },
            kappa: self.kappa,
            max_iters: self.max_br_iters,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashResult {
    pub p_star: f64,
    pub q_star: f64,
    pub costs: CostPair,
    /// Outer (alternating) iterations.
    pub iterations: usize,
    /// `(p, q)` after every outer iteration, starting with the initial pair.
    pub trace: Vec<(f64, f64)>,
    pub method: Method,
    pub converged: bool,
}

/// Alternating best responses until neither player moves by more than `eps`.
///
/// Each best response is warm-started from the player's current value.
pub fn nash_iterative(
    game: &SchedulingGame,
    opts: &NashOptions,
    init: (f64, f64),
) -> Result<NashResult, SchedulerError> {
    if !(opts.eps > 0.0) {
        return Err(SchedulerError::Parameter(format!(
            "eps must be positive, got {}",
            opts.eps
        )));
    }
    let (br1, br2) = (opts.br(Player::P1), opts.br(Player::P2));
    let (mut p, mut q) = init;
    let mut trace = vec![init];
    let mut all_converged = true;
    let mut iterations = 0;
    let mut settled = false;
    while iterations < opts.max_outer {
        iterations += 1;
        let a = best_response(game, Player::P1, q, p, &br1)?;
        let b = best_response(game, Player::P2, a.value, q, &br2)?;
        all_converged &= a.converged && b.converged;
        let moved = (a.value - p).abs().max((b.value - q).abs());
        p = a.value;
        q = b.value;
        trace.push((p, q));
        if moved <= opts.eps {
            settled = true;
            break;
        }
    }
    Ok(NashResult {
        p_star: p,
        q_star: q,
        costs: game.costs(SchedulingPolicy { p, q }),
        iterations,
        trace,
        method: Method::Iterative,
        converged: settled && all_converged,
    })
}

/// A distinct fixed point found by one or more starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub p: f64,
    pub q: f64,
    pub costs: CostPair,
    /// Indices into [`MultiStart::runs`].
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiStart {
    pub inits: Vec<(f64, f64)>,
    pub runs: Vec<NashResult>,
    pub equilibria: Vec<Equilibrium>,
    /// Equilibria not dominated by another one (indices into `equilibria`).
    pub undominated: Vec<usize>,
}

/// `a` is better than `b`: no worse for either player, strictly better for one.
pub fn dominates(a: &CostPair, b: &CostPair) -> bool {
    a.j1 <= b.j1 && a.j2 >= b.j2 && (a.j1 < b.j1 || a.j2 > b.j2)
}

/// `n` uniform starting pairs from a seeded ChaCha stream.
pub fn random_inits(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect()
}

/// Runs [`nash_iterative`] from `starts` random initial pairs and groups the
/// fixed points.
pub fn nash_multistart(
    game: &SchedulingGame,
    opts: &NashOptions,
    starts: usize,
    seed: u64,
) -> Result<MultiStart, SchedulerError> {
    let inits = random_inits(starts, seed);
    let runs = inits
        .par_iter()
        .map(|&init| nash_iterative(game, opts, init))
        .collect::<Result<Vec<_>, _>>()?;
    let mut equilibria: Vec<Equilibrium> = Vec::new();
    for (i, r) in runs.iter().enumerate().filter(|(_, r)| r.converged) {
        match equilibria
            .iter_mut()
            .find(|e| (e.p - r.p_star).abs().max((e.q - r.q_star).abs()) <= CLUSTER_TOL)
        {
            Some(e) => e.members.push(i),
            None => equilibria.push(Equilibrium {
                p: r.p_star,
                q: r.q_star,
                costs: r.costs,
                members: vec![i],
            }),
        }
    }
    let undominated = (0..equilibria.len())
        .filter(|&i| !equilibria.iter().any(|e| dominates(&e.costs, &equilibria[i].costs)))
        .collect();
    Ok(MultiStart {
        inits,
        runs,
        equilibria,
        undominated,
    })
}

/// Largest gain either player can get by deviating on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationReport {
    pub p: f64,
    pub q: f64,
    /// `J1(p, q) − min_p' J1(p', q)`
    pub p1_gain: f64,
    pub p1_best: f64,
    /// `max_q' J2(p, q') − J2(p, q)`
    pub p2_gain: f64,
    pub p2_best: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Unilateral-deviation check of a candidate equilibrium.
pub fn deviation_scan(
    game: &SchedulingGame,
    p: f64,
    q: f64,
    step: f64,
    tol: f64,
) -> Result<DeviationReport, SchedulerError> {
    let grid = unit_grid(step)?;
    let here = game.costs(SchedulingPolicy::new(p, q).map_err(SchedulerError::from)?);
    if !here.is_finite() {
        return Err(SchedulerError::Parameter(format!(
            "candidate ({p}, {q}) has divergent error covariance"
        )));
    }
    let j1: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&x| (x, game.costs(SchedulingPolicy { p: x, q }).j1))
        .collect();
    let j2: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&y| (y, game.costs(SchedulingPolicy { p, q: y }).j2))
        .filter(|(_, v)| v.is_finite())
        .collect();
    let (p1_best, j1_min) = j1
        .iter()
        .copied()
        .fold((p, here.j1), |acc, c| if c.1 < acc.1 { c } else { acc });
    let (p2_best, j2_max) = j2
        .iter()
        .copied()
        .fold((q, here.j2), |acc, c| if c.1 > acc.1 { c } else { acc });
    let p1_gain = here.j1 - j1_min;
    let p2_gain = j2_max - here.j2;
    Ok(DeviationReport {
        p,
        q,
        p1_gain,
        p1_best,
        p2_gain,
        p2_best,
        tol,
        passed: p1_gain <= tol && p2_gain <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExhaustiveOptions {
    /// Grid coarseness for both players.
    pub grid: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub kappa: f64,
    pub max_br_iters: usize,
    /// Pairing tolerance; defaults to `grid`.
    pub sigma: Option<f64>,
    /// Common starting value of every best response.
    pub init: f64,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        Self {
            grid: 0.01,
            eta1: 1e-4,
            eta2: 1e-4,
            kappa: 1e-6,
            max_br_iters: 1_000_000,
            sigma: None,
            init: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustiveResult {
    /// `p*(q)` over the `q` grid.
    pub p1_curve: BestResponseCurve,
    /// `q*(p)` over the `p` grid.
    pub p2_curve: BestResponseCurve,
    pub ne_pairs: Vec<(f64, f64)>,
    pub sigma: f64,
    pub advisory: Option<String>,
}

fn l1(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

/// Both best-response curves on a grid and the points where they meet.
///
/// A candidate `(p', q')` is accepted when some point of each curve lies
/// within L1 distance `σ` of it. Candidates are grouped, and each group is
/// represented by the crossing of the two piecewise-linear curves when that
/// crossing itself satisfies the `σ` condition, else by its tightest midpoint.
pub fn nash_exhaustive(game: &SchedulingGame, opts: &ExhaustiveOptions) -> Result<ExhaustiveResult, SchedulerError> {
    let grid = unit_grid(opts.grid)?;
    let sigma = opts.sigma.unwrap_or(opts.grid);
    if !(sigma > 0.0) {
        return Err(SchedulerError::Parameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let br = |eta| BrOptions {
        eta,
        kappa: opts.kappa,
        max_iters: opts.max_br_iters,
        record_trace: false,
    };
    let p1_curve = best_response_curve(game, Player::P1, &grid, opts.init, &br(opts.eta1))?;
    let p2_curve = best_response_curve(game, Player::P2, &grid, opts.init, &br(opts.eta2))?;
    let a_pts = p2_curve.points();
    let b_pts = p1_curve.points();

    // (midpoint, pair distance)
    let mut cands: Vec<((f64, f64), f64)> = Vec::new();
    for &a in &a_pts {
        for &b in &b_pts {
            let d = l1(a, b);
            if d < 2.0 * sigma {
                cands.push((((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0), d));
            }
        }
    }
    let groups = single_linkage(&cands, 2.0 * sigma);
    let within = |x: (f64, f64)| a_pts.iter().any(|&a| l1(a, x) < sigma) && b_pts.iter().any(|&b| l1(b, x) < sigma);
    let crossings = polyline_crossings(&a_pts, &b_pts);
    let mut ne_pairs = Vec::new();
    for g in groups {
        let (best_mid, _) =
            g.iter().map(|&i| cands[i]).fold(
                ((f64::NAN, f64::NAN), f64::INFINITY),
                |acc, c| if c.1 < acc.1 { c } else { acc },
            );
        let near = crossings
            .iter()
            .copied()
            .filter(|&x| within(x) && g.iter().any(|&i| l1(cands[i].0, x) <= 2.0 * sigma))
            .min_by(|x, y| l1(*x, best_mid).total_cmp(&l1(*y, best_mid)));
        ne_pairs.push(near.unwrap_or(best_mid));
    }
    ne_pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let advisory = ne_pairs.is_empty().then(|| {
        format!(
            "no intersection within sigma = {sigma}; refine the grid (currently {})",
            opts.grid
        )
    });
    Ok(ExhaustiveResult {
        p1_curve,
        p2_curve,
        ne_pairs,
        sigma,
        advisory,
    })
}

/// Groups of candidate indices connected by L1 distance below `tol`.
fn single_linkage(cands: &[((f64, f64), f64)], tol: f64) -> Vec<Vec<usize>> {
    let mut label: Vec<usize> = (0..cands.len()).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..cands.len() {
        for j in (i + 1)..cands.len() {
            if l1(cands[i].0, cands[j].0) < tol {
                let (ri, rj) = (root(&mut label, i), root(&mut label, j));
                label[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index = std::collections::BTreeMap::new();
    for i in 0..cands.len() {
        let r = root(&mut label, i);
        let k = *index.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[k].push(i);
    }
    groups
}

/// Intersections between consecutive-point segments of two polylines.
fn polyline_crossings(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for sa in a.windows(2) {
        for sb in b.windows(2) {
            if let Some(x) = segment_intersection(sa[0], sa[1], sb[0], sb[1]) {
                out.push(x);
            }
        }
    }
    out
}

fn segment_intersection(p0: (f64, f64), p1: (f64, f64), q0: (f64, f64), q1: (f64, f64)) -> Option<(f64, f64)> {
    let r = (p1.0 - p0.0, p1.1 - p0.1);
    let s = (q1.0 - q0.0, q1.1 - q0.1);
    let den = r.0 * s.1 - r.1 * s.0;
    if den.abs() < 1e-300 {
        return None;
    }
    let w = (q0.0 - p0.0, q0.1 - p0.1);
    let t = (w.0 * s.1 - w.1 * s.0) / den;
    let u = (w.0 * r.1 - w.1 * r.0) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some((p0.0 + t * r.0, p0.1 + t * r.1))
}
