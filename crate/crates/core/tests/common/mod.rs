#![allow(dead_code)]

use nalgebra::DMatrix;
use netgame::covariance::{build_operators, spectral_radius, SchedulingPolicy};
use netgame::model::{discretize, CommCosts, DiscretizedModel, GameSpec};
use netgame::riccati::{solve_game_riccati, RiccatiSolution};
use rand::Rng;
use rand_distr::StandardNormal;

pub type Mat = DMatrix<f64>;

pub fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random game of order `n`: Gaussian drift, inputs and noise, `Q ≻ 0`, and
/// a maximizer penalized heavily enough that the Riccati equation is usually
/// solvable.
pub fn random_spec<R: Rng>(rng: &mut R, n: usize, h: f64) -> GameSpec {
    let m = gaussian(rng, n, n, 1.0);
    GameSpec {
        name: Some("random".into()),
        a: gaussian(rng, n, n, 0.7),
        b1: gaussian(rng, n, n, 1.0) + Mat::identity(n, n),
        b2: gaussian(rng, n, n, 0.5),
        g: gaussian(rng, n, n, 1.0),
        q: m.transpose() * &m + Mat::identity(n, n) * 0.1,
        r1: Mat::identity(n, n) * rng.random_range(0.5..2.0),
        r2: Mat::identity(n, n) * rng.random_range(2.0..6.0),
        lambda: CommCosts::new(
            rng.random_range(5.0..50.0),
            rng.random_range(0.0..20.0),
            rng.random_range(0.0..20.0),
            rng.random_range(3.0..30.0),
        ),
        h,
        sigma0: Mat::identity(n, n),
    }
}

pub struct Instance {
    pub spec: GameSpec,
    pub ric: RiccatiSolution,
    pub disc: DiscretizedModel,
    pub policy: SchedulingPolicy,
    pub rho: f64,
}

/// Draws games and policies until one solves and has spectral radius below
/// `rho_max`; `(p, q)` is uniform on `[lo, hi]²`.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize, lo: f64, hi: f64, rho_max: f64) -> Instance {
    loop {
        let n = rng.random_range(1..=max_n);
        let h = [0.01, 0.05, 0.1][rng.random_range(0..3)];
        let spec = random_spec(rng, n, h);
        let Ok(ric) = solve_game_riccati(&spec) else { continue };
        let Ok(disc) = discretize(&spec, &ric) else { continue };
        let policy = SchedulingPolicy::new(rng.random_range(lo..=hi), rng.random_range(lo..=hi)).unwrap();
        let rho = spectral_radius(&build_operators(&disc, policy));
        if rho < rho_max {
            return Instance {
                spec,
                ric,
                disc,
                policy,
                rho,
            };
        }
    }
}
