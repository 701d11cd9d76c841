//! Closed-loop simulation at the scalar game's equilibrium: one logged
//! trajectory, its realized costs, and an ensemble estimate of the error
//! covariance next to the analytic fixed point.
//!
//!     cargo run --release --example monte_carlo

use std::fs::File;

use netgame::covariance::{steady_state, SchedulingPolicy, Solver};
use netgame::model::discretize;
use netgame::presets::example1;
use netgame::riccati::solve_game_riccati;
use netgame::scheduler::{nash_iterative, NashOptions, SchedulingGame};
use netgame::simulate::{
    analytic_per_second, empirical_costs, empirical_covariance, simulate_trajectories, Scheme, SimOptions,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = example1();
    let ric = solve_game_riccati(&spec)?;
    let disc = discretize(&spec, &ric)?;
    let game = SchedulingGame::new(&spec, &ric, &disc).with_solver(Solver::Direct);
    let ne = nash_iterative(&game, &NashOptions::default(), (0.5, 0.5))?;
    let pol = SchedulingPolicy::new(ne.p_star, ne.q_star)?;
    println!("equilibrium (p*, q*) = ({:.4}, {:.4})", pol.p, pol.q);

    let log = simulate_trajectories(&spec, &ric, pol, 100.0, 1, Scheme::EulerMaruyama)?;
    let (n1, n2) = log.counts();
    println!(
        "{} ticks: P1 transmitted {n1} times ({:.3}), P2 {n2} times ({:.3})",
        log.len(),
        n1 as f64 / log.len() as f64,
        n2 as f64 / log.len() as f64
    );
    std::fs::create_dir_all("target/examples")?;
    log.write_csv(File::create("target/examples/trajectory.csv")?)?;
    println!("wrote target/examples/trajectory.csv");

    let long = simulate_trajectories(&spec, &ric, pol, 500.0, 2, Scheme::EulerMaruyama)?;
    let emp = empirical_costs(&long, &spec, &spec.lambda);
    let (a1, a2) = analytic_per_second(&game.costs(pol), &spec.lambda, pol, spec.h);
    println!(
        "cost per second over 500 s: J1 {:.3} (analytic {a1:.3}), J2 {:.3} (analytic {a2:.3})",
        emp.j1, emp.j2
    );

    let (_, sigma) = steady_state(&disc, pol, Solver::Direct)?;
    for scheme in [Scheme::EulerMaruyama, Scheme::Exact] {
        let stats = empirical_covariance(
            &spec,
            &ric,
            pol,
            20_000,
            50,
            3,
            &SimOptions {
                scheme,
                ..Default::default()
            },
        )?;
        println!(
            "{scheme:?} ensemble ({} members × {} ticks):",
            stats.ensemble, stats.ticks
        );
        for i in 0..2 {
            for j in i..2 {
                println!(
                    "  Σ[{i}{j}] {:>9.5} ± {:.5}   analytic {:>9.5}",
                    stats.sigma[(i, j)],
                    stats.stderr[(i, j)],
                    sigma[(i, j)]
                );
            }
        }
    }
    Ok(())
}
