//! Building a game in code: a lightly damped oscillator where player 1
//! pushes on the velocity and player 2 disturbs the position.
//!
//!     cargo run --release --example custom_game

use nalgebra::dmatrix;
use netgame::covariance::Solver;
use netgame::model::{discretize, validate_spec, CommCosts, GameSpec};
use netgame::riccati::solve_game_riccati;
use netgame::scheduler::{nash_multistart, NashOptions, SchedulingGame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GameSpec {
        name: Some("oscillator".into()),
        a: dmatrix![0.0, 1.0; -1.0, -0.1],
        b1: dmatrix![0.0; 1.0],
        b2: dmatrix![0.3; 0.0],
        g: dmatrix![0.5, 0.0; 0.0, 0.5],
        q: dmatrix![1.0, 0.0; 0.0, 0.1],
        r1: dmatrix![0.5],
        r2: dmatrix![2.0],
        lambda: CommCosts::new(2.0, 1.0, 2.0, 1.5),
        h: 0.02,
        sigma0: dmatrix![1.0, 0.0; 0.0, 1.0],
    };
    let report = validate_spec(&spec)?;
    println!("assumptions hold: {}", report.passed());
    let ric = solve_game_riccati(&spec)?;
    println!("P ={:.5}", ric.p);
    let disc = discretize(&spec, &ric)?;
    let game = SchedulingGame::new(&spec, &ric, &disc).with_solver(Solver::Direct);
    let ms = nash_multistart(&game, &NashOptions::default(), 8, 7)?;
    for eq in &ms.equilibria {
        println!(
            "equilibrium (p*, q*) = ({:.4}, {:.4}), J1 = {:.4}, J2 = {:.4}",
            eq.p, eq.q, eq.costs.j1, eq.costs.j2
        );
    }
    if ms.equilibria.is_empty() {
        println!("no start converged");
    }
    Ok(())
}
