//! Both players' best-response curves on a grid, written to
//! `target/examples/best_response.csv` for `plot.py`.
//!
//!     cargo run --release --example best_response_curves -- 0.02

use std::fs::File;
use std::io::Write;

use netgame::covariance::Solver;
use netgame::model::discretize;
use netgame::presets::example1;
use netgame::riccati::solve_game_riccati;
use netgame::scheduler::{best_response_curve, unit_grid, BrOptions, Player, SchedulingGame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let step: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.02);
    let spec = example1();
    let ric = solve_game_riccati(&spec)?;
    let disc = discretize(&spec, &ric)?;
    let game = SchedulingGame::new(&spec, &ric, &disc).with_solver(Solver::Direct);
    let grid = unit_grid(step)?;
    let opts = BrOptions::default();

    std::fs::create_dir_all("target/examples")?;
    let mut out = File::create("target/examples/best_response.csv")?;
    writeln!(out, "player,opponent,response")?;
    for player in [Player::P1, Player::P2] {
        let curve = best_response_curve(&game, player, &grid, 0.5, &opts)?;
        for (o, r) in curve.grid.iter().zip(&curve.responses) {
            writeln!(out, "{},{o},{r}", if player == Player::P1 { 1 } else { 2 })?;
        }
        println!(
            "{player:?}: {} points, {} undefined (every own choice diverges), {} unconverged",
            curve.grid.len(),
            curve.undefined.len(),
            curve.unconverged.len()
        );
        let sample: Vec<String> = curve
            .points()
            .iter()
            .step_by(10)
            .map(|(p, q)| format!("({p:.2}, {q:.2})"))
            .collect();
        println!("  {}", sample.join(" "));
    }
    println!("wrote target/examples/best_response.csv");
    Ok(())
}
