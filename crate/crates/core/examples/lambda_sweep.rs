//! Equilibrium withholding probabilities as the players' own transmission
//! prices grow, on the default 10 × 10 grid.
//!
//!     cargo run --release --example lambda_sweep

use std::fs::File;
use std::io::Write;

use netgame::covariance::Solver;
use netgame::model::discretize;
use netgame::presets::example1;
use netgame::riccati::solve_game_riccati;
use netgame::scheduler::{default_sweep_axes, sweep_lambda, trend_summary, NashOptions, SchedulingGame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = example1();
    let ric = solve_game_riccati(&spec)?;
    let disc = discretize(&spec, &ric)?;
    let game = SchedulingGame::new(&spec, &ric, &disc).with_solver(Solver::Direct);
    let (l11, l22) = default_sweep_axes();
    let cells = sweep_lambda(&game, &l11, &l22, &NashOptions::default(), (0.5, 0.5))?;

    print!("p* \\ λ22");
    for b in &l22 {
        print!("{b:>7}");
    }
    println!();
    for (i, a) in l11.iter().enumerate() {
        print!("λ11={a:<4}");
        for c in &cells[i * l22.len()..(i + 1) * l22.len()] {
            print!("{:>7.3}", c.p_star);
        }
        println!();
    }

    let t = trend_summary(&cells, l11.len(), l22.len(), 0.0);
    println!("\nshare of grid steps with a non-decreasing coordinate:");
    println!(
        "  p* along λ11: {:.0}%   q* along λ22: {:.0}%",
        100.0 * t.p_along_l11,
        100.0 * t.q_along_l22
    );
    println!(
        "  p* along λ22: {:.0}%   q* along λ11: {:.0}%",
        100.0 * t.p_along_l22,
        100.0 * t.q_along_l11
    );

    std::fs::create_dir_all("target/examples")?;
    let mut out = File::create("target/examples/sweep.csv")?;
    writeln!(out, "l11,l22,p_star,q_star,converged,iterations")?;
    for c in &cells {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            c.l11, c.l22, c.p_star, c.q_star, c.converged, c.iterations
        )?;
    }
    println!("wrote target/examples/sweep.csv");
    Ok(())
}
