//! Steady-state error covariance at a scheduling policy, Neumann truncation
//! behaviour, and the map of policies where the covariance stays bounded.
//!
//!     cargo run --example steady_state -- 0.4 0.5

use netgame::covariance::{
    build_operators, spectral_radius, steady_state_direct, steady_state_neumann, SchedulingPolicy,
};
use netgame::model::discretize;
use netgame::presets::example1;
use netgame::riccati::solve_game_riccati;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let (p, q) = match args[..] {
        [p, q] => (p, q),
        _ => (0.4, 0.5),
    };
    let spec = example1();
    let ric = solve_game_riccati(&spec)?;
    let disc = discretize(&spec, &ric)?;
    let ops = build_operators(&disc, SchedulingPolicy::new(p, q)?);
    let rho = spectral_radius(&ops);
    println!("policy (p, q) = ({p}, {q}), spectral radius ρ = {rho:.6}");

    let exact = steady_state_direct(&ops)?;
    println!("Σ∞ (direct solve) ={:.6}", exact);
    println!("{:>6} {:>14} {:>14}", "tp", "‖Σ − Σ_tp‖_F", "ρ-bound");
    for tp in [0, 10, 50, 100, 200, 400, 800] {
        let s = steady_state_neumann(&ops, tp)?;
        println!("{tp:>6} {:>14.3e} {:>14.3e}", (&exact - &s.sigma).norm(), s.bound);
    }

    println!("\nρ over the policy square (· bounded, # unbounded):");
    for qi in (0..=20).rev() {
        let row: String = (0..=20)
            .map(|pi| {
                let pol = SchedulingPolicy {
                    p: pi as f64 / 20.0,
                    q: qi as f64 / 20.0,
                };
                if spectral_radius(&build_operators(&disc, pol)) < 1.0 {
                    '·'
                } else {
                    '#'
                }
            })
            .collect();
        println!("q={:.2} {row}", qi as f64 / 20.0);
    }
    println!("       p → 0 … 1");
    Ok(())
}
