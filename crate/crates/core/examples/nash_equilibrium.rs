//! Scheduling equilibrium of both built-in games: alternating best responses
//! from random starts, a unilateral-deviation check, and the grid method.
//!
//!     cargo run --release --example nash_equilibrium

use netgame::covariance::Solver;
use netgame::model::{discretize, GameSpec};
use netgame::presets::{example1, pursuit_evasion};
use netgame::riccati::solve_game_riccati;
use netgame::scheduler::{
    deviation_scan, nash_exhaustive, nash_multistart, ExhaustiveOptions, NashOptions, SchedulingGame,
};

fn report(spec: &GameSpec) -> Result<(), Box<dyn std::error::Error>> {
    let ric = solve_game_riccati(spec)?;
    let disc = discretize(spec, &ric)?;
    let game = SchedulingGame::new(spec, &ric, &disc).with_solver(Solver::Direct);
    println!("== {} ==", spec.name.as_deref().unwrap_or("game"));

    let ms = nash_multistart(&game, &NashOptions::default(), 10, 2024)?;
    let converged = ms.runs.iter().filter(|r| r.converged).count();
    println!(
        "{converged}/{} starts converged to {} fixed point(s)",
        ms.runs.len(),
        ms.equilibria.len()
    );
    for (k, eq) in ms.equilibria.iter().enumerate() {
        let tag = if ms.undominated.contains(&k) {
            ""
        } else {
            " (dominated)"
        };
        println!(
            "  (p*, q*) = ({:.4}, {:.4})  J1 = {:.3}  J2 = {:.3}  from {} start(s){tag}",
            eq.p,
            eq.q,
            eq.costs.j1,
            eq.costs.j2,
            eq.members.len()
        );
        let dev = deviation_scan(&game, eq.p, eq.q, 0.01, 1e-3)?;
        println!(
            "  best unilateral deviation gains: P1 {:.2e} (to p = {:.2}), P2 {:.2e} (to q = {:.2})",
            dev.p1_gain, dev.p1_best, dev.p2_gain, dev.p2_best
        );
    }
    let first = &ms.runs[0];
    println!(
        "  start 0 path: {:?}",
        first
            .trace
            .iter()
            .map(|(p, q)| format!("({p:.3}, {q:.3})"))
            .collect::<Vec<_>>()
    );

    let ex = nash_exhaustive(
        &game,
        &ExhaustiveOptions {
            grid: 0.02,
            ..Default::default()
        },
    )?;
    println!("grid method (step 0.02, σ = {}): {:?}", ex.sigma, ex.ne_pairs);
    if let Some(note) = ex.advisory {
        println!("  note: {note}");
    }
    println!("Ĵ* (no communication losses) = {:.4}\n", game.jtilde());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    report(&example1())?;
    report(&pursuit_evasion())
}
