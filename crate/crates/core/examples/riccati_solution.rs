//! Solves the game Riccati equation for a spec file (default: the scalar
//! example) and prints the equilibrium gains and well-posedness data.
//!
//!     cargo run --example riccati_solution -- crates/core/examples/pursuit_evasion.json

use netgame::linalg::eigenvalues;
use netgame::model::{validate_spec, GameSpec};
use netgame::presets::example1;
use netgame::riccati::{solve_game_riccati, solve_wellposedness_are};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = match std::env::args().nth(1) {
        Some(path) => GameSpec::from_path(path)?,
        None => example1(),
    };
    let report = validate_spec(&spec)?;
    for m in &report.messages {
        println!("warning: {m}");
    }

    let ric = solve_game_riccati(&spec)?;
    println!("P ={:.6}", ric.p);
    println!("residual ‖AᵀP + PA + Q + P(S2 − S1)P‖_F = {:.3e}", ric.residual);
    println!("continuous game value J* = tr(P G Gᵀ) = {:.6}", ric.jstar);

    let k1 = spec.r1.clone().try_inverse().unwrap() * spec.b1.transpose() * &ric.p;
    let k2 = spec.r2.clone().try_inverse().unwrap() * spec.b2.transpose() * &ric.p;
    println!("u1 = −K1 x̂1 with K1 ={:.6}", k1);
    println!("u2 = +K2 x̂2 with K2 ={:.6}", k2);

    if let Some(ev) = eigenvalues(&ric.atilde) {
        let ev: Vec<String> = ev.iter().map(|z| format!("{:.4}{:+.4}i", z.re, z.im)).collect();
        println!("closed-loop eigenvalues: {}", ev.join(", "));
    }

    match solve_wellposedness_are(&spec, &ric) {
        Ok(cert) => {
            println!("well-posedness branch P̃ ={:.6}", cert.p11tilde);
            println!(
                "Ã Hurwitz: {}, A − S2 P̃ Hurwitz: {}",
                cert.atilde_hurwitz, cert.ap_hurwitz
            );
            if !cert.real_roots.is_empty() {
                println!("real roots of the scalar equation: {:?}", cert.real_roots);
            }
        }
        Err(e) => println!("well-posedness equation has no stabilizing solution: {e}"),
    }
    Ok(())
}
