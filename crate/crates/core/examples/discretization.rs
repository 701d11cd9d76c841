//! Sampled-data quantities of the estimation-error process at a few tick
//! lengths: transition blocks, weighted gramians and the noise constant.
//!
//!     cargo run --example discretization

use netgame::model::discretize;
use netgame::presets::example1;
use netgame::riccati::solve_game_riccati;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = example1();
    let ric = solve_game_riccati(&base)?;
    println!("error drift Ā ={:.4}", netgame::model::error_drift(&base, &ric.p));

    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10} {:>12} {:>12}",
        "h", "Φ11", "Φ12", "Φ21", "Φ22", "tr Λ̃", "φ/h"
    );
    for h in [0.001, 0.01, 0.05, 0.1, 0.5] {
        let spec = base.clone().with_h(h);
        let d = discretize(&spec, &ric)?;
        println!(
            "{h:>6} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>12.4} {:>12.4}",
            d.phi[(0, 0)],
            d.phi[(0, 1)],
            d.phi[(1, 0)],
            d.phi[(1, 1)],
            d.lambda_tilde.trace(),
            d.phi_over_h,
        );
    }

    let d = discretize(&base, &ric)?;
    println!("\nat h = {}:", base.h);
    println!("G̃ (noise gramian of one tick) ={:.6}", d.gtilde());
    println!("Λ̃ (tick-averaged cost weight) ={:.6}", d.lambda_tilde);
    Ok(())
}
