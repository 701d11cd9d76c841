//! Nash control and Bernoulli communication scheduling for two-player
//! linear-quadratic stochastic differential games.
//!
//! Each player's controller only sees the state when its scheduler pays to
//! transmit it. The equilibrium controllers are certainty-equivalent, so the
//! game reduces to choosing per-tick withholding probabilities `(p, q)` that
//! trade estimation-error cost against communication cost.
//!
//! Typical pipeline:
//!
//! ```
//! use netgame::{presets, riccati, model, covariance, scheduler};
//!
//! let spec = presets::example1();
//! let ric = riccati::solve_game_riccati(&spec).unwrap();
//! let disc = model::discretize(&spec, &ric).unwrap();
//! let game = scheduler::SchedulingGame::new(&spec, &ric, &disc);
//! let costs = game.costs(covariance::SchedulingPolicy::new(0.4, 0.5).unwrap());
//! assert!(costs.j1.is_finite());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod covariance;
pub mod error;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod riccati;
pub mod scheduler;
pub mod simulate;

pub use error::{Error, Result};
