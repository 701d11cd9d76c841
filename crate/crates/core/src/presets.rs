//! Built-in games used by the examples, tests and the CLI fixtures.

use crate::linalg::Mat;
use crate::model::{CommCosts, GameSpec};

/// Unstable scalar game: `A = 1.5, B1 = 1, B2 = 0.5, Q = 4, R1 = 1, R2 = 0.5, G = 4`,
/// `λ = [[25, 17], [25, 15]]`, `h = 0.01`, `Σ0 = 1`.
pub fn example1() -> GameSpec {
    let s = |x: f64| Mat::from_element(1, 1, x);
    GameSpec {
        name: Some("example1".into()),
        a: s(1.5),
        b1: s(1.0),
        b2: s(0.5),
        g: s(4.0),
        q: s(4.0),
        r1: s(1.0),
        r2: s(0.5),
        lambda: CommCosts::new(25.0, 17.0, 25.0, 15.0),
        h: 0.01,
        sigma0: s(1.0),
    }
}

/// Planar pursuit-evasion on the relative position `x = x_p − x_e`:
/// `A = 0, B1 = I, B2 = −I, Q = I, R1 = 0.25 I, R2 = 0.5 I`.
///
/// The noise map is not pinned down by the game description; `G = 4 I` is used,
/// matching the scalar example's intensity. `Σ0 = I`.
pub fn pursuit_evasion() -> GameSpec {
    let eye = Mat::identity(2, 2);
    GameSpec {
        name: Some("pursuit_evasion".into()),
        a: Mat::zeros(2, 2),
        b1: eye.clone(),
        b2: -&eye,
        g: &eye * 4.0,
        q: eye.clone(),
        r1: &eye * 0.25,
        r2: &eye * 0.5,
        lambda: CommCosts::new(25.0, 17.0, 25.0, 15.0),
        h: 0.01,
        sigma0: eye,
    }
}
