//! Game Riccati equation, well-posedness certificate and stability checks.
//!
//! Both Riccati equations here have the form `AᵀX + XA + Q + X S X = 0` with
//! a symmetric, sign-indefinite `S`. The stabilizing solution (the one making
//! `A + S X` Hurwitz) spans the stable invariant subspace of the Hamiltonian
//! `[[A, S], [−Q, −Aᵀ]]`; that subspace is read off the matrix sign function
//! and then polished by Newton steps on the Riccati residual.

use serde::Serialize;

use crate::error::RiccatiError;
use crate::linalg::{self, Mat};
use crate::model::GameSpec;

/// Relative distance from the imaginary axis below which a Hamiltonian
/// eigenvalue is treated as lying on it.
pub const AXIS_TOL: f64 = 1e-9;
/// Relative Riccati residual accepted after refinement.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Hurwitz margin used by [`check_hurwitz`].
pub const HURWITZ_MARGIN: f64 = 1e-10;

const SIGN_MAX_ITERS: usize = 100;
const NEWTON_STEPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiSolution {
    pub p: Mat,
    /// `P S1 P`
    pub lambda1: Mat,
    /// `P S2 P`
    pub lambda2: Mat,
    /// `A − S1 P + S2 P`
    pub atilde: Mat,
    /// Continuous game value `tr(P G Gᵀ)`.
    pub jstar: f64,
    /// Frobenius norm of the Riccati residual.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellPosednessCert {
    /// Nonpositive solution of `P̃A + AᵀP̃ − Q − P̃ S2 P̃ = 0`.
    pub p11tilde: Mat,
    /// `A − S2 P̃`
    pub ap: Mat,
    pub atilde_hurwitz: bool,
    pub ap_hurwitz: bool,
    pub residual: f64,
    /// Real roots of the scalar equation (only filled when `n = 1`).
    pub real_roots: Vec<f64>,
}

/// True iff every eigenvalue has real part below `-1e-10`.
pub fn check_hurwitz(m: &Mat) -> bool {
    m.is_square() && linalg::max_real_part(m) < -HURWITZ_MARGIN
}

/// `AᵀX + XA + Q + XSX`
pub fn riccati_residual(a: &Mat, s: &Mat, q: &Mat, x: &Mat) -> Mat {
    a.transpose() * x + x * a + q + x * s * x
}

/// Stabilizing solution of `AᵀX + XA + Q + XSX = 0`.
///
/// Returns the solution and the Frobenius norm of its residual. Fails with
/// [`RiccatiError::IllPosed`] when the Hamiltonian has eigenvalues on the
/// imaginary axis, and with [`RiccatiError::NoStabilizingSolution`] when the
/// refined solution is not stabilizing or misses the residual tolerance.
pub fn solve_stabilizing_are(a: &Mat, s: &Mat, q: &Mat) -> Result<(Mat, f64), RiccatiError> {
    let n = a.nrows();
    let ham = linalg::block2(a, s, &(-q), &(-a.transpose()));
    let scale = linalg::spectral_norm(&ham).max(f64::MIN_POSITIVE);
    let margin = linalg::eigenvalues(&ham)
        .ok_or_else(|| RiccatiError::NoStabilizingSolution("Hamiltonian eigenvalues did not converge".into()))?
        .iter()
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min);
    if margin <= AXIS_TOL * scale {
        return Err(RiccatiError::IllPosed { margin });
    }

    let w = matrix_sign(&ham).ok_or(RiccatiError::IllPosed { margin })?;
    // (W + I) [I; X] = 0
    let eye = Mat::identity(n, n);
    let w11 = w.view((0, 0), (n, n)).into_owned();
    let w12 = w.view((0, n), (n, n)).into_owned();
    let w21 = w.view((n, 0), (n, n)).into_owned();
    let w22 = w.view((n, n), (n, n)).into_owned();
    let mut lhs = Mat::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = Mat::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let x = lhs
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|e| RiccatiError::NoStabilizingSolution(e.to_string()))?;
    let mut x = linalg::sym(&x);

    let mut res = riccati_residual(a, s, q, &x).norm();
    for _ in 0..NEWTON_STEPS {
        let tol = RESIDUAL_TOL * (1.0 + x.norm().powi(2));
        if res <= 1e-3 * tol {
            break;
        }
        let closed = a + s * &x;
        let Some(delta) = linalg::solve_lyapunov(&closed, &(-riccati_residual(a, s, q, &x))) else {
            break;
        };
        let cand = linalg::sym(&(&x + delta));
        let cand_res = riccati_residual(a, s, q, &cand).norm();
        if !(cand_res < res) {
            break;
        }
        x = cand;
        res = cand_res;
    }

    if !linalg::is_finite(&x) {
        return Err(RiccatiError::NoStabilizingSolution("non-finite solution".into()));
    }
    let tol = RESIDUAL_TOL * (1.0 + x.norm().powi(2));
    if res > tol {
        return Err(RiccatiError::NoStabilizingSolution(format!(
            "residual {res:.3e} exceeds {tol:.3e}"
        )));
    }
    if !check_hurwitz(&(a + s * &x)) {
        return Err(RiccatiError::NoStabilizingSolution(
            "closed-loop matrix is not Hurwitz".into(),
        ));
    }
    Ok((x, res))
}

/// Newton iteration for `sign(H)` with determinant scaling.
fn matrix_sign(h: &Mat) -> Option<Mat> {
    let dim = h.nrows() as f64;
    let mut z = h.clone();
    for _ in 0..SIGN_MAX_ITERS {
        let inv = z.clone().try_inverse()?;
        let det = z.determinant().abs();
        let c = if det.is_finite() && det > 0.0 {
            det.powf(-1.0 / dim)
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm() / next.norm();
        z = next;
        if !linalg::is_finite(&z) {
            return None;
        }
        if change < 1e-14 {
            break;
        }
    }
    // one unscaled step cleans up the last digits
    let inv = z.clone().try_inverse()?;
    Some((&z + inv) * 0.5)
}

/// Stabilizing PSD solution of `AᵀP + PA + Q + P(S2 − S1)P = 0` with the
/// equilibrium gains derived from it.
pub fn solve_game_riccati(spec: &GameSpec) -> Result<RiccatiSolution, RiccatiError> {
    let s1 = spec.s1();
    let s2 = spec.s2();
    let (p, residual) = solve_stabilizing_are(&spec.a, &(&s2 - &s1), &spec.q)?;
    let min_eig = linalg::min_sym_eigenvalue(&p);
    if min_eig < -RESIDUAL_TOL * (1.0 + p.norm()) {
        return Err(RiccatiError::NotPsd { min_eig, residual });
    }
    let atilde = &spec.a - &s1 * &p + &s2 * &p;
    let jstar = (&p * &spec.g * spec.g.transpose()).trace();
    Ok(RiccatiSolution {
        lambda1: linalg::sym(&(&p * &s1 * &p)),
        lambda2: linalg::sym(&(&p * &s2 * &p)),
        atilde,
        jstar,
        residual,
        p,
    })
}

/// Solves `P̃A + AᵀP̃ − Q − P̃ S2 P̃ = 0` for the branch with `A − S2 P̃`
/// Hurwitz and checks that it is nonpositive.
///
/// With `X = −P̃` the equation becomes `AᵀX + XA + Q + X S2 X = 0`, handled by
/// [`solve_stabilizing_are`].
pub fn solve_wellposedness_are(spec: &GameSpec, riccati: &RiccatiSolution) -> Result<WellPosednessCert, RiccatiError> {
    let s2 = spec.s2();
    let real_roots = if spec.n() == 1 {
        scalar_roots(spec.a[(0, 0)], spec.q[(0, 0)], s2[(0, 0)])
    } else {
        Vec::new()
    };
    let (x, residual) = solve_stabilizing_are(&spec.a, &s2, &spec.q).map_err(|e| RiccatiError::WellPosedness {
        detail: e.to_string(),
        real_roots: real_roots.clone(),
    })?;
    let p11tilde = -x;
    let max_eig = linalg::sym_eigenvalues(&p11tilde).last().copied().unwrap_or(0.0);
    if max_eig > RESIDUAL_TOL * (1.0 + p11tilde.norm()) {
        return Err(RiccatiError::WellPosedness {
            detail: format!("stabilizing solution is not nonpositive (max eigenvalue {max_eig:.6})"),
            real_roots,
        });
    }
    let ap = &spec.a - &s2 * &p11tilde;
    Ok(WellPosednessCert {
        atilde_hurwitz: check_hurwitz(&riccati.atilde),
        ap_hurwitz: check_hurwitz(&ap),
        p11tilde,
        ap,
        residual,
        real_roots,
    })
}

/// Real roots of `−s2 x² + 2 a x − q = 0`, ascending.
fn scalar_roots(a: f64, q: f64, s2: f64) -> Vec<f64> {
    if s2 == 0.0 {
        return if a != 0.0 { vec![q / (2.0 * a)] } else { Vec::new() };
    }
    // s2 x² − 2a x + q = 0
    let disc = a * a - s2 * q;
    if disc < 0.0 {
        return Vec::new();
    }
    let r = disc.sqrt();
    let mut roots = vec![(a - r) / s2, (a + r) / s2];
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    roots
}
