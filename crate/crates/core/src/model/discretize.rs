//! Exact sampling of the coupled estimation-error dynamics.
//!
//! The stacked error `e = [e1; e2]` obeys `de = Ā e dt + Ḡ dW` between
//! communications. Every integral needed downstream is a block of the
//! exponential of an augmented matrix (Van Loan's construction), so nothing
//! here is approximated beyond the matrix exponential itself.

use serde::Serialize;

use super::expm::expm;
use super::GameSpec;
use crate::error::ModelError;
use crate::linalg::{self, Mat};
use crate::riccati::RiccatiSolution;

/// `P` is treated as singular above this 2-norm condition number.
pub const MAX_GAIN_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizedModel {
    pub n: usize,
    pub h: f64,
    /// Error drift `[[A + S2 P, −S2 P], [S1 P, A − S1 P]]`.
    pub abar: Mat,
    /// `[G; G]`
    pub gbar: Mat,
    /// `exp(Ā h)`, blocks `Φij` of size `n × n`.
    pub phi: Mat,
    /// `Diag[Λ1, −Λ2]`
    pub lambda: Mat,
    /// `Λ̄(h) / h`
    pub lambda_tilde: Mat,
    /// `φ(h) / h`
    pub phi_over_h: f64,
    pub gt1: Mat,
    pub gt2: Mat,
    pub gt3: Mat,
}

impl DiscretizedModel {
    /// Block `(i, j)` of `exp(Ā h)`, one-based as in `Φ11 … Φ22`.
    pub fn phi_block(&self, i: usize, j: usize) -> Mat {
        assert!((1..=2).contains(&i) && (1..=2).contains(&j));
        let n = self.n;
        self.phi.view(((i - 1) * n, (j - 1) * n), (n, n)).into_owned()
    }

    /// `[[G̃1, G̃2], [G̃2ᵀ, G̃3]]`
    pub fn gtilde(&self) -> Mat {
        linalg::block2(&self.gt1, &self.gt2, &self.gt2.transpose(), &self.gt3)
    }
}

/// `∫₀ʰ exp(Mᵀ s) W exp(M s) ds`
pub fn weighted_gramian(m: &Mat, w: &Mat, h: f64) -> Mat {
    let k = m.nrows();
    let c = linalg::block2(&(-m.transpose()), w, &Mat::zeros(k, k), m) * h;
    let e = expm(&c);
    let f12 = e.view((0, k), (k, k));
    let f22 = e.view((k, k), (k, k));
    linalg::sym(&(f22.transpose() * f12))
}

/// `∫₀ʰ exp(M τ) W exp(Mᵀ τ) dτ`
pub fn noise_gramian(m: &Mat, w: &Mat, h: f64) -> Mat {
    weighted_gramian(&m.transpose(), w, h)
}

/// `∫₀ʰ ∫₀ᵗ exp(Mᵀ s) W exp(M s) ds dt`
pub fn integrated_weighted_gramian(m: &Mat, w: &Mat, h: f64) -> Mat {
    let k = m.nrows();
    let mut c = Mat::zeros(3 * k, 3 * k);
    let mt = m.transpose();
    c.view_mut((0, 0), (k, k)).copy_from(&(-&mt));
    c.view_mut((0, k), (k, k)).fill_with_identity();
    c.view_mut((k, k), (k, k)).copy_from(&(-&mt));
    c.view_mut((k, 2 * k), (k, k)).copy_from(w);
    c.view_mut((2 * k, 2 * k), (k, k)).copy_from(m);
    let e = expm(&(c * h));
    let h13 = e.view((0, 2 * k), (k, k));
    let fwd = e.view((2 * k, 2 * k), (k, k));
    linalg::sym(&(fwd.transpose() * h13))
}

/// Error drift `Ā` assembled from `P` and the input gramians.
pub fn error_drift(spec: &GameSpec, p: &Mat) -> Mat {
    let s1p = spec.s1() * p;
    let s2p = spec.s2() * p;
    linalg::block2(&(&spec.a + &s2p), &(-&s2p), &s1p, &(&spec.a - &s1p))
}

/// Samples the error dynamics at step `spec.h`.
pub fn discretize(spec: &GameSpec, riccati: &RiccatiSolution) -> Result<DiscretizedModel, ModelError> {
    spec.check_structure()?;
    let h = spec.h;
    if !(h > 0.0) {
        return Err(ModelError::Domain(format!("step h must be positive, got {h}")));
    }
    let n = spec.n();
    let sv = riccati.p.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    if !(cond <= MAX_GAIN_CONDITION) {
        return Err(ModelError::SingularGain { cond });
    }

    let abar = error_drift(spec, &riccati.p);
    let gbar = linalg::block2(&spec.g, &Mat::zeros(n, 0), &spec.g, &Mat::zeros(n, 0));
    let lambda = linalg::block_diag(&riccati.lambda1, &(-&riccati.lambda2));
    let phi = expm(&(&abar * h));
    let lambda_bar = weighted_gramian(&abar, &lambda, h);
    let gg = &gbar * gbar.transpose();
    let gtilde = noise_gramian(&abar, &gg, h);
    let lambda_int = integrated_weighted_gramian(&abar, &lambda, h);
    let phi_h = (gbar.transpose() * lambda_int * &gbar).trace();

    let out = DiscretizedModel {
        n,
        h,
        gt1: gtilde.view((0, 0), (n, n)).into_owned(),
        gt2: gtilde.view((0, n), (n, n)).into_owned(),
        gt3: gtilde.view((n, n), (n, n)).into_owned(),
        abar,
        gbar,
        phi,
        lambda,
        lambda_tilde: lambda_bar / h,
        phi_over_h: phi_h / h,
    };
    let finite = [&out.phi, &out.lambda_tilde, &out.gt1, &out.gt2, &out.gt3]
        .iter()
        .all(|m| linalg::is_finite(m))
        && out.phi_over_h.is_finite();
    if !finite {
        return Err(ModelError::NonFinite("discretized model (overflow)"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::matrix_exponential;
    use crate::presets::{example1, pursuit_evasion};
    use crate::riccati::solve_game_riccati;

    fn model(spec: &GameSpec) -> DiscretizedModel {
        discretize(spec, &solve_game_riccati(spec).unwrap()).unwrap()
    }

    #[test]
    fn scalar_error_drift() {
        let d = model(&example1());
        let want = Mat::from_row_slice(2, 2, &[5.0616, -3.5616, 7.1231, -5.6231]);
        assert!((&d.abar - want).amax() < 1e-4);
    }

    #[test]
    fn blocks_reassemble_exponential() {
        for spec in [example1(), pursuit_evasion()] {
            let d = model(&spec);
            let direct = matrix_exponential(&d.abar, d.h).unwrap();
            let top = linalg::block2(
                &d.phi_block(1, 1),
                &d.phi_block(1, 2),
                &d.phi_block(2, 1),
                &d.phi_block(2, 2),
            );
            assert!((top - direct).amax() < 1e-12);
        }
    }

    #[test]
    fn small_step_limits() {
        let spec = example1();
        let mut prev = f64::INFINITY;
        for h in [1e-2, 1e-3, 1e-4] {
            let d = model(&spec.clone().with_h(h));
            let err = (&d.lambda_tilde - &d.lambda).amax() / d.lambda.amax();
            // first order in h
            assert!(err < 10.0 * h, "h = {h}: {err}");
            assert!(err < prev / 5.0);
            prev = err;
            assert!(d.phi_over_h.abs() < 1e3 * h);
        }
    }

    #[test]
    fn noiseless_game_has_no_noise_terms() {
        let mut spec = pursuit_evasion();
        spec.g = Mat::zeros(2, 2);
        let d = model(&spec);
        assert_eq!(d.gtilde().amax(), 0.0);
        assert_eq!(d.phi_over_h, 0.0);
    }

    #[test]
    fn noise_blocks_are_psd() {
        for spec in [example1(), pursuit_evasion()] {
            let d = model(&spec);
            for m in [&d.gt1, &d.gt3, &d.gtilde()] {
                assert!(linalg::asymmetry(m) < 1e-14);
                assert!(linalg::min_sym_eigenvalue(m) > -1e-12);
            }
        }
    }

    #[test]
    fn psd_weight_gives_nonnegative_offset() {
        let d = model(&example1());
        let w = Mat::identity(2, 2);
        let int = integrated_weighted_gramian(&d.abar, &w, d.h);
        assert!((d.gbar.transpose() * int * &d.gbar).trace() >= 0.0);
    }

    #[test]
    fn rejects_bad_step() {
        let spec = example1();
        let sol = solve_game_riccati(&spec).unwrap();
        let bad = spec.with_h(-0.01);
        assert!(matches!(discretize(&bad, &sol), Err(ModelError::Domain(_))));
    }

    #[test]
    fn singular_gain_rejected() {
        let spec = pursuit_evasion();
        let mut sol = solve_game_riccati(&spec).unwrap();
        sol.p[(1, 1)] = 0.0;
        assert!(matches!(discretize(&spec, &sol), Err(ModelError::SingularGain { .. })));
    }
}
