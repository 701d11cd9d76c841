//! Small dense linear-algebra helpers shared by the solvers.
//!
//! Everything here works on `DMatrix<f64>`; the problem dimensions are tiny
//! (state dimension of a handful, Kronecker systems of a few hundred rows),
//! so dense factorizations are used throughout.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type Mat = DMatrix<f64>;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Mat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
        }
    }
    out
}

/// Column-stacking vectorization.
pub fn vec(m: &Mat) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}

/// `(m + mᵀ) / 2`
pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).amax()
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.is_square() && asymmetry(m) <= tol * (1.0 + m.amax())
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigenvalues from a real Schur decomposition, `None` if QR fails to converge.
///
/// nalgebra's unshifted-deflation QR can stall on reducible matrices (e.g.
/// Kronecker sums with decoupled blocks). A stalled attempt is retried on an
/// orthogonally similar matrix `H M H` with a fixed Householder reflector `H`.
pub fn eigenvalues(m: &Mat) -> Option<Vec<Complex<f64>>> {
    if m.is_empty() {
        return Some(Vec::new());
    }
    let cap = 200 * m.nrows().max(10);
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, cap) {
        return Some(s.complex_eigenvalues().iter().copied().collect());
    }
    let n = m.nrows();
    let v = DVector::from_fn(n, |i, _| ((i + 1) as f64).sqrt());
    let v = &v / v.norm();
    let h = Mat::identity(n, n) - &v * v.transpose() * 2.0;
    let s = Schur::try_new(&h * m * &h, f64::EPSILON, cap)?;
    Some(s.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part; `+∞` when the eigenvalues could not be computed.
pub fn max_real_part(m: &Mat) -> f64 {
    match eigenvalues(m) {
        Some(ev) => ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        None => f64::INFINITY,
    }
}

pub fn max_abs_eigenvalue(m: &Mat) -> Option<f64> {
    eigenvalues(m).map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = sym(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Symmetric square root of a PSD matrix. Eigenvalues in `[-neg_tol, 0)` are
/// clamped to zero; anything more negative returns `None`.
pub fn psd_sqrt(m: &Mat, neg_tol: f64) -> Option<Mat> {
    let n = m.nrows();
    if n == 0 {
        return Some(Mat::zeros(0, 0));
    }
    let eig = sym(m).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -neg_tol) {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Solves `aᵀ X + X a = rhs` through its Kronecker form.
pub fn solve_lyapunov(a: &Mat, rhs: &Mat) -> Option<Mat> {
    let n = a.nrows();
    let eye = Mat::identity(n, n);
    let at = a.transpose();
    // vec(aᵀX) = (I ⊗ aᵀ) vec X,  vec(X a) = (aᵀ ⊗ I) vec X
    let op = kron(&eye, &at) + kron(&at, &eye);
    let x = op.lu().solve(&vec(rhs))?;
    Some(sym(&unvec(&x, n, n)))
}

pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Assembles a 2×2 block matrix.
pub fn block2(a11: &Mat, a12: &Mat, a21: &Mat, a22: &Mat) -> Mat {
    let (r1, c1) = a11.shape();
    let (r2, c2) = a22.shape();
    let mut out = Mat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a11);
    out.view_mut((0, c1), (r1, c2)).copy_from(a12);
    out.view_mut((r1, 0), (r2, c1)).copy_from(a21);
    out.view_mut((r1, c1), (r2, c2)).copy_from(a22);
    out
}

/// Relative difference `‖a − b‖_max / max(‖b‖_max, floor)`.
pub fn rel_diff(a: &Mat, b: &Mat, floor: f64) -> f64 {
    (a - b).amax() / b.amax().max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_definition() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = Mat::from_row_slice(1, 2, &[0.5, -1.0]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 4));
        assert_eq!(k.row(1).iter().copied().collect::<Vec<_>>(), vec![1.5, -3.0, 2.0, -4.0]);
    }

    #[test]
    fn kron_vec_identity() {
        // vec(A X B) = (Bᵀ ⊗ A) vec X
        let a = Mat::from_row_slice(2, 2, &[1.0, -2.0, 0.3, 4.0]);
        let x = Mat::from_row_slice(2, 2, &[0.1, 0.7, -1.2, 2.0]);
        let b = Mat::from_row_slice(2, 2, &[2.0, 1.0, 0.0, -1.0]);
        let lhs = vec(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec(&x);
        assert!((lhs - rhs).amax() < 1e-14);
    }

    #[test]
    fn lyapunov_residual_vanishes() {
        let a = Mat::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let q = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let x = solve_lyapunov(&a, &(-&q)).unwrap();
        let r = a.transpose() * &x + &x * &a + &q;
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_reducible_kronecker_sum() {
        // decoupled blocks where a plain Schur sweep stalls
        let a = Mat::from_row_slice(2, 2, &[0.65, -0.009, 0.009, 0.31]);
        let k = kron(&Mat::identity(2, 2), &a) + kron(&a, &Mat::identity(2, 2)) * 0.01;
        let ev = eigenvalues(&k).unwrap();
        assert_eq!(ev.len(), 4);
        let tr: f64 = ev.iter().map(|z| z.re).sum();
        assert!((tr - k.trace()).abs() < 1e-12);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(psd_sqrt(&m, 1e-10).is_none());
        let m = Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let r = psd_sqrt(&m, 1e-10).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-14 && (r[(1, 1)] - 3.0).abs() < 1e-14);
    }
}
