//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (degrees 3, 5, 7, 9, 13 chosen from the 1-norm, Higham 2005).

use crate::error::ModelError;
use crate::linalg::{norm1, Mat};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// `exp(m · t)`.
pub fn matrix_exponential(m: &Mat, t: f64) -> Result<Mat, ModelError> {
    if !m.is_square() {
        return Err(ModelError::Dimension {
            first: "M",
            second: "M",
            detail: format!("matrix exponential needs a square matrix, got {:?}", m.shape()),
        });
    }
    if !t.is_finite() || m.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite("matrix exponential argument"));
    }
    let out = expm(&(m * t));
    if out.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite("matrix exponential result (overflow)"));
    }
    Ok(out)
}

pub(crate) fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let nrm = norm1(a);
    for &(deg, theta) in &THETA {
        if nrm <= theta {
            return pade_low(a, deg);
        }
    }
    let s = if nrm > THETA_13 {
        (nrm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-s);
    let mut x = pade13(&scaled);
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

fn pade_low(a: &Mat, deg: usize) -> Mat {
    let n = a.nrows();
    let b: &[f64] = match deg {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let eye = Mat::identity(n, n);
    let a2 = a * a;
    // powers of a² up to the required degree
    let mut pows = vec![eye.clone(), a2.clone()];
    while pows.len() <= deg / 2 {
        let next = pows.last().unwrap() * &a2;
        pows.push(next);
    }
    let mut u_inner = Mat::zeros(n, n);
    let mut v = Mat::zeros(n, n);
    for k in 0..=deg / 2 {
        u_inner += &pows[k] * b[2 * k + 1];
        v += &pows[k] * b[2 * k];
    }
    let u = a * u_inner;
    solve_pade(&u, &v)
}

fn pade13(a: &Mat) -> Mat {
    let n = a.nrows();
    let b = &B13;
    let eye = Mat::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (u_hi + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &eye * b[1]);
    let v_hi = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &eye * b[0];
    solve_pade(&u, &v)
}

fn solve_pade(u: &Mat, v: &Mat) -> Mat {
    let p = v + u;
    let q = v - u;
    // q is well conditioned for the selected degrees
    q.lu().solve(&p).expect("Padé denominator is singular")
}
