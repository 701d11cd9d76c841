use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg::{self, Mat};

/// Relative singular-value threshold for the PBH rank tests.
pub const PBH_RANK_TOL: f64 = 1e-9;
/// Eigenvalues of a weight below `-PSD_TOL` make it indefinite.
pub const PSD_TOL: f64 = 1e-10;
const SYM_TOL: f64 = 1e-10;

/// Per-communication costs `[[λ11, λ12], [λ21, λ22]]`.
///
/// `λij` is what player `i` pays (P1) or forgoes (P2) each time player `j`
/// transmits the state to its controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommCosts(pub [[f64; 2]; 2]);

impl CommCosts {
    pub fn new(l11: f64, l12: f64, l21: f64, l22: f64) -> Self {
        Self([[l11, l12], [l21, l22]])
    }
    pub fn l11(&self) -> f64 {
        self.0[0][0]
    }
    pub fn l12(&self) -> f64 {
        self.0[0][1]
    }
    pub fn l21(&self) -> f64 {
        self.0[1][0]
    }
    pub fn l22(&self) -> f64 {
        self.0[1][1]
    }
    pub fn with_own_costs(mut self, l11: f64, l22: f64) -> Self {
        self.0[0][0] = l11;
        self.0[1][1] = l22;
        self
    }
}

/// Continuous-time game data: `dx = (A x + B1 u1 + B2 u2) dt + G dW`,
/// running cost `‖x‖²_Q + ‖u1‖²_R1 − ‖u2‖²_R2`, plus communication costs.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub name: Option<String>,
    pub a: Mat,
    pub b1: Mat,
    pub b2: Mat,
    pub g: Mat,
    pub q: Mat,
    pub r1: Mat,
    pub r2: Mat,
    pub lambda: CommCosts,
    /// Scheduler tick / discretization step in seconds.
    pub h: f64,
    pub sigma0: Mat,
}

/// On-disk layout: matrices are row-major nested arrays, unknown keys rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B1")]
    b1: Vec<Vec<f64>>,
    #[serde(rename = "B2")]
    b2: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R1")]
    r1: Vec<Vec<f64>>,
    #[serde(rename = "R2")]
    r2: Vec<Vec<f64>>,
    lambda: CommCosts,
    h: f64,
    #[serde(rename = "Sigma0")]
    sigma0: Vec<Vec<f64>>,
}

fn from_rows(field: &'static str, rows: &[Vec<f64>]) -> Result<Mat, ModelError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(ModelError::Parse(format!(
            "{field}: row {i} has {} entries, expected {c}",
            row.len()
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl GameSpec {
    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        let raw: SpecFile = serde_json::from_str(s)
            .map_err(|e| ModelError::Parse(format!("{e} (line {}, column {})", e.line(), e.column())))?;
        let spec = GameSpec {
            name: raw.name,
            a: from_rows("A", &raw.a)?,
            b1: from_rows("B1", &raw.b1)?,
            b2: from_rows("B2", &raw.b2)?,
            g: from_rows("G", &raw.g)?,
            q: from_rows("Q", &raw.q)?,
            r1: from_rows("R1", &raw.r1)?,
            r2: from_rows("R2", &raw.r2)?,
            lambda: raw.lambda,
            h: raw.h,
            sigma0: from_rows("Sigma0", &raw.sigma0)?,
        };
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = SpecFile {
            name: self.name.clone(),
            a: to_rows(&self.a),
            b1: to_rows(&self.b1),
            b2: to_rows(&self.b2),
            g: to_rows(&self.g),
            q: to_rows(&self.q),
            r1: to_rows(&self.r1),
            r2: to_rows(&self.r2),
            lambda: self.lambda,
            h: self.h,
            sigma0: to_rows(&self.sigma0),
        };
        serde_json::to_value(raw).expect("spec serializes")
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `B1 R1⁻¹ B1ᵀ`
    pub fn s1(&self) -> Mat {
        input_gramian(&self.b1, &self.r1)
    }

    /// `B2 R2⁻¹ B2ᵀ`
    pub fn s2(&self) -> Mat {
        input_gramian(&self.b2, &self.r2)
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_lambda(mut self, lambda: CommCosts) -> Self {
        self.lambda = lambda;
        self
    }

    /// Structural checks: shapes agree and every entry is finite.
    pub fn check_structure(&self) -> Result<(), ModelError> {
        let n = self.a.nrows();
        let dim = |first, second, detail: String| ModelError::Dimension { first, second, detail };
        if self.a.ncols() != n || n == 0 {
            return Err(dim(
                "A",
                "A",
                format!("A must be square and non-empty, got {:?}", self.a.shape()),
            ));
        }
        for (name, b) in [("B1", &self.b1), ("B2", &self.b2), ("G", &self.g)] {
            if b.nrows() != n {
                return Err(dim("A", name, format!("{name} has {} rows, A is {n}×{n}", b.nrows())));
            }
        }
        for (name, m) in [("Q", &self.q), ("Sigma0", &self.sigma0)] {
            if m.shape() != (n, n) {
                return Err(dim(
                    "A",
                    name,
                    format!("{name} is {:?}, expected ({n}, {n})", m.shape()),
                ));
            }
        }
        if self.r1.shape() != (self.b1.ncols(), self.b1.ncols()) {
            return Err(dim(
                "B1",
                "R1",
                format!("R1 is {:?}, B1 has {} columns", self.r1.shape(), self.b1.ncols()),
            ));
        }
        if self.r2.shape() != (self.b2.ncols(), self.b2.ncols()) {
            return Err(dim(
                "B2",
                "R2",
                format!("R2 is {:?}, B2 has {} columns", self.r2.shape(), self.b2.ncols()),
            ));
        }
        let fields: [(&'static str, &Mat); 9] = [
            ("A", &self.a),
            ("B1", &self.b1),
            ("B2", &self.b2),
            ("G", &self.g),
            ("Q", &self.q),
            ("R1", &self.r1),
            ("R2", &self.r2),
            ("Sigma0", &self.sigma0),
            ("Sigma0", &self.sigma0),
        ];
        for (name, m) in fields {
            if !linalg::is_finite(m) {
                return Err(ModelError::NonFinite(name));
            }
        }
        if !self.h.is_finite() || self.lambda.0.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("h / lambda"));
        }
        Ok(())
    }
}

fn input_gramian(b: &Mat, r: &Mat) -> Mat {
    if b.ncols() == 0 {
        return Mat::zeros(b.nrows(), b.nrows());
    }
    let r_inv_bt = r
        .clone()
        .lu()
        .solve(&b.transpose())
        .unwrap_or_else(|| Mat::from_element(b.ncols(), b.nrows(), f64::NAN));
    linalg::sym(&(b * r_inv_bt))
}

/// Outcome of the standing-assumption checks on a [`GameSpec`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// PBH test on `(A, B1)`.
    pub stabilizable: bool,
    /// PBH test on `(A, Q^{1/2})`.
    pub observable: bool,
    /// Symmetry / definiteness of `Q`, `R1`, `R2`, `Sigma0`.
    pub weights_valid: bool,
    /// `λ11 > 0`, `λ22 > 0`, `h > 0`.
    pub parameters_valid: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.stabilizable && self.observable && self.weights_valid && self.parameters_valid
    }
}

/// Checks the game against the standing assumptions.
///
/// Shape errors are returned as `Err`; every other failed check is recorded
/// in the report.
pub fn validate_spec(spec: &GameSpec) -> Result<ValidationReport, ModelError> {
    spec.check_structure()?;
    let mut messages = Vec::new();
    let mut weights_valid = true;

    let mut check_sym = |name: &str, m: &Mat, definite: bool| -> bool {
        if !linalg::is_symmetric(m, SYM_TOL) {
            messages.push(format!("{name} is not symmetric"));
            return false;
        }
        let min = linalg::min_sym_eigenvalue(m);
        if definite && min <= 0.0 {
            messages.push(format!("{name} is not positive definite (min eigenvalue {min:.3e})"));
            return false;
        }
        if !definite && min < -PSD_TOL {
            messages.push(format!(
                "{name} is not positive semidefinite (min eigenvalue {min:.3e})"
            ));
            return false;
        }
        true
    };
    weights_valid &= check_sym("Q", &spec.q, false);
    weights_valid &= check_sym("R1", &spec.r1, true);
    weights_valid &= check_sym("R2", &spec.r2, true);
    weights_valid &= check_sym("Sigma0", &spec.sigma0, false);

    let mut parameters_valid = true;
    if spec.lambda.l11() <= 0.0 {
        messages.push(format!("lambda11 must be > 0, got {}", spec.lambda.l11()));
        parameters_valid = false;
    }
    if spec.lambda.l22() <= 0.0 {
        messages.push(format!("lambda22 must be > 0, got {}", spec.lambda.l22()));
        parameters_valid = false;
    }
    if spec.h <= 0.0 {
        messages.push(format!("h must be > 0, got {}", spec.h));
        parameters_valid = false;
    }

    let stabilizable = pbh_stabilizable(&spec.a, &spec.b1);
    if !stabilizable {
        messages.push("(A, B1) is not stabilizable".into());
    }
    let observable = match q_sqrt(&spec.q) {
        Some(c) => pbh_observable(&spec.a, &c),
        None => {
            messages.push("Q not PSD: Q^{1/2} undefined".into());
            false
        }
    };
    if !observable {
        messages.push("(A, Q^{1/2}) is not observable".into());
    }
    Ok(ValidationReport {
        stabilizable,
        observable,
        weights_valid,
        parameters_valid,
        messages,
    })
}

/// Symmetric square root of `Q`; `None` when `Q` has an eigenvalue below `-1e-10`.
pub fn q_sqrt(q: &Mat) -> Option<Mat> {
    linalg::psd_sqrt(q, PSD_TOL)
}

fn to_complex(m: &Mat) -> DMatrix<Complex<f64>> {
    m.map(|x| Complex::new(x, 0.0))
}

fn numerical_rank(m: &DMatrix<Complex<f64>>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > PBH_RANK_TOL * smax).count()
}

/// `rank [A − λI, B] = n` for every eigenvalue with `Re λ ≥ 0`.
pub fn pbh_stabilizable(a: &Mat, b: &Mat) -> bool {
    let n = a.nrows();
    let Some(ev) = linalg::eigenvalues(a) else {
        return false;
    };
    ev.into_iter().filter(|l| l.re >= 0.0).all(|l| {
        let mut m = DMatrix::<Complex<f64>>::zeros(n, n + b.ncols());
        let shifted = to_complex(a) - DMatrix::<Complex<f64>>::identity(n, n) * l;
        m.view_mut((0, 0), (n, n)).copy_from(&shifted);
        m.view_mut((0, n), (n, b.ncols())).copy_from(&to_complex(b));
        numerical_rank(&m) == n
    })
}

/// `rank [A − λI; C] = n` for every eigenvalue of `A`.
pub fn pbh_observable(a: &Mat, c: &Mat) -> bool {
    let n = a.nrows();
    let Some(ev) = linalg::eigenvalues(a) else {
        return false;
    };
    ev.into_iter().all(|l| {
        let mut m = DMatrix::<Complex<f64>>::zeros(n + c.nrows(), n);
        let shifted = to_complex(a) - DMatrix::<Complex<f64>>::identity(n, n) * l;
        m.view_mut((0, 0), (n, n)).copy_from(&shifted);
        m.view_mut((n, 0), (c.nrows(), n)).copy_from(&to_complex(c));
        numerical_rank(&m) == n
    })
}
