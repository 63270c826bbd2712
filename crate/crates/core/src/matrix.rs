//! Expansive matrices, their spectral parameters and the canonical ellipsoid.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DET_FLOOR: f64 = 1e-12;
const EXPANSIVE_MARGIN: f64 = 1e-10;
const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 500;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    m.singular_values().max()
}

/// `floor(x)` that tolerates `x` landing a few ulps below an integer.
pub fn robust_floor(x: f64) -> i64 {
    (x + 1e-9 * x.abs().max(1.0)).floor() as i64
}

/// Volume of the Euclidean unit ball in dimension `d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub d: usize,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.rows.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: self.rows.len() });
        }
        for row in &self.rows {
            if row.len() != self.d {
                return Err(Error::NotSquare { rows: self.d, cols: row.len() });
            }
        }
        Ok(DMatrix::from_fn(self.d, self.d, |i, j| self.rows[i][j]))
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixJson {
            d: m.nrows(),
            rows: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect(),
        }
    }
}

/// A real matrix whose eigenvalues all have modulus strictly above one.
#[derive(Clone, Debug)]
pub struct ExpansiveMatrix {
    entries: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
    spectrum: Vec<Complex64>,
    lambda_minus: f64,
    lambda_plus: f64,
    zeta_minus: f64,
    zeta_plus: f64,
    norm: f64,
}

impl PartialEq for ExpansiveMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

/// Checks that `m` is expansive and caches its spectral data.
pub fn validate_expansive(m: DMatrix<f64>) -> Result<ExpansiveMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let det = m.determinant();
    if det.abs() < DET_FLOOR {
        return Err(Error::NotInvertible { det_abs: det.abs() });
    }
    let spectrum: Vec<Complex64> = m.complex_eigenvalues().iter().copied().collect();
    let min_mod = spectrum.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let max_mod = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if min_mod <= 1.0 + EXPANSIVE_MARGIN {
        return Err(Error::NotExpansive { modulus: min_mod });
    }
    let inverse = m.clone().try_inverse().ok_or(Error::NotInvertible { det_abs: det.abs() })?;
    let lambda_minus = min_mod.sqrt();
    let lambda_plus = 2.0 * max_mod;
    let ln_det = det.abs().ln();
    let norm = spectral_norm(&m);
    Ok(ExpansiveMatrix {
        entries: m,
        inverse,
        det,
        spectrum,
        lambda_minus,
        lambda_plus,
        zeta_minus: lambda_minus.ln() / ln_det,
        zeta_plus: lambda_plus.ln() / ln_det,
        norm,
    })
}

impl ExpansiveMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let json = MatrixJson { d: rows.len(), rows: rows.to_vec() };
        validate_expansive(json.to_matrix()?)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        validate_expansive(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn scalar(d: usize, a: f64) -> Result<Self> {
        validate_expansive(DMatrix::identity(d, d) * a)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn det_abs(&self) -> f64 {
        self.det.abs()
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }

    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }

    pub fn zeta_minus(&self) -> f64 {
        self.zeta_minus
    }

    pub fn zeta_plus(&self) -> f64 {
        self.zeta_plus
    }

    /// Spectral norm ‖A‖.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn min_modulus(&self) -> f64 {
        self.spectrum.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    /// `A^k` for any integer `k`, by binary powering of `A` or `A^{-1}`.
    pub fn pow(&self, k: i64) -> DMatrix<f64> {
        let base = if k >= 0 { &self.entries } else { &self.inverse };
        binary_power(base, k.unsigned_abs())
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.entries * x
    }

    pub fn apply_inverse(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.inverse * x
    }

    /// The transpose, with the same spectral data.
    pub fn adjoint(&self) -> ExpansiveMatrix {
        ExpansiveMatrix {
            entries: self.entries.transpose(),
            inverse: self.inverse.transpose(),
            norm: self.norm,
            spectrum: self.spectrum.clone(),
            ..*self
        }
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(&self.entries)
    }
}

pub fn binary_power(base: &DMatrix<f64>, mut e: u64) -> DMatrix<f64> {
    let n = base.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut square = base.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &square;
        }
        e >>= 1;
        if e > 0 {
            square = &square * &square;
        }
    }
    result
}

/// `ln|det A| / ln|det B|`.
pub fn epsilon_ratio(a: &ExpansiveMatrix, b: &ExpansiveMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(a.det_abs().ln() / b.det_abs().ln())
}

/// Random expansive matrix with smallest eigenvalue modulus in `[1.3, 3]`
/// and moduli spread at most 8.
pub fn random_expansive<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ExpansiveMatrix {
    loop {
        let g = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let eig = g.complex_eigenvalues();
        let min = eig.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let max = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if min < 1e-2 || max / min > 8.0 {
            continue;
        }
        let target = rng.random_range(1.3..3.0);
        if let Ok(m) = validate_expansive(g * (target / min)) {
            return m;
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EllipsoidJson {
    pub shape: Vec<Vec<f64>>,
    pub scale: f64,
    pub r: f64,
}

/// `Ω = {x : (xᵀMx)^{1/2} < t}` with `Ω ⊆ rΩ ⊆ AΩ` and unit volume.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    shape: DMatrix<f64>,
    scale: f64,
    r: f64,
    // Upper Cholesky factor U with M = UᵀU.
    factor: DMatrix<f64>,
}

pub fn build_ellipsoid(e: &ExpansiveMatrix) -> Result<Ellipsoid> {
    let d = e.dim();
    let c = e.lambda_minus();
    let step = e.inverse() * c;
    let mut p = DMatrix::<f64>::identity(d, d);
    let mut shape = DMatrix::<f64>::zeros(d, d);
    let mut terms = 0;
    loop {
        let term = p.transpose() * &p;
        if spectral_norm(&term) < SERIES_TOL {
            break;
        }
        if terms >= SERIES_MAX_TERMS {
            return Err(Error::ConvergenceFailure { terms });
        }
        shape += term;
        p = &p * &step;
        terms += 1;
    }
    let shape = (&shape + shape.transpose()) * 0.5;
    let chol = shape.clone().cholesky().ok_or(Error::ConvergenceFailure { terms })?;
    let factor = chol.l().transpose();
    let det_m = shape.determinant();
    let scale = (det_m.sqrt() / unit_ball_volume(d)).powf(1.0 / d as f64);
    Ok(Ellipsoid { shape, scale, r: c, factor })
}

impl Ellipsoid {
    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Upper Cholesky factor `U` with `M = UᵀU`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `(xᵀMx)^{1/2}`.
    pub fn m_norm(&self, x: &DVector<f64>) -> f64 {
        (&self.factor * x).norm()
    }

    /// Minkowski functional of `Ω`: `x ∈ Ω ⇔ gauge(x) < 1`.
    pub fn gauge(&self, x: &DVector<f64>) -> f64 {
        self.m_norm(x) / self.scale
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.m_norm(x) < self.scale
    }

    pub fn volume(&self) -> f64 {
        let d = self.dim();
        self.scale.powi(d as i32) * unit_ball_volume(d) / self.shape.determinant().sqrt()
    }

    /// Largest `|A⁻¹x|_M / |x|_M`, from the generalized eigenproblem
    /// `(A^{-T} M A^{-1}) v = μ M v`. The contract asks for at most `1/r`.
    pub fn contraction_factor(&self, e: &ExpansiveMatrix) -> f64 {
        let ut_inv = match self.factor.transpose().try_inverse() {
            Some(m) => m,
            None => return f64::INFINITY,
        };
        let pulled = e.inverse().transpose() * &self.shape * e.inverse();
        let s = &ut_inv * pulled * ut_inv.transpose();
        let s = (&s + s.transpose()) * 0.5;
        s.symmetric_eigenvalues().max().max(0.0).sqrt()
    }

    /// Half-widths of the axis-aligned bounding box of `T·Ω`.
    pub fn image_half_widths(&self, t: &DMatrix<f64>) -> Vec<f64> {
        // Ω = {U⁻¹ s w : |w| < 1}; row k of T U⁻¹ gives the extent in coordinate k.
        let u_inv = self.factor.clone().try_inverse().expect("Cholesky factor is invertible");
        let tm = t * u_inv;
        (0..tm.nrows()).map(|k| tm.row(k).norm() * self.scale).collect()
    }

    pub fn to_json(&self) -> EllipsoidJson {
        EllipsoidJson { shape: MatrixJson::from_matrix(&self.shape).rows, scale: self.scale, r: self.r }
    }
}
