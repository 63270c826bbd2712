//! The integers `d(k)` with `‖B^{⌊εk⌋}A^{-k-d(k)}‖ ≤ 1` minimal, and the
//! associated `Q_k`, `z_k`, `U_k`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{epsilon_ratio, robust_floor, spectral_norm, ExpansiveMatrix};

/// Search window around the spectral guess.
const SEARCH_LIMIT: i64 = 4000;

#[derive(Clone, Debug, Serialize)]
pub struct SequenceRow {
    pub k: i64,
    /// `⌊εk⌋`.
    pub j1: i64,
    pub d: i64,
    /// `‖Q_k‖`.
    pub c: f64,
    /// `‖B^{j₁}A^{-k-d+1}‖`, above 1 by minimality.
    pub previous_norm: f64,
    pub z: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub delta: f64,
    #[serde(skip)]
    pub q: DMatrix<f64>,
}

impl SequenceRow {
    pub fn rotation(&self) -> DMatrix<f64> {
        let d = self.u.len();
        DMatrix::from_fn(d, d, |i, j| self.u[i][j])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupSequence {
    pub epsilon: f64,
    pub p: f64,
    pub delta0: f64,
    pub rows: Vec<SequenceRow>,
}

/// Householder reflection sending `e₁` to the unit vector `z`.
pub fn householder_to(z: &DVector<f64>) -> DMatrix<f64> {
    let d = z.len();
    let mut v = -z.clone();
    v[0] += 1.0;
    let vv = v.dot(&v);
    if vv < 1e-30 {
        return DMatrix::identity(d, d);
    }
    DMatrix::identity(d, d) - (&v * v.transpose()) * (2.0 / vv)
}

/// Top right singular vector, first nonzero coordinate made positive.
fn top_direction(q: &DMatrix<f64>) -> DVector<f64> {
    let svd = q.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let top = svd.singular_values.imax();
    let mut z: DVector<f64> = vt.row(top).transpose();
    z /= z.norm();
    if let Some(first) = z.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            z = -z;
        }
    }
    z
}

fn q_matrix(a: &ExpansiveMatrix, b: &ExpansiveMatrix, j1: i64, k: i64, d: i64) -> Result<DMatrix<f64>> {
    let q = b.pow(j1) * a.pow(-k - d);
    if q.iter().any(|v| !v.is_finite() || v.abs() > 1e300) {
        return Err(Error::Overflow(format!("B^{j1} A^{} is not representable", -k - d)));
    }
    Ok(q)
}

pub fn d_sequence(a: &ExpansiveMatrix, b: &ExpansiveMatrix, ks: &[i64], p: f64, delta0: f64) -> Result<BlowupSequence> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter("p must be positive".into()));
    }
    let epsilon = epsilon_ratio(a, b)?;
    let log_growth = a.norm().ln();
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        if k < 1 {
            return Err(Error::InvalidParameter(format!("k = {k} must be positive")));
        }
        let j1 = robust_floor(epsilon * k as f64);
        let norm_at = |d: i64| -> Result<f64> { Ok(spectral_norm(&q_matrix(a, b, j1, k, d)?)) };
        // ‖B^{j₁}A^{-k-d}‖ shrinks roughly like ‖A‖^{-d}
        let start = norm_at(0)?;
        let mut d = if start > 1.0 { (start.ln() / log_growth).floor() as i64 } else { 0 };
        let mut steps = 0;
        if norm_at(d)? <= 1.0 {
            while norm_at(d - 1)? <= 1.0 {
                d -= 1;
                steps += 1;
                if steps > SEARCH_LIMIT {
                    return Err(Error::Overflow(format!("no lower end for d at k = {k}")));
                }
            }
        } else {
            while norm_at(d)? > 1.0 {
                d += 1;
                steps += 1;
                if steps > SEARCH_LIMIT {
                    return Err(Error::Overflow(format!("no admissible d at k = {k}")));
                }
            }
        }
        let q = q_matrix(a, b, j1, k, d)?;
        let c = spectral_norm(&q);
        let z = top_direction(&q);
        let u = householder_to(&z);
        let delta = delta0
            * b.det_abs().powf(-(j1 as f64) / p)
            * a.det_abs().powf((k + d) as f64 / p);
        let dim = a.dim();
        rows.push(SequenceRow {
            k,
            j1,
            d,
            c,
            previous_norm: norm_at(d - 1)?,
            z: z.iter().copied().collect(),
            u: (0..dim).map(|i| (0..dim).map(|j| u[(i, j)]).collect()).collect(),
            delta,
            q,
        });
    }
    Ok(BlowupSequence { epsilon, p, delta0, rows })
}
