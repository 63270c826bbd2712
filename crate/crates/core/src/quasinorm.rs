//! The step homogeneous quasi-norm `ρ_A(x) = |det A|^i` for `x ∈ A^{i+1}Ω \ A^iΩ`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{build_ellipsoid, Ellipsoid, ExpansiveMatrix};

/// Search window for the ball index.
pub const INDEX_CAP: i64 = 2000;

#[derive(Clone, Debug)]
pub struct StepQuasiNorm {
    matrix: ExpansiveMatrix,
    ellipsoid: Ellipsoid,
}

impl StepQuasiNorm {
    pub fn new(matrix: &ExpansiveMatrix) -> Result<Self> {
        let ellipsoid = build_ellipsoid(matrix)?;
        Ok(StepQuasiNorm { matrix: matrix.clone(), ellipsoid })
    }

    pub fn with_ellipsoid(matrix: &ExpansiveMatrix, ellipsoid: Ellipsoid) -> Self {
        StepQuasiNorm { matrix: matrix.clone(), ellipsoid }
    }

    pub fn matrix(&self) -> &ExpansiveMatrix {
        &self.matrix
    }

    pub fn ellipsoid(&self) -> &Ellipsoid {
        &self.ellipsoid
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Whether `x ∈ A^iΩ`, i.e. `|A^{-i}x|_M < t`.
    pub fn in_dilate(&self, x: &DVector<f64>, i: i64) -> bool {
        self.ellipsoid.contains(&(self.matrix.pow(-i) * x))
    }

    /// The unique `i` with `x ∈ A^{i+1}Ω \ A^iΩ`.
    pub fn ball_index(&self, x: &DVector<f64>) -> Result<i64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        // `m ↦ |A^{-m}x|_M` is strictly decreasing; the index is the last `m` with
        // `x ∉ A^mΩ`. Each probe recomputes `A^{-m}x` so that no round trip through
        // large powers wipes out the weak eigendirections.
        let t = self.ellipsoid.scale();
        let outside = |m: i64| -> Result<bool> {
            let y = self.matrix.pow(-m) * x;
            if y.iter().any(|v| !v.is_finite()) || y.iter().all(|&v| v == 0.0) {
                return Err(Error::IndexOverflow { cap: INDEX_CAP });
            }
            Ok(self.ellipsoid.m_norm(&y) >= t)
        };
        let (mut lo, mut hi) = if outside(0)? {
            let mut step = 1;
            while outside(step)? {
                if step > INDEX_CAP {
                    return Err(Error::IndexOverflow { cap: INDEX_CAP });
                }
                step *= 2;
            }
            (step / 2, step)
        } else {
            let mut step = 1;
            while !outside(-step)? {
                if step > INDEX_CAP {
                    return Err(Error::IndexOverflow { cap: INDEX_CAP });
                }
                step *= 2;
            }
            (-step, -step / 2)
        };
        // outside(lo) and !outside(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if outside(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// `ρ_A(x)`; zero exactly at the origin.
    pub fn rho(&self, x: &DVector<f64>) -> Result<f64> {
        if x.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let i = self.ball_index(x)?;
        Ok(self.matrix.det_abs().powi(i as i32))
    }
}

/// Sampled lower bound for the constant in `ρ(x+y) ≤ C(ρ(x)+ρ(y))`.
///
/// Radii are log-uniform over ball indices `-20..20`; each sample also tries `y = x`.
pub fn quasi_triangle_constant(q: &StepQuasiNorm, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = q.dim();
    let log_step = q.matrix().det_abs().ln() / d as f64;
    let sample = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        let dir = loop {
            let v = DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break v / n;
            }
        };
        let u: f64 = rng.random_range(-20.0..20.0);
        dir * (u * log_step).exp()
    };
    let mut best: f64 = 0.0;
    for _ in 0..n_samples {
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        let rx = q.rho(&x)?;
        let ry = q.rho(&y)?;
        best = best.max(q.rho(&(&x + &y))? / (rx + ry));
        best = best.max(q.rho(&(&x * 2.0))? / (2.0 * rx));
    }
    Ok(best)
}
