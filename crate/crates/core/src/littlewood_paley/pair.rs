//! Analyzing pairs built by telescoping a smooth bump, and the
//! Triebel–Lizorkin quasi-norm computed from their multipliers.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{lp_norm_of, Grid, GridFunction};
use crate::error::{Error, Result};
use crate::matrix::{build_ellipsoid, Ellipsoid, ExpansiveMatrix};

/// Quintic smoothstep, 1 for `u ≤ 0` and 0 for `u ≥ 1`, C² at both ends.
pub fn smoothstep_down(u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let v = 1.0 - u;
        v * v * v * (10.0 - 15.0 * v + 6.0 * v * v)
    }
}

/// Safety factor on the bump radius relative to the unit cube.
const CUBE_MARGIN: f64 = 0.95;

/// Multipliers `m_0 = g((A*)^{-1}·)` and `m_i = g((A*)^{-i-1}·) - g((A*)^{-i}·)`,
/// where `g` is 1 on `U = εΩ` and vanishes outside `r'εΩ`, `r' < r`.
#[derive(Clone, Debug)]
pub struct AnalyzingPair {
    matrix: ExpansiveMatrix,
    ellipsoid: Ellipsoid,
    grid: Grid,
    i_max: usize,
    epsilon: f64,
    r_prime: f64,
    multipliers: Vec<Vec<f64>>,
    residual: f64,
    covered: usize,
}

impl AnalyzingPair {
    /// The bump `g` at `ζ`.
    pub fn bump(&self, zeta: &DVector<f64>) -> f64 {
        let gamma = self.ellipsoid.gauge(zeta);
        smoothstep_down((gamma - self.epsilon) / (self.epsilon * self.r_prime - self.epsilon))
    }

    /// `m_i(ξ)` evaluated off the lattice.
    pub fn multiplier_at(&self, i: usize, xi: &DVector<f64>) -> f64 {
        let inv = self.matrix.pow(-(i as i64));
        let v = &inv * xi;
        let next = self.matrix.apply_inverse(&v);
        if i == 0 {
            self.bump(&next)
        } else {
            self.bump(&next) - self.bump(&v)
        }
    }

    pub fn matrix(&self) -> &ExpansiveMatrix {
        &self.matrix
    }

    pub fn ellipsoid(&self) -> &Ellipsoid {
        &self.ellipsoid
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    /// Scale of `U = εΩ`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn r_prime(&self) -> f64 {
        self.r_prime
    }

    pub fn multiplier(&self, i: usize) -> &[f64] {
        &self.multipliers[i]
    }

    /// `max |1 - Σ m_i|` over lattice points with `(A*)^{-i_max-1}ξ ∈ closure(U)`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Number of lattice points entering the residual.
    pub fn covered_points(&self) -> usize {
        self.covered
    }
}

/// `(ε, r')`: the bump is 1 on `εΩ` and vanishes outside `r'εΩ`, with `(E*)²εΩ`
/// inside the cube `[-½, ½]^d` up to a safety factor.
pub fn pair_scales(e_star: &ExpansiveMatrix, ellipsoid: &Ellipsoid) -> Result<(f64, f64)> {
    let widths = ellipsoid.image_half_widths(&e_star.pow(2));
    let widest = widths.iter().copied().fold(0.0, f64::max);
    if !(widest > 0.0 && widest.is_finite()) {
        return Err(Error::SupportOverflow);
    }
    let r_prime = ellipsoid.r().sqrt();
    if !(r_prime > 1.0) {
        return Err(Error::SupportOverflow);
    }
    Ok((CUBE_MARGIN * 0.5 / widest, r_prime))
}

/// Builds the pair for `E*` on the frequency lattice of `grid`.
///
/// On a grid without carrier the whole support of `m_{i_max}` must fit the window;
/// carrier grids see only a window and skip that check.
pub fn build_analyzing_pair(e_star: &ExpansiveMatrix, grid: &Grid, i_max: usize) -> Result<AnalyzingPair> {
    if e_star.dim() != grid.d {
        return Err(Error::DimensionMismatch { expected: grid.d, got: e_star.dim() });
    }
    let ellipsoid = build_ellipsoid(e_star)?;
    let (epsilon, r_prime) = pair_scales(e_star, &ellipsoid)?;
    if !grid.has_carrier() {
        let t = e_star.pow(i_max as i64);
        let needed = (0..grid.d).map(|k| 0.5 * t.row(k).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let range = grid.freq_radius();
        if needed > range {
            return Err(Error::GridTooCoarse { i_max, range, needed });
        }
    }
    let mut pair = AnalyzingPair {
        matrix: e_star.clone(),
        ellipsoid,
        grid: grid.clone(),
        i_max,
        epsilon,
        r_prime,
        multipliers: Vec::new(),
        residual: 0.0,
        covered: 0,
    };
    let n_pts = grid.len();
    // Per lattice point: g(v_0), ..., g(v_{i_max+1}) with v_i = (A*)^{-i}ξ.
    let bumps: Vec<(Vec<f64>, bool)> = (0..n_pts)
        .into_par_iter()
        .map(|k| {
            let mut v = DVector::from_vec(grid.freq(k));
            let mut g = Vec::with_capacity(i_max + 2);
            for _ in 0..=i_max + 1 {
                g.push(pair.bump(&v));
                v = e_star.apply_inverse(&v);
            }
            // v now holds v_{i_max+2}; the band test uses v_{i_max+1}.
            let last = e_star.apply(&v);
            let covered = pair.ellipsoid.gauge(&last) <= epsilon;
            (g, covered)
        })
        .collect();
    let mut multipliers = vec![vec![0.0; n_pts]; i_max + 1];
    let mut residual: f64 = 0.0;
    let mut covered = 0;
    for (k, (g, cov)) in bumps.iter().enumerate() {
        multipliers[0][k] = g[1];
        let mut sum = g[1];
        for i in 1..=i_max {
            let m = g[i + 1] - g[i];
            multipliers[i][k] = m;
            sum += m;
        }
        if *cov {
            covered += 1;
            residual = residual.max((1.0 - sum).abs());
        }
    }
    pair.multipliers = multipliers;
    pair.residual = residual;
    pair.covered = covered;
    Ok(pair)
}

/// `f ∗ φ_i`, as the inverse transform of `f̂ · m_i`.
pub fn scale_component(f: &GridFunction, pair: &AnalyzingPair, i: usize) -> Result<GridFunction> {
    if f.grid() != pair.grid() {
        return Err(Error::GridMismatch);
    }
    if i > pair.i_max {
        return Err(Error::InvalidParameter(format!("scale {i} beyond pair depth {}", pair.i_max)));
    }
    Ok(f.apply_multiplier(pair.multiplier(i)))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TlParams {
    pub alpha: f64,
    pub p: f64,
    /// `f64::INFINITY` selects the supremum over scales.
    pub q: f64,
    pub i_max: usize,
}

impl TlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0) || !(self.q > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("need p > 0, q > 0; got p={}, q={}", self.p, self.q)));
        }
        Ok(())
    }
}

/// Pointwise `ℓ^q` aggregate of `|det A|^{αi}|f ∗ φ_i|` over `i ≤ i_max`.
pub fn tl_aggregate(f: &GridFunction, pair: &AnalyzingPair, params: &TlParams) -> Result<Vec<f64>> {
    params.validate()?;
    if params.i_max > pair.i_max {
        return Err(Error::InvalidParameter(format!("i_max {} beyond pair depth {}", params.i_max, pair.i_max)));
    }
    if f.grid() != pair.grid() {
        return Err(Error::GridMismatch);
    }
    let det = pair.matrix().det_abs();
    let comps: Vec<Vec<f64>> = (0..=params.i_max)
        .into_par_iter()
        .map(|i| {
            let w = det.powf(params.alpha * i as f64);
            f.apply_multiplier(pair.multiplier(i)).values().iter().map(|v| w * v.norm()).collect()
        })
        .collect();
    let n = f.grid().len();
    let q = params.q;
    Ok((0..n)
        .into_par_iter()
        .map(|k| {
            if q.is_infinite() {
                comps.iter().map(|c| c[k]).fold(0.0, f64::max)
            } else {
                comps.iter().map(|c| c[k].powf(q)).sum::<f64>().powf(1.0 / q)
            }
        })
        .collect())
}

/// Triebel–Lizorkin quasi-norm `‖(Σ_i (|det A|^{αi}|f ∗ φ_i|)^q)^{1/q}‖_{L^p}`.
pub fn tl_norm(f: &GridFunction, pair: &AnalyzingPair, params: &TlParams) -> Result<f64> {
    let agg = tl_aggregate(f, pair, params)?;
    Ok(lp_norm_of(&agg, f.grid().cell_volume(), params.p))
}

/// `max(0, ‖f₁+f₂‖^r - ‖f₁‖^r - ‖f₂‖^r)` with `r = min(1, p, q)`.
pub fn r_norm_defect(f1: &GridFunction, f2: &GridFunction, pair: &AnalyzingPair, params: &TlParams) -> Result<f64> {
    f1.check_grid(f2)?;
    let r = 1f64.min(params.p).min(params.q);
    let n1 = tl_norm(f1, pair, params)?;
    let n2 = tl_norm(f2, pair, params)?;
    let n12 = tl_norm(&f1.add(f2)?, pair, params)?;
    Ok((n12.powf(r) - n1.powf(r) - n2.powf(r)).max(0.0))
}

/// `χ̂(ξ) = exp(1 - 1/(1-|ξ|²))` on the unit ball; nonnegative with `χ̂(0) = 1`.
pub fn chi_hat(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

/// `M_{ξ₀}χ_δ`, built from its transform `χ̂((ξ-ξ₀)/δ)`.
pub fn modulated_bump(xi0: &[f64], delta: f64, grid: &Grid) -> Result<GridFunction> {
    if xi0.len() != grid.d {
        return Err(Error::DimensionMismatch { expected: grid.d, got: xi0.len() });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    if !grid.window_contains_ball(xi0, delta) {
        return Err(Error::FrequencyOverflow { center: xi0.to_vec(), radius: delta });
    }
    let inv_cell = 1.0 / grid.cell_volume();
    let spectrum = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let xi = grid.freq(k);
            let r2: f64 = xi.iter().zip(xi0).map(|(a, b)| ((a - b) / delta).powi(2)).sum();
            let idx = grid.unflatten(k);
            let odd = idx.iter().map(|&i| grid.signed_index(i)).sum::<i64>().rem_euclid(2) == 1;
            let sign = if odd { -1.0 } else { 1.0 };
            Complex64::new(sign * chi_hat(r2) * inv_cell, 0.0)
        })
        .collect();
    GridFunction::from_spectrum(grid, spectrum)
}
