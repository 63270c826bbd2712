//! Placing a special function on a grid under a linear change of variables.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::special::{SpecialFunction, CAP_CENTER, CAP_RADIUS, INNER_RADIUS};
use crate::error::{Error, Result};
use crate::littlewood_paley::{Grid, GridFunction};
use crate::matrix::{spectral_norm, ExpansiveMatrix};

/// Upper bound on quadrature nodes used when depositing.
const MAX_NODES: usize = 1 << 22;
/// Node slices deposited in parallel.
const DEPOSIT_SLICES: usize = 16;
/// Finest node spacing needed to resolve the special function itself.
const SELF_SPACING: f64 = 1.0 / 128.0;

/// `x ↦ amplitude · f₀(T⁻¹(x - x₀))`.
#[derive(Clone, Debug)]
pub struct Placement {
    pub transform: DMatrix<f64>,
    pub x0: Vec<f64>,
    pub amplitude: f64,
}

/// Cell averages of the placed function: the mass of each quadrature cell of `f₀`'s
/// support is mapped forward and split between neighbouring grid points
/// (cloud in cell), so supports thinner than a cell keep their mass.
pub fn deposit(f0: &SpecialFunction, placement: &Placement, grid: &Grid) -> Result<GridFunction> {
    let d = f0.d;
    if grid.d != d || placement.x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: grid.d });
    }
    let t = &placement.transform;
    let h = grid.spacing();
    // f₀-space box [-½, 1] × [-½, ½]^{d-1}
    let lo: Vec<f64> = vec![-INNER_RADIUS; d];
    let mut hi = vec![INNER_RADIUS; d];
    hi[0] = CAP_CENTER + CAP_RADIUS;
    let mut spacing: Vec<f64> =
        (0..d).map(|k| (h / (4.0 * t.column(k).norm())).min(SELF_SPACING)).collect();
    let count = |sp: &[f64]| -> Vec<usize> { (0..d).map(|k| ((hi[k] - lo[k]) / sp[k]).ceil() as usize).collect() };
    let mut counts = count(&spacing);
    while counts.iter().product::<usize>() > MAX_NODES {
        spacing.iter_mut().for_each(|s| *s *= 1.25);
        counts = count(&spacing);
    }
    let steps: Vec<f64> = (0..d).map(|k| (hi[k] - lo[k]) / counts[k] as f64).collect();
    let node_mass = placement.amplitude * t.determinant().abs() * steps.iter().product::<f64>();
    let total: usize = counts.iter().product();
    let n = grid.n;
    let len = grid.len();
    // a fixed number of node slices, each deposited sequentially and then added in
    // order, keeps the result independent of the thread count
    let slice = total.div_ceil(DEPOSIT_SLICES);
    let partial: Vec<Vec<f64>> = (0..DEPOSIT_SLICES)
        .into_par_iter()
        .map(|s| {
            let mut acc = vec![0.0f64; len];
            for flat in s * slice..((s + 1) * slice).min(total) {
                let mut rem = flat;
                let mut y = vec![0.0; d];
                for k in (0..d).rev() {
                    y[k] = lo[k] + (rem % counts[k]) as f64 * steps[k] + 0.5 * steps[k];
                    rem /= counts[k];
                }
                let v = f0.eval(&y);
                if v == 0.0 {
                    continue;
                }
                let x = t * DVector::from_column_slice(&y);
                let u: Vec<f64> = (0..d).map(|k| (x[k] + placement.x0[k] + grid.extent) / h).collect();
                let base: Vec<i64> = u.iter().map(|v| v.floor() as i64).collect();
                let frac: Vec<f64> = u.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
                for corner in 0..(1usize << d) {
                    let mut w = v * node_mass;
                    let mut idx = 0usize;
                    for k in 0..d {
                        let up = (corner >> k) & 1 == 1;
                        w *= if up { frac[k] } else { 1.0 - frac[k] };
                        let i = (base[k] + up as i64).rem_euclid(n as i64) as usize;
                        idx = idx * n + i;
                    }
                    acc[idx] += w;
                }
            }
            acc
        })
        .collect();
    let mut mass = vec![0.0f64; len];
    for acc in partial {
        mass.iter_mut().zip(acc).for_each(|(m, a)| *m += a);
    }
    let cell = grid.cell_volume();
    GridFunction::new(grid.clone(), mass.into_iter().map(|m| Complex64::new(m / cell, 0.0)).collect())
}

/// Point samples of the placed function at grid points.
pub fn sample(f0: &SpecialFunction, placement: &Placement, grid: &Grid) -> Result<GridFunction> {
    let inv = placement
        .transform
        .clone()
        .try_inverse()
        .ok_or(Error::InvalidParameter("placement transform is singular".into()))?;
    Ok(GridFunction::from_real_fn(grid, |x| {
        let shifted = DVector::from_iterator(x.len(), x.iter().zip(&placement.x0).map(|(a, b)| a - b));
        placement.amplitude * f0.eval((&inv * shifted).as_slice())
    }))
}

/// Parameters of a function supported in `x₀ + B^{j₁}A^{j₂}U·B(0,1)`.
#[derive(Clone, Debug)]
pub struct BlowupSpec {
    pub j1: i64,
    pub j2: i64,
    /// Orthogonal factor `U`; identity when absent.
    pub rotation: Option<DMatrix<f64>>,
    pub x0: Vec<f64>,
    pub p: f64,
    /// Defaults to `1/sup|f₀|`, which makes the sup bound an equality.
    pub delta0: Option<f64>,
    /// Extra room added to the box beyond the support.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowupMetadata {
    pub x0: Vec<f64>,
    pub j1: i64,
    pub j2: i64,
    /// `|det B|^{-j₁/p}|det A|^{-j₂/p}`.
    pub linf_bound: f64,
    /// Value taken on the image of `B(¾e₁, ¼)`.
    pub delta: f64,
    pub extent: f64,
    pub transform: Vec<Vec<f64>>,
}

/// `δ₀|det T|^{-1/p} f₀(T⁻¹(x - x₀))` with `T = B^{j₁}A^{j₂}U`, on a box sized to its support.
pub fn make_blowup_function(
    f0: &SpecialFunction,
    spec: &BlowupSpec,
    a: &ExpansiveMatrix,
    b: &ExpansiveMatrix,
    n: usize,
) -> Result<(GridFunction, BlowupMetadata)> {
    let d = f0.d;
    if a.dim() != d || b.dim() != d || spec.x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.dim() });
    }
    if spec.j1 < 0 {
        return Err(Error::InvalidParameter("j1 must be nonnegative".into()));
    }
    if !(spec.p > 0.0 && spec.p <= 1.0) {
        return Err(Error::InvalidParameter("p must lie in (0, 1]".into()));
    }
    let u = spec.rotation.clone().unwrap_or_else(|| DMatrix::identity(d, d));
    let t = b.pow(spec.j1) * a.pow(spec.j2) * u;
    let delta0 = spec.delta0.unwrap_or(f0.unit_scale());
    let det_t = t.determinant().abs();
    let amplitude = delta0 * det_t.powf(-1.0 / spec.p);
    let reach = (0..d).map(|k| t.row(k).norm()).fold(0.0, f64::max);
    let offset = spec.x0.iter().map(|v| v.abs()).fold(0.0, f64::max);
    // two spare cells so deposits at the support edge do not wrap
    let extent = (offset + reach + spec.margin) / (1.0 - 4.0 / n as f64);
    let grid = Grid::new(d, n, extent)?;
    let long = 2.0 * spectral_norm(&t);
    let needed = grid.n as f64 / 8.0 * grid.spacing();
    if long < needed {
        return Err(Error::ResolutionExceeded {
            j: spec.j2,
            reason: format!("support length {long:.3e} spans fewer than n/8 cells"),
        });
    }
    let placement = Placement { transform: t.clone(), x0: spec.x0.clone(), amplitude };
    let f = deposit(f0, &placement, &grid)?;
    let meta = BlowupMetadata {
        x0: spec.x0.clone(),
        j1: spec.j1,
        j2: spec.j2,
        linf_bound: b.det_abs().powf(-(spec.j1 as f64) / spec.p) * a.det_abs().powf(-(spec.j2 as f64) / spec.p),
        delta: amplitude,
        extent,
        transform: (0..d).map(|i| (0..d).map(|j| t[(i, j)]).collect()).collect(),
    };
    Ok((f, meta))
}
