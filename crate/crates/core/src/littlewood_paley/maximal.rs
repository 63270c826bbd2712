//! Grid versions of the anisotropic Hardy–Littlewood and Peetre-type maximal operators.
//!
//! Both are suprema over what the periodic grid can represent, so they bound the
//! continuous operators from below.

use std::collections::VecDeque;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::{Grid, GridFunction};
use super::pair::{scale_component, AnalyzingPair};
use crate::error::{Error, Result};
use crate::quasinorm::StepQuasiNorm;

/// Work budget (center-offset pairs) for the generic maximal pass.
const HL_BUDGET: usize = 1 << 27;

/// Integer offsets `o` with `o·h ∈ A^kΩ`, or `None` when `A^kΩ` does not fit in the box.
pub fn ball_offsets(grid: &Grid, q: &StepQuasiNorm, k: i64) -> Option<Vec<Vec<i64>>> {
    let h = grid.spacing();
    let widths = q.ellipsoid().image_half_widths(&q.matrix().pow(k));
    if widths.iter().any(|&w| !(w < grid.extent)) {
        return None;
    }
    let reach: Vec<i64> = widths.iter().map(|w| (w / h).floor() as i64).collect();
    let inv = q.matrix().pow(-k);
    let mut out = Vec::new();
    let mut idx: Vec<i64> = reach.iter().map(|r| -r).collect();
    loop {
        let x = DVector::from_iterator(grid.d, idx.iter().map(|&o| o as f64 * h));
        if q.ellipsoid().contains(&(&inv * x)) {
            out.push(idx.clone());
        }
        let mut axis = grid.d;
        loop {
            if axis == 0 {
                return Some(out);
            }
            axis -= 1;
            if idx[axis] < reach[axis] {
                idx[axis] += 1;
                break;
            }
            idx[axis] = -reach[axis];
        }
    }
}

/// Exponents `k` whose balls `A^kΩ` fit the grid, from the first one holding
/// more than the centre cell to the largest.
pub fn admissible_exponents(grid: &Grid, q: &StepQuasiNorm) -> Vec<i64> {
    let h = grid.spacing();
    let mut k = 0i64;
    while k > -200 && q.ellipsoid().image_half_widths(&q.matrix().pow(k)).iter().any(|&w| w >= h) {
        k -= 1;
    }
    let mut out = Vec::new();
    let mut j = k;
    while ball_offsets(grid, q, j).is_some() {
        out.push(j);
        j += 1;
    }
    out
}

fn radius_exponent(q: &StepQuasiNorm, r: f64) -> Result<i64> {
    let det = q.matrix().det_abs();
    let k = (r.ln() / det.ln()).round();
    if !(r > 0.0) || (det.powf(k) - r).abs() > 1e-9 * r {
        return Err(Error::InvalidParameter(format!("radius {r} is not a power of |det A| = {det}")));
    }
    Ok(k as i64)
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Sup over the listed `ρ`-radii of ball averages of `|h|` over balls containing `x`.
///
/// Radii whose balls do not fit in the box are skipped.
pub fn hl_maximal(h: &GridFunction, q: &StepQuasiNorm, radii: &[f64]) -> Result<GridFunction> {
    hl_maximal_impl(h, q, radii, None)
}

/// As [`hl_maximal`] but always through the generic pass with the given centre stride.
pub fn hl_maximal_strided(h: &GridFunction, q: &StepQuasiNorm, radii: &[f64], stride: usize) -> Result<GridFunction> {
    hl_maximal_impl(h, q, radii, Some(stride))
}

fn hl_maximal_impl(h: &GridFunction, q: &StepQuasiNorm, radii: &[f64], stride: Option<usize>) -> Result<GridFunction> {
    let grid = h.grid();
    if q.dim() != grid.d {
        return Err(Error::DimensionMismatch { expected: grid.d, got: q.dim() });
    }
    if radii.is_empty() {
        return Err(Error::InvalidParameter("no radii given".into()));
    }
    let abs = h.abs();
    let mut out = vec![0.0; grid.len()];
    for &r in radii {
        let k = radius_exponent(q, r)?;
        let Some(offsets) = ball_offsets(grid, q, k) else { continue };
        let m = match (grid.d, stride) {
            (1, None) => interval_maximal(&abs, &offsets),
            (_, s) => generic_maximal(grid, &abs, &offsets, s),
        };
        for (o, v) in out.iter_mut().zip(m) {
            *o = f64::max(*o, v);
        }
    }
    GridFunction::new(grid.clone(), out.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
}

/// One dimension: the ball is the offset interval `[-m, m]`; prefix sums give the
/// averages and a monotone deque the sliding maximum.
fn interval_maximal(abs: &[f64], offsets: &[Vec<i64>]) -> Vec<f64> {
    let n = abs.len();
    let m = offsets.iter().map(|o| o[0]).max().unwrap_or(0) as usize;
    let w = 2 * m + 1;
    let mut prefix = vec![0.0; 3 * n + 1];
    for i in 0..3 * n {
        prefix[i + 1] = prefix[i] + abs[i % n];
    }
    // avg centred at y, indices y - m ..= y + m, shifted by n
    let avg: Vec<f64> = (0..n).map(|y| (prefix[y + n + m + 1] - prefix[y + n - m]) / w as f64).collect();
    let ext: Vec<f64> = (0..3 * n).map(|i| avg[i % n]).collect();
    let mut out = vec![0.0; n];
    let mut dq: VecDeque<usize> = VecDeque::new();
    for i in 0..n + m + n {
        while dq.back().is_some_and(|&b| ext[b] <= ext[i]) {
            dq.pop_back();
        }
        dq.push_back(i);
        while dq.front().is_some_and(|&f| f + w <= i) {
            dq.pop_front();
        }
        // window [i - 2m, i] is centred at x = i - m
        if i >= n + m && i < 2 * n + m {
            out[i - m - n] = ext[*dq.front().unwrap()];
        }
    }
    out
}

fn generic_maximal(grid: &Grid, abs: &[f64], offsets: &[Vec<i64>], stride: Option<usize>) -> Vec<f64> {
    let (n, d) = (grid.n, grid.d);
    let total = grid.len();
    let s = stride.unwrap_or_else(|| {
        let mut s = 1;
        while s < n && total.saturating_mul(offsets.len()) / s.pow(d as u32) > HL_BUDGET {
            s *= 2;
        }
        s
    });
    let cells_per_axis = n.div_ceil(s);
    let n_centres = cells_per_axis.pow(d as u32);
    let centre_index = |c: usize| -> Vec<usize> {
        let mut rem = c;
        let mut idx = vec![0; d];
        for k in (0..d).rev() {
            idx[k] = (rem % cells_per_axis) * s;
            rem /= cells_per_axis;
        }
        idx
    };
    let avg: Vec<f64> = (0..n_centres)
        .into_par_iter()
        .map(|c| {
            let y = centre_index(c);
            let sum: f64 = offsets
                .iter()
                .map(|o| {
                    let idx: Vec<usize> = y.iter().zip(o).map(|(&yi, &oi)| wrap(yi as i64 + oi, n)).collect();
                    abs[grid.flatten(&idx)]
                })
                .sum();
            sum / offsets.len() as f64
        })
        .collect();
    // Offsets grouped by residue mod s, so each x only visits centres on the lattice.
    let classes = s.pow(d as u32);
    let mut by_residue: Vec<Vec<&Vec<i64>>> = vec![Vec::new(); classes];
    for o in offsets {
        let r = o.iter().fold(0, |acc, &oi| acc * s + wrap(oi, s));
        by_residue[r].push(o);
    }
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let x = grid.unflatten(flat);
            let r = x.iter().fold(0, |acc, &xi| acc * s + xi % s);
            by_residue[r]
                .iter()
                .map(|o| {
                    let c = x.iter().zip(o.iter()).fold(0, |acc, (&xi, &oi)| {
                        acc * cells_per_axis + wrap(xi as i64 - oi, n) / s
                    });
                    avg[c]
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// `max_{i ∈ I_j} sup_z |(f ∗ ψ_j)(x+z)| / (1 + ρ_A(A^i z))^η` with `z` over periodic grid offsets.
pub fn peetre_maximal(
    f: &GridFunction,
    pair_b: &AnalyzingPair,
    j: usize,
    qa: &StepQuasiNorm,
    i_set: &[usize],
    eta: f64,
) -> Result<GridFunction> {
    let i_min = *i_set.iter().min().ok_or(Error::EmptyIndexSet { j })?;
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("eta must be positive".into()));
    }
    let g = scale_component(f, pair_b, j)?;
    let abs = g.abs();
    let grid = f.grid();
    peetre_from_abs(grid, &abs, qa, i_min, eta)
}

/// The Peetre sup for a precomputed `|f ∗ ψ_j|`; `ρ_A(A^i z) = |det A|^i ρ_A(z)`
/// makes the smallest `i` in the index set the binding one.
pub fn peetre_from_abs(grid: &Grid, abs: &[f64], qa: &StepQuasiNorm, i_min: usize, eta: f64) -> Result<GridFunction> {
    let (n, d) = (grid.n, grid.d);
    let h = grid.spacing();
    let half = (n / 2) as i64;
    let scale = qa.matrix().det_abs().powi(i_min as i32);
    let mut shells: Vec<(f64, Vec<i64>)> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let o: Vec<i64> = grid.unflatten(flat).iter().map(|&i| i as i64 - half).collect();
            let z = DVector::from_iterator(d, o.iter().map(|&v| v as f64 * h));
            qa.rho(&z).map(|r| ((1.0 + scale * r).powf(-eta), o))
        })
        .collect::<Result<_>>()?;
    shells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let gmax = abs.iter().copied().fold(0.0, f64::max);
    let out: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let x = grid.unflatten(flat);
            let mut best = 0.0f64;
            for (w, o) in &shells {
                if gmax * w <= best {
                    break;
                }
                let idx: Vec<usize> = x.iter().zip(o).map(|(&xi, &oi)| wrap(xi as i64 + oi, n)).collect();
                best = best.max(abs[grid.flatten(&idx)] * w);
            }
            Complex64::new(best, 0.0)
        })
        .collect();
    GridFunction::new(grid.clone(), out)
}
