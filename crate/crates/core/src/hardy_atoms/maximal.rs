//! Radial maximal functions `sup_j |det E|^j |f ∗ (φ∘E^j)|` and the `h^p` / `H^p` estimators.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::littlewood_paley::{fft_nd, lp_norm, Grid, GridFunction};
use crate::littlewood_paley::smoothstep_down;
use crate::matrix::{spectral_norm, ExpansiveMatrix};

/// Cells required across the thinnest direction of a kernel's support.
pub const CELLS_PER_WIDTH: f64 = 4.0;

/// Nonnegative bump, 1 on `B(0, r_in)` and 0 outside `B(0, r_out)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RadialBump {
    pub r_in: f64,
    pub r_out: f64,
}

impl RadialBump {
    /// Radii `1/(8‖A‖)` and `3/(16‖A‖)`.
    pub fn for_matrix(a: &ExpansiveMatrix) -> Self {
        RadialBump { r_in: 1.0 / (8.0 * a.norm()), r_out: 3.0 / (16.0 * a.norm()) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        smoothstep_down((r - self.r_in) / (self.r_out - self.r_in))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Locality {
    Local,
    Nonlocal,
}

/// Checks that `φ∘E^j` is resolved on `grid` and its support fits in the box.
pub fn check_resolvable(grid: &Grid, phi: &RadialBump, e: &ExpansiveMatrix, j: i64) -> Result<()> {
    let h = grid.spacing();
    let thin = 2.0 * phi.r_out / spectral_norm(&e.pow(j));
    if thin < CELLS_PER_WIDTH * h {
        return Err(Error::ResolutionExceeded {
            j,
            reason: format!("support width {thin:.3e} is under {CELLS_PER_WIDTH} cells of {h:.3e}"),
        });
    }
    let inv = e.pow(-j);
    let reach = (0..grid.d).map(|k| phi.r_out * inv.row(k).norm()).fold(0.0, f64::max);
    if reach >= grid.extent {
        return Err(Error::ResolutionExceeded { j, reason: format!("support reach {reach:.3e} exceeds the box") });
    }
    Ok(())
}

/// Largest `j ≥ 0` passing [`check_resolvable`], or `-1` if even `j = 0` fails.
pub fn max_resolvable_scale(grid: &Grid, phi: &RadialBump, e: &ExpansiveMatrix) -> i64 {
    let mut j = 0;
    while j < 200 && check_resolvable(grid, phi, e, j).is_ok() {
        j += 1;
    }
    j - 1
}

/// Transform of the sampled kernel `|det E|^j φ(E^j x)·h^d`, demodulated by the grid carrier.
fn kernel_spectrum(grid: &Grid, phi: &RadialBump, e: &ExpansiveMatrix, j: i64) -> Vec<Complex64> {
    let ej = e.pow(j);
    let weight = e.det_abs().powi(j as i32) * grid.cell_volume();
    let h = grid.spacing();
    let carrier = grid.carrier();
    let mut k: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let o: Vec<f64> = grid.unflatten(flat).iter().map(|&i| grid.signed_index(i) as f64 * h).collect();
            let y = &ej * DVector::from_column_slice(&o);
            let v = phi.eval(y.as_slice());
            if v == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let phase: f64 = o.iter().zip(&carrier).map(|(a, c)| a * c).sum();
            Complex64::from_polar(weight * v, -2.0 * std::f64::consts::PI * phase)
        })
        .collect();
    fft_nd(&mut k, grid.d, grid.n, false);
    k
}

/// `|f ∗ (|det E|^j φ∘E^j)|` on the grid.
pub fn dilated_average(f: &GridFunction, phi: &RadialBump, e: &ExpansiveMatrix, j: i64) -> Result<Vec<f64>> {
    check_resolvable(f.grid(), phi, e, j)?;
    let k = kernel_spectrum(f.grid(), phi, e, j);
    let prod: Vec<Complex64> = f.spectrum().iter().zip(&k).map(|(a, b)| a * b).collect();
    let conv = GridFunction::from_spectrum(f.grid(), prod)?;
    Ok(conv.values().iter().map(|v| v.norm()).collect())
}

/// Pointwise max over `j ∈ 0..=j_max` (local) or `-j_max..=j_max` (nonlocal).
pub fn local_radial_maximal(
    f: &GridFunction,
    phi: &RadialBump,
    e: &ExpansiveMatrix,
    j_max: usize,
    locality: Locality,
) -> Result<GridFunction> {
    if e.dim() != f.grid().d {
        return Err(Error::DimensionMismatch { expected: f.grid().d, got: e.dim() });
    }
    let j_lo = match locality {
        Locality::Local => 0,
        Locality::Nonlocal => -(j_max as i64),
    };
    let scales: Vec<Vec<f64>> =
        (j_lo..=j_max as i64).into_par_iter().map(|j| dilated_average(f, phi, e, j)).collect::<Result<_>>()?;
    let out = (0..f.grid().len())
        .map(|k| Complex64::new(scales.iter().map(|s| s[k]).fold(0.0, f64::max), 0.0))
        .collect();
    GridFunction::new(f.grid().clone(), out)
}

/// `‖M f‖_{L^p}` for the radial maximal function truncated at `j_max`.
pub fn hp_norm(
    f: &GridFunction,
    phi: &RadialBump,
    e: &ExpansiveMatrix,
    p: f64,
    j_max: usize,
    locality: Locality,
) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter("p must be positive".into()));
    }
    Ok(lp_norm(&local_radial_maximal(f, phi, e, j_max, locality)?, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn smooth(grid: &Grid) -> GridFunction {
        GridFunction::from_real_fn(grid, |x| (-(x.iter().map(|v| v * v).sum::<f64>()) * 4.0).exp())
    }

    #[test]
    fn kernel_mass() {
        // the j = 0 average of 1 is ∫φ
        let g = Grid::new(2, 128, 1.0).unwrap();
        let a = ExpansiveMatrix::diagonal(&[2.0, 3.0]).unwrap();
        let phi = RadialBump::for_matrix(&a);
        let one = GridFunction::from_real_fn(&g, |_| 1.0);
        let avg = dilated_average(&one, &phi, &a, 0).unwrap();
        let mut mass = 0.0;
        let m = 2000;
        for k in 0..m {
            let r = (k as f64 + 0.5) / m as f64 * phi.r_out;
            mass += phi.eval(&[r, 0.0]) * 2.0 * std::f64::consts::PI * r * phi.r_out / m as f64;
        }
        assert_relative_eq!(avg[0], mass, max_relative = 2e-2);
    }

    #[test]
    fn monotone_and_nonlocal_dominates() {
        let g = Grid::new(1, 1024, 4.0).unwrap();
        let a = ExpansiveMatrix::scalar(1, 2.0).unwrap();
        let phi = RadialBump::for_matrix(&a);
        let f = smooth(&g);
        let jm = max_resolvable_scale(&g, &phi, &a);
        assert!(jm >= 2);
        let m1 = local_radial_maximal(&f, &phi, &a, 1, Locality::Local).unwrap();
        let m2 = local_radial_maximal(&f, &phi, &a, 2, Locality::Local).unwrap();
        let nl = local_radial_maximal(&f, &phi, &a, 2, Locality::Nonlocal).unwrap();
        for k in 0..g.len() {
            assert!(m2.values()[k].re >= m1.values()[k].re);
            assert!(nl.values()[k].re >= m2.values()[k].re);
        }
        let n1 = hp_norm(&f, &phi, &a, 0.5, 2, Locality::Local).unwrap();
        let n3 = hp_norm(&f.scaled(Complex64::new(-3.0, 0.0)), &phi, &a, 0.5, 2, Locality::Local).unwrap();
        // p < 1 lifts FFT round-off in the far field, hence 1e-8
        assert_relative_eq!(n3, 3.0 * n1, max_relative = 1e-8);
    }

    #[test]
    fn unresolvable_scale_rejected() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        let a = ExpansiveMatrix::scalar(1, 2.0).unwrap();
        let phi = RadialBump::for_matrix(&a);
        let f = smooth(&g);
        assert_eq!(max_resolvable_scale(&g, &phi, &a), -1);
        assert!(matches!(
            local_radial_maximal(&f, &phi, &a, 0, Locality::Local),
            Err(Error::ResolutionExceeded { j: 0, .. })
        ));
    }

    #[test]
    fn carrier_does_not_change_modulus() {
        let a = ExpansiveMatrix::scalar(1, 2.0).unwrap();
        let phi = RadialBump::for_matrix(&a);
        let g0 = Grid::new(1, 512, 2.0).unwrap();
        let g1 = g0.clone().with_carrier(&[5.0]).unwrap();
        // the same function written with and without the carrier
        let env = |x: &[f64]| (-8.0 * x[0] * x[0]).exp();
        let plain = GridFunction::from_fn(&g0, |x| Complex64::from_polar(env(x), 2.0 * std::f64::consts::PI * 5.0 * x[0]));
        let carried = GridFunction::from_real_fn(&g1, env);
        let a0 = dilated_average(&plain, &phi, &a, 1).unwrap();
        let a1 = dilated_average(&carried, &phi, &a, 1).unwrap();
        for (x, y) in a0.iter().zip(&a1) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
