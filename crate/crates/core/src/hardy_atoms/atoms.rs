//! Atom specifications and grid-level checks of the support, size and moment conditions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::maximal::Locality;
use super::special::{monomial, multi_indices, SpecialFunction};
use super::blowup::{sample, Placement};
use crate::error::{Error, Result};
use crate::littlewood_paley::{lp_norm, Grid, GridFunction};
use crate::matrix::{build_ellipsoid, robust_floor, unit_ball_volume, ExpansiveMatrix};

/// Default relative tolerance for grid moments (midpoint rule on a discontinuous function).
pub const MOMENT_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomVariant {
    /// Support in `x₀ + A^jΩ`, sup bound `|det A|^{-j/p}`.
    Standard,
    /// Support in `x₀ + A^j B(0,1)`, sup bound `m(A^j B(0,1))^{-1/p}`.
    Alternative,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomSpec {
    pub p: f64,
    pub s: usize,
    pub center: Vec<f64>,
    pub scale: i64,
    pub variant: AtomVariant,
    pub locality: Locality,
}

impl AtomSpec {
    /// Smallest admissible moment order `⌊(1/p - 1)/ζ₋(A)⌋`.
    pub fn min_order(p: f64, a: &ExpansiveMatrix) -> usize {
        robust_floor((1.0 / p - 1.0) / a.zeta_minus()).max(0) as usize
    }

    pub fn linf_bound(&self, a: &ExpansiveMatrix) -> f64 {
        let det_j = a.det_abs().powf(self.scale as f64);
        match self.variant {
            AtomVariant::Standard => det_j.powf(-1.0 / self.p),
            AtomVariant::Alternative => (det_j * unit_ball_volume(a.dim())).powf(-1.0 / self.p),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomReport {
    pub support_ok: bool,
    /// `1 - max gauge` over the support; negative when it leaks.
    pub support_slack: f64,
    pub linf_ok: bool,
    /// `1 - ‖a‖_∞ / bound`.
    pub linf_slack: f64,
    pub moments_required: bool,
    pub moments_ok: bool,
    /// Largest `|∫ a x^σ|`, relative to `‖a‖₁ · max|x - x₀|^{|σ|}`.
    pub moment_defect: f64,
    pub order_ok: bool,
    pub passes: bool,
}

pub fn validate_atom(a: &GridFunction, spec: &AtomSpec, e: &ExpansiveMatrix) -> Result<AtomReport> {
    validate_atom_with(a, spec, e, MOMENT_TOL)
}

pub fn validate_atom_with(a: &GridFunction, spec: &AtomSpec, e: &ExpansiveMatrix, moment_tol: f64) -> Result<AtomReport> {
    let grid = a.grid();
    let d = grid.d;
    if e.dim() != d || spec.center.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: spec.center.len() });
    }
    let ell = build_ellipsoid(e)?;
    let inv = e.pow(-spec.scale);
    let gauge = |x: &[f64]| -> f64 {
        let y = &inv * DVector::from_iterator(d, x.iter().zip(&spec.center).map(|(a, b)| a - b));
        match spec.variant {
            AtomVariant::Standard => ell.gauge(&y),
            AtomVariant::Alternative => y.norm(),
        }
    };
    let mut max_gauge: f64 = 0.0;
    let mut radius: f64 = 0.0;
    for (k, v) in a.values().iter().enumerate() {
        if v.norm() > 0.0 {
            let x = grid.coord(k);
            max_gauge = max_gauge.max(gauge(&x));
            let r = x.iter().zip(&spec.center).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            radius = radius.max(r);
        }
    }
    let support_slack = 1.0 - max_gauge;
    let bound = spec.linf_bound(e);
    let linf_slack = 1.0 - lp_norm(a, f64::INFINITY) / bound;
    let moments_required = match spec.locality {
        Locality::Local => spec.scale < 0,
        Locality::Nonlocal => true,
    };
    let l1 = lp_norm(a, 1.0);
    let cell = grid.cell_volume();
    let mut moment_defect: f64 = 0.0;
    if l1 > 0.0 {
        for sigma in multi_indices(d, spec.s) {
            let m: f64 = a
                .values()
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let x: Vec<f64> = grid.coord(k).iter().zip(&spec.center).map(|(a, b)| a - b).collect();
                    v.re * monomial(&x, &sigma) * cell
                })
                .sum();
            let order: usize = sigma.iter().sum();
            moment_defect = moment_defect.max(m.abs() / (l1 * radius.max(f64::MIN_POSITIVE).powi(order as i32)));
        }
    }
    let support_ok = support_slack > 0.0;
    let linf_ok = linf_slack >= -1e-12;
    let moments_ok = !moments_required || moment_defect <= moment_tol;
    let order_ok = spec.s >= AtomSpec::min_order(spec.p, e);
    Ok(AtomReport {
        support_ok,
        support_slack,
        linf_ok,
        linf_slack,
        moments_required,
        moments_ok,
        moment_defect,
        order_ok,
        passes: support_ok && linf_ok && moments_ok && order_ok,
    })
}

/// The special function scaled to the sup bound and placed in `x₀ + A^jΩ`
/// (or `x₀ + A^j B(0,1)`), sampled pointwise so the support stays exact.
pub fn special_atom(f0: &SpecialFunction, spec: &AtomSpec, e: &ExpansiveMatrix, grid: &Grid) -> Result<GridFunction> {
    let d = f0.d;
    // f₀ lives in B(0,1); shrink it into the largest ball inside Ω
    let inner = match spec.variant {
        AtomVariant::Standard => {
            let ell = build_ellipsoid(e)?;
            let top = ell.shape().clone().symmetric_eigenvalues().max();
            ell.scale() / top.sqrt()
        }
        AtomVariant::Alternative => 1.0,
    };
    // stay strictly inside after sampling
    let t = e.pow(spec.scale) * (0.999 * inner) * DMatrix::<f64>::identity(d, d);
    let placement = Placement { transform: t, x0: spec.center.clone(), amplitude: spec.linf_bound(e) * f0.unit_scale() };
    sample(f0, &placement, grid)
}
