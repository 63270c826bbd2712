//! `‖f‖_{F^α_{p,q}(A)}` against `|det A|^{αi₀}‖f‖_{L^p}` for bumps with spectrum in a
//! single scale, and against `‖(|det A|^{αi_k}c_k)_k‖_{ℓ^q}` for separated scales.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Provenance, Report, Table};
use crate::error::{Error, Result};
use crate::littlewood_paley::{
    build_analyzing_pair, lp_norm, modulated_bump, pair_scales, tl_norm, Grid, GridFunction, TlParams,
};
use crate::matrix::{build_ellipsoid, spectral_norm, ExpansiveMatrix};

/// Gauge margin kept between a ball and the edge of its band.
const BAND_SAFETY: f64 = 0.9;
/// Largest grid accepted by the multi-scale variant.
const MAX_POINTS: usize = 1 << 22;

/// Where the spectrum sits relative to the multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    /// Inside the region where `m_{i₀} = 1`.
    Plateau,
    /// Across the overlap of `m_{i₀}` and `m_{i₀+1}`.
    Transition,
}

/// `(y, δ')`: `B(y, δ')` lies in the chosen band of `(A*)^{-i₀-1}`-rescaled frequencies.
pub fn band_ball(e_star: &ExpansiveMatrix, band: Band) -> Result<(DVector<f64>, f64)> {
    let ell = build_ellipsoid(e_star)?;
    let (eps, r_prime) = pair_scales(e_star, &ell)?;
    let r = ell.r();
    // gauge window of v_{i₀+1} = (A*)^{-i₀-1}ξ
    let (lo, hi) = match band {
        Band::Plateau => (r_prime * eps / r, eps),
        Band::Transition => (eps, r_prime * eps),
    };
    let lipschitz = spectral_norm(ell.factor()) / ell.scale();
    let mut e1 = DVector::zeros(e_star.dim());
    e1[0] = 1.0;
    let y = &e1 * (0.5 * (lo + hi) / ell.gauge(&e1));
    Ok((y, BAND_SAFETY * 0.5 * (hi - lo) / lipschitz))
}

/// `ξ₀ = (A*)^{i₀+1}y` and `δ = δ'σ_min((A*)^{i₀+1})`, so `B(ξ₀, δ) ⊆ (A*)^{i₀+1}B(y, δ')`.
pub fn scaled_ball(e_star: &ExpansiveMatrix, band: Band, i0: usize) -> Result<(Vec<f64>, f64)> {
    let (y, dprime) = band_ball(e_star, band)?;
    let t = e_star.pow(i0 as i64 + 1);
    let smin = t.clone().svd(false, false).singular_values.min();
    Ok(((&t * y).as_slice().to_vec(), dprime * smin))
}

#[derive(Clone, Debug)]
pub struct ScalingConfig {
    pub a: ExpansiveMatrix,
    pub alpha: f64,
    pub p: f64,
    /// `f64::INFINITY` for the supremum.
    pub q: f64,
    pub i0s: Vec<usize>,
    pub n: usize,
    /// Box half-width in units of `1/δ`.
    pub extent_factor: f64,
    pub band: Band,
    /// Scales beyond `i₀` kept in the pair.
    pub depth: usize,
}

impl ScalingConfig {
    pub fn new(a: ExpansiveMatrix, alpha: f64, p: f64, q: f64, i0s: Vec<usize>) -> Self {
        let n = match a.dim() {
            1 => 4096,
            2 => 256,
            _ => 32,
        };
        ScalingConfig { a, alpha, p, q, i0s, n, extent_factor: 16.0, band: Band::Transition, depth: 4 }
    }
}

/// `(δ, tl_norm, lp_norm)` for one scale, on a grid carried at `ξ₀`.
fn single_scale(cfg: &ScalingConfig, i0: usize) -> Result<(f64, f64, f64)> {
    let e_star = cfg.a.adjoint();
    let (xi0, delta) = scaled_ball(&e_star, cfg.band, i0)?;
    let grid = Grid::new(cfg.a.dim(), cfg.n, cfg.extent_factor / delta)?.with_carrier(&xi0)?;
    let i_max = i0 + cfg.depth;
    let pair = build_analyzing_pair(&e_star, &grid, i_max)?;
    let f = modulated_bump(&xi0, delta, &grid)?;
    let params = TlParams { alpha: cfg.alpha, p: cfg.p, q: cfg.q, i_max };
    Ok((delta, tl_norm(&f, &pair, &params)?, lp_norm(&f, cfg.p)))
}

pub fn experiment_norm_scaling(cfg: &ScalingConfig, seed: u64) -> Result<Report> {
    if cfg.i0s.is_empty() {
        return Err(Error::InvalidParameter("no scales given".into()));
    }
    let rows: Vec<(f64, f64, f64)> = cfg.i0s.par_iter().map(|&i0| single_scale(cfg, i0)).collect::<Result<_>>()?;
    let config = serde_json::json!({
        "a": cfg.a.to_json(), "alpha": cfg.alpha, "p": cfg.p,
        "q": if cfg.q.is_infinite() { serde_json::Value::from("inf") } else { cfg.q.into() },
        "i0s": cfg.i0s, "n": cfg.n, "extent_factor": cfg.extent_factor, "band": cfg.band, "depth": cfg.depth,
    });
    let mut report = Report::new("scaling", seed, config);
    let det = cfg.a.det_abs();
    let mut table = Table::new(&[
        ("i0", Provenance::Config),
        ("delta", Provenance::Config),
        ("tl_norm", Provenance::Measured),
        ("lp_norm", Provenance::Measured),
        ("weight", Provenance::Predicted),
        ("ratio", Provenance::Measured),
    ]);
    for (&i0, (delta, tl, lp)) in cfg.i0s.iter().zip(rows) {
        let weight = det.powf(cfg.alpha * i0 as f64);
        table.push(vec![i0 as f64, delta, tl, lp, weight, tl / (weight * lp)]);
    }
    let ratios = table.column("ratio").unwrap();
    let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
    let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
    report.figure("spread", hi / lo, Provenance::Measured);
    report.tables.push(("scaling".into(), table));
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct MultiScaleConfig {
    pub a: ExpansiveMatrix,
    pub alpha: f64,
    pub p: f64,
    pub c: Vec<f64>,
    pub first: usize,
    /// Index gap between bumps; neighbouring multipliers overlap only for `|i - i'| ≤ 1`,
    /// so any gap above 2 separates them.
    pub gap: usize,
    pub extent_factor: f64,
    pub band: Band,
}

impl MultiScaleConfig {
    pub fn new(a: ExpansiveMatrix, alpha: f64, p: f64, c: Vec<f64>) -> Self {
        MultiScaleConfig { a, alpha, p, c, first: 1, gap: 3, extent_factor: 8.0, band: Band::Plateau }
    }
}

/// `Σ c_k M_{ξ_k}χ_δ` with a common `δ` and `ξ_k` in scale `first + k·gap`.
fn multi_bump(cfg: &MultiScaleConfig) -> Result<(GridFunction, Vec<usize>, usize, f64)> {
    let e_star = cfg.a.adjoint();
    let scales: Vec<usize> = (0..cfg.c.len()).map(|k| cfg.first + k * cfg.gap).collect();
    let last = *scales.last().ok_or(Error::InvalidParameter("no scales given".into()))?;
    let i_max = last + 1;
    let (_, delta) = scaled_ball(&e_star, cfg.band, cfg.first)?;
    let extent = cfg.extent_factor / delta;
    // frequency reach asked of a carrier-free grid by the pair
    let t = e_star.pow(i_max as i64);
    let needed = (0..t.nrows()).map(|k| 0.5 * t.row(k).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let n = ((4.0 * extent * needed).ceil() as usize).next_power_of_two().max(64);
    if n.pow(cfg.a.dim() as u32) > MAX_POINTS {
        return Err(Error::InvalidParameter(format!("multi-scale grid needs {n} points per axis")));
    }
    let grid = Grid::new(cfg.a.dim(), n, extent)?;
    let mut f = GridFunction::zeros(&grid);
    for (&i, &ck) in scales.iter().zip(&cfg.c) {
        let (xi, _) = scaled_ball(&e_star, cfg.band, i)?;
        let bump = modulated_bump(&xi, delta, &grid)?;
        f = f.add(&bump.scaled(ck.into()))?;
    }
    Ok((f, scales, i_max, delta))
}

/// Measured `tl_norm` for `q ∈ {1, 2}` against `δ^{d(1-1/p)}‖(|det A|^{αi_k}c_k)‖_{ℓ^q}`.
pub fn experiment_multiscale(cfg: &MultiScaleConfig, seed: u64) -> Result<Report> {
    let (f, scales, i_max, delta) = multi_bump(cfg)?;
    let pair = build_analyzing_pair(&cfg.a.adjoint(), f.grid(), i_max)?;
    let det = cfg.a.det_abs();
    let d = cfg.a.dim() as f64;
    let weighted: Vec<f64> = scales.iter().zip(&cfg.c).map(|(&i, c)| det.powf(cfg.alpha * i as f64) * c.abs()).collect();
    let config = serde_json::json!({
        "a": cfg.a.to_json(), "alpha": cfg.alpha, "p": cfg.p, "c": cfg.c, "scales": scales,
        "delta": delta, "n": f.grid().n, "L": f.grid().extent, "band": cfg.band,
    });
    let mut report = Report::new("multiscale", seed, config);
    let mut table = Table::new(&[
        ("q", Provenance::Config),
        ("tl_norm", Provenance::Measured),
        ("prediction", Provenance::Predicted),
        ("ratio", Provenance::Measured),
    ]);
    for q in [1.0, 2.0] {
        let params = TlParams { alpha: cfg.alpha, p: cfg.p, q, i_max };
        let tl = tl_norm(&f, &pair, &params)?;
        let lq = weighted.iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q);
        let pred = delta.powf(d * (1.0 - 1.0 / cfg.p)) * lq;
        table.push(vec![q, tl, pred, tl / pred]);
    }
    let tl = table.column("tl_norm").unwrap();
    let pred = table.column("prediction").unwrap();
    report.figure("switch_measured", tl[0] / tl[1], Provenance::Measured);
    report.figure("switch_predicted", pred[0] / pred[1], Provenance::Predicted);
    report.tables.push(("multiscale".into(), table));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_ball_hits_one_multiplier() {
        let a = ExpansiveMatrix::diagonal(&[2.0, 3.0]).unwrap();
        let e_star = a.adjoint();
        let (xi0, delta) = scaled_ball(&e_star, Band::Plateau, 3).unwrap();
        let grid = Grid::new(2, 64, 16.0 / delta).unwrap().with_carrier(&xi0).unwrap();
        let pair = build_analyzing_pair(&e_star, &grid, 6).unwrap();
        for k in 0..grid.len() {
            let xi = grid.freq(k);
            let dist = xi.iter().zip(&xi0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dist < delta {
                for i in 0..=6 {
                    let want = if i == 3 { 1.0 } else { 0.0 };
                    assert_eq!(pair.multiplier(i)[k], want, "i={i}");
                }
            }
        }
    }

    #[test]
    fn single_multiplier_gives_unit_ratio() {
        let a = ExpansiveMatrix::diagonal(&[2.0, 3.0]).unwrap();
        let mut cfg = ScalingConfig::new(a, 0.0, 1.0, f64::INFINITY, vec![1, 4]);
        cfg.band = Band::Plateau;
        cfg.n = 128;
        let r = experiment_norm_scaling(&cfg, 0).unwrap();
        for v in r.table("scaling").unwrap().column("ratio").unwrap() {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn transition_splits_between_two_scales() {
        let a = ExpansiveMatrix::diagonal(&[2.0, 3.0]).unwrap();
        let mut cfg = ScalingConfig::new(a, 0.0, 1.0, 1.0, vec![2]);
        cfg.n = 128;
        let r = experiment_norm_scaling(&cfg, 0).unwrap();
        let ratio = r.table("scaling").unwrap().column("ratio").unwrap()[0];
        // |f∗φ_i| + |f∗φ_{i+1}| ≥ |f| pointwise with equality off the overlap
        assert!((1.0 - 1e-12..2.0).contains(&ratio), "{ratio}");
    }
}
