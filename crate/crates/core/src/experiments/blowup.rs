//! Growth of `‖f_k‖_{h^p(B)}` along the dilated special functions `f_k`.

use rayon::prelude::*;

use super::report::{Provenance, Report, Table};
use super::sequence::{d_sequence, SequenceRow};
use crate::covers::{classify_coarse_equivalence_with, linear_fit, Verdict, DEFAULT_K_MAX};
use crate::error::{Error, Result};
use crate::hardy_atoms::{
    construct_special_function, hp_norm, make_blowup_function, max_resolvable_scale, AtomSpec, BlowupSpec, Locality,
    RadialBump, SpecialFunction,
};
use crate::littlewood_paley::GridFunction;
use crate::matrix::ExpansiveMatrix;

/// Widths (absolute) at which the concentration near the top direction is measured.
const CONCENTRATION_WIDTHS: [f64; 4] = [0.1, 0.03, 0.01, 0.003];

#[derive(Clone, Debug)]
pub struct BlowupConfig {
    pub a: ExpansiveMatrix,
    pub b: ExpansiveMatrix,
    pub p: f64,
    pub ks: Vec<i64>,
    /// Points per axis.
    pub n: usize,
    /// Cap on the maximal-function scale; the grid may impose a lower one.
    pub j_max: usize,
    /// Moment order; defaults to the smallest admissible for both matrices.
    pub s: Option<usize>,
    /// Defaults to `1/sup|f₀|`.
    pub delta0: Option<f64>,
    pub margin: f64,
    /// Scales `0..=control_scales` of the `B`-atom control; `None` skips it.
    pub control_scales: Option<i64>,
}

impl BlowupConfig {
    pub fn new(a: ExpansiveMatrix, b: ExpansiveMatrix, p: f64, ks: Vec<i64>) -> Self {
        let n = if a.dim() == 1 { 4096 } else { 512 };
        BlowupConfig { a, b, p, ks, n, j_max: 4, s: None, delta0: None, margin: 0.1, control_scales: Some(3) }
    }
}

/// Measured log-norm of one dilate, or why it was skipped.
struct Measured {
    j_max: i64,
    log_norm: f64,
    concentration: Vec<f64>,
}

fn hp_log_norm(f: &GridFunction, phi: &RadialBump, b: &ExpansiveMatrix, p: f64, cap: usize) -> Result<(i64, f64)> {
    let jm = max_resolvable_scale(f.grid(), phi, b).min(cap as i64);
    if jm < 0 {
        return Err(Error::ResolutionExceeded { j: 0, reason: "kernel unresolved at scale 0".into() });
    }
    Ok((jm, hp_norm(f, phi, b, p, jm as usize, Locality::Local)?.ln()))
}

/// Fraction of `‖f‖₁` within distance `w` of the line spanned by `dir`.
fn concentration(f: &GridFunction, dir: &[f64]) -> Vec<f64> {
    let grid = f.grid();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u: Vec<f64> = dir.iter().map(|v| v / norm).collect();
    let mut total = 0.0;
    let mut near = vec![0.0; CONCENTRATION_WIDTHS.len()];
    for (k, v) in f.values().iter().enumerate() {
        let m = v.norm();
        if m == 0.0 {
            continue;
        }
        let x = grid.coord(k);
        let along: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
        let dist = x.iter().zip(&u).map(|(a, b)| (a - along * b).powi(2)).sum::<f64>().sqrt();
        total += m;
        for (slot, w) in near.iter_mut().zip(CONCENTRATION_WIDTHS) {
            if dist <= w {
                *slot += m;
            }
        }
    }
    near.into_iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect()
}

fn measure_row(
    f0: &SpecialFunction,
    row: &SequenceRow,
    cfg: &BlowupConfig,
    delta0: f64,
    phi: &RadialBump,
) -> Result<Measured> {
    let d = cfg.a.dim();
    let spec = BlowupSpec {
        j1: row.j1,
        j2: -row.k - row.d,
        rotation: Some(row.rotation()),
        x0: vec![0.0; d],
        p: cfg.p,
        delta0: Some(delta0),
        margin: cfg.margin,
    };
    let (f, _) = make_blowup_function(f0, &spec, &cfg.a, &cfg.b, cfg.n)?;
    let (j_max, log_norm) = hp_log_norm(&f, phi, &cfg.b, cfg.p, cfg.j_max)?;
    // the mass profile does not depend on p, only the amplitude does
    let top = &row.q * nalgebra::DVector::from_vec(row.z.clone());
    let concentration = if d >= 2 { concentration(&f, top.as_slice()) } else { Vec::new() };
    Ok(Measured { j_max, log_norm, concentration })
}

pub fn experiment_blowup(cfg: &BlowupConfig, seed: u64) -> Result<Report> {
    let (a, b, p) = (&cfg.a, &cfg.b, cfg.p);
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in (0, 1)")));
    }
    let d = a.dim();
    let verdict = classify_coarse_equivalence_with(&a.adjoint(), &b.adjoint(), DEFAULT_K_MAX, None)?.verdict;
    let s = cfg.s.unwrap_or(AtomSpec::min_order(p, a).max(AtomSpec::min_order(p, b)));
    let f0 = construct_special_function(d, s, None)?;
    let delta0 = cfg.delta0.unwrap_or(f0.unit_scale());
    let seq = d_sequence(a, b, &cfg.ks, p, delta0)?;
    let phi = RadialBump::for_matrix(a);
    let measured: Vec<Result<Measured>> =
        seq.rows.par_iter().map(|row| measure_row(&f0, row, cfg, delta0, &phi)).collect();

    let config = serde_json::json!({
        "a": a.to_json(), "b": b.to_json(), "p": p, "ks": cfg.ks, "n": cfg.n, "j_max": cfg.j_max,
        "s": s, "delta0": delta0, "margin": cfg.margin,
    });
    let mut report = Report::new("blowup", seed, config);
    if verdict != Verdict::NotCoarselyEquivalent {
        report.notes.push(format!(
            "A* and B* classified {verdict:?}: no blow-up is predicted and the run is a control"
        ));
    }
    let log_det = a.det_abs().ln();
    let mut table = Table::new(&[
        ("k", Provenance::Config),
        ("j1", Provenance::Config),
        ("d_k", Provenance::Measured),
        ("c_k", Provenance::Measured),
        ("delta_k", Provenance::Measured),
        ("j_max", Provenance::Config),
        ("log_norm", Provenance::Measured),
        ("log_lower_bound", Provenance::Predicted),
    ]);
    let mut conc = Table::new(&[("k", Provenance::Config), ("width", Provenance::Config), ("fraction", Provenance::Measured)]);
    for (row, m) in seq.rows.iter().zip(measured) {
        let m = match m {
            Ok(m) => m,
            Err(e) => {
                report.notes.push(format!("k = {} and beyond not computed: {e}", row.k));
                break;
            }
        };
        table.push(vec![
            row.k as f64,
            row.j1 as f64,
            row.d as f64,
            row.c,
            row.delta,
            m.j_max as f64,
            m.log_norm,
            // ‖f_k‖^p ≳ |det A|^{d(k)(1-p)}, up to an additive constant in the log
            row.d as f64 * (1.0 - p) * log_det / p,
        ]);
        for (w, frac) in CONCENTRATION_WIDTHS.iter().zip(&m.concentration) {
            conc.push(vec![row.k as f64, *w, *frac]);
        }
    }
    let ks = table.column("k").unwrap_or_default();
    let logs = table.column("log_norm").unwrap_or_default();
    let predicted = table.column("log_lower_bound").unwrap_or_default();
    report.figure("resolved_k", ks.len() as f64, Provenance::Measured);
    if ks.len() >= 2 {
        let (slope, _, r2) = linear_fit(&ks, &logs);
        let (pred_slope, _, _) = linear_fit(&ks, &predicted);
        report.figure("slope", slope, Provenance::Fitted);
        report.figure("slope_r2", r2, Provenance::Fitted);
        report.figure("slope_predicted", pred_slope, Provenance::Predicted);
        let increasing = logs.windows(2).all(|w| w[1] > w[0]);
        report.figure("strictly_increasing", increasing as u8 as f64, Provenance::Measured);
    }
    report.tables.push(("blowup".into(), table));
    if d >= 2 {
        report.tables.push(("concentration".into(), conc));
    }
    if let Some(top) = cfg.control_scales {
        let control = atom_control(&f0, cfg, delta0, &phi, top)?;
        let norms = control.column("log_norm").unwrap_or_default();
        if !norms.is_empty() {
            let hi = norms.iter().copied().fold(f64::MIN, f64::max);
            let lo = norms.iter().copied().fold(f64::MAX, f64::min);
            report.figure("control_spread", (hi - lo).exp(), Provenance::Measured);
        }
        report.tables.push(("atom_control".into(), control));
    }
    Ok(report)
}

/// `h^p(B)` norms of `D^p`-normalized `B`-dilates of `f₀` at scales `-j`, `j = 0..=top`.
fn atom_control(f0: &SpecialFunction, cfg: &BlowupConfig, delta0: f64, phi: &RadialBump, top: i64) -> Result<Table> {
    let d = cfg.b.dim();
    let rows: Vec<Option<(i64, f64)>> = (0..=top)
        .into_par_iter()
        .map(|j| {
            let spec = BlowupSpec {
                j1: 0,
                j2: -j,
                rotation: None,
                x0: vec![0.0; d],
                p: cfg.p,
                delta0: Some(delta0),
                margin: cfg.margin,
            };
            let (f, _) = make_blowup_function(f0, &spec, &cfg.b, &cfg.b, cfg.n).ok()?;
            hp_log_norm(&f, phi, &cfg.b, cfg.p, cfg.j_max).ok()
        })
        .collect();
    let mut table =
        Table::new(&[("j", Provenance::Config), ("j_max", Provenance::Config), ("log_norm", Provenance::Measured)]);
    for (j, r) in rows.into_iter().enumerate() {
        if let Some((jm, log_norm)) = r {
            table.push(vec![j as f64, jm as f64, log_norm]);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_pair_is_a_control() {
        // in one dimension every pair is coarsely equivalent and Q_k stays bounded
        let a = ExpansiveMatrix::scalar(1, 2.0).unwrap();
        let b = ExpansiveMatrix::scalar(1, 4.0).unwrap();
        let mut cfg = BlowupConfig::new(a, b, 0.5, vec![1, 2, 3, 4]);
        cfg.control_scales = None;
        let r = experiment_blowup(&cfg, 0).unwrap();
        assert!(!r.notes.is_empty());
        let t = r.table("blowup").unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(r.get("slope").unwrap().abs() < 0.05);
    }

    #[test]
    fn rejects_p_one() {
        let a = ExpansiveMatrix::scalar(1, 2.0).unwrap();
        let cfg = BlowupConfig::new(a.clone(), a, 1.0, vec![1]);
        assert!(experiment_blowup(&cfg, 0).is_err());
    }
}
