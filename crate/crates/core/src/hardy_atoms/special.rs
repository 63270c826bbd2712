//! A bounded function equal to 1 on `B(¾e₁, ¼)`, a polynomial on `B(0, ½)`, zero
//! elsewhere, with vanishing moments up to a given order.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::ball_rule;

const CONDITION_FLOOR: f64 = 1e-13;
pub const INNER_RADIUS: f64 = 0.5;
pub const CAP_RADIUS: f64 = 0.25;
pub const CAP_CENTER: f64 = 0.75;

/// Multi-indices of total degree at most `s` in `d` variables, graded.
pub fn multi_indices(d: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=s {
        let mut idx = vec![0; d];
        fill(&mut out, &mut idx, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, idx: &mut Vec<usize>, axis: usize, left: usize) {
    if axis + 1 == idx.len() {
        idx[axis] = left;
        out.push(idx.clone());
        return;
    }
    for k in (0..=left).rev() {
        idx[axis] = k;
        fill(out, idx, axis + 1, left - k);
    }
}

pub fn monomial(x: &[f64], sigma: &[usize]) -> f64 {
    x.iter().zip(sigma).map(|(xi, &s)| xi.powi(s as i32)).product()
}

/// Number of Gauss nodes per polar coordinate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadratureConfig {
    pub nodes: usize,
}

impl QuadratureConfig {
    pub fn for_order(s: usize) -> Self {
        QuadratureConfig { nodes: s + 4 }
    }

    pub fn refined(self, factor: usize) -> Self {
        QuadratureConfig { nodes: self.nodes * factor }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpecialFunction {
    pub d: usize,
    pub s: usize,
    /// Coefficients of `(x/R)^τ`, `R = ½`, over [`multi_indices`].
    pub coefficients: Vec<f64>,
    pub quadrature: QuadratureConfig,
    /// `sup |f|`, at least 1.
    pub max_abs: f64,
    /// `σ_min/σ_max` of the moment system.
    pub condition: f64,
}

pub fn construct_special_function(d: usize, s: usize, quadrature: Option<QuadratureConfig>) -> Result<SpecialFunction> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidParameter(format!("dimension {d} not in 1..=3")));
    }
    let quad = quadrature.unwrap_or(QuadratureConfig::for_order(s));
    if quad.nodes < s + 1 {
        return Err(Error::InvalidParameter("too few quadrature nodes for the moment order".into()));
    }
    let basis = multi_indices(d, s);
    let m = basis.len();
    let inner = ball_rule(&vec![0.0; d], INNER_RADIUS, quad.nodes);
    let cap = ball_rule(&cap_center(d), CAP_RADIUS, quad.nodes);
    let gram = DMatrix::from_fn(m, m, |a, b| {
        inner.iter().map(|(x, w)| w * monomial(x, &basis[a]) * scaled_monomial(x, &basis[b])).sum::<f64>()
    });
    let rhs = DVector::from_fn(m, |a, _| -cap.iter().map(|(x, w)| w * monomial(x, &basis[a])).sum::<f64>());
    let svd = gram.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smin / smax;
    if !(condition >= CONDITION_FLOOR) {
        return Err(Error::SolveFailure { condition });
    }
    let coeffs = svd.solve(&rhs, 0.0).map_err(|_| Error::SolveFailure { condition })?;
    let mut f = SpecialFunction {
        d,
        s,
        coefficients: coeffs.iter().copied().collect(),
        quadrature: quad,
        max_abs: 1.0,
        condition,
    };
    f.max_abs = f.sample_max_abs();
    Ok(f)
}

fn cap_center(d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d];
    c[0] = CAP_CENTER;
    c
}

fn scaled_monomial(x: &[f64], tau: &[usize]) -> f64 {
    x.iter().zip(tau).map(|(xi, &t)| (xi / INNER_RADIUS).powi(t as i32)).product()
}

impl SpecialFunction {
    /// The polynomial piece on `B(0, ½)`.
    pub fn inner_polynomial(&self, x: &[f64]) -> f64 {
        multi_indices(self.d, self.s).iter().zip(&self.coefficients).map(|(t, c)| c * scaled_monomial(x, t)).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 < INNER_RADIUS * INNER_RADIUS {
            return self.inner_polynomial(x);
        }
        let c2: f64 = x.iter().zip(cap_center(self.d)).map(|(v, c)| (v - c).powi(2)).sum();
        if c2 < CAP_RADIUS * CAP_RADIUS {
            1.0
        } else {
            0.0
        }
    }

    /// Scale making the supremum exactly 1.
    pub fn unit_scale(&self) -> f64 {
        1.0 / self.max_abs
    }

    fn sample_max_abs(&self) -> f64 {
        let per_axis = match self.d {
            1 => 4001usize,
            2 => 301,
            _ => 61,
        };
        let mut best: f64 = 1.0;
        let total = per_axis.pow(self.d as u32);
        for flat in 0..total {
            let mut rem = flat;
            let x: Vec<f64> = (0..self.d)
                .map(|_| {
                    let k = rem % per_axis;
                    rem /= per_axis;
                    -INNER_RADIUS + k as f64 * 2.0 * INNER_RADIUS / (per_axis - 1) as f64
                })
                .collect();
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if r2 <= INNER_RADIUS * INNER_RADIUS {
                best = best.max(self.inner_polynomial(&x).abs());
            }
        }
        best
    }

    /// `∫ f x^σ` for each `|σ| ≤ s`, with `nodes` Gauss points per coordinate.
    pub fn moments(&self, nodes: usize) -> Vec<f64> {
        let id = DMatrix::identity(self.d, self.d);
        self.transformed_moments(&id, &vec![0.0; self.d], 1.0, nodes)
    }

    /// Moments of `x ↦ amplitude·f(T⁻¹(x - x₀))`, pulled back to `f`'s own balls.
    pub fn transformed_moments(&self, t: &DMatrix<f64>, x0: &[f64], amplitude: f64, nodes: usize) -> Vec<f64> {
        let jac = t.determinant().abs() * amplitude;
        let inner = ball_rule(&vec![0.0; self.d], INNER_RADIUS, nodes);
        let cap = ball_rule(&cap_center(self.d), CAP_RADIUS, nodes);
        let push = |y: &[f64]| -> Vec<f64> {
            let v = t * DVector::from_column_slice(y);
            v.iter().zip(x0).map(|(a, b)| a + b).collect()
        };
        multi_indices(self.d, self.s)
            .iter()
            .map(|sigma| {
                let a: f64 = inner.iter().map(|(y, w)| w * self.inner_polynomial(y) * monomial(&push(y), sigma)).sum();
                let b: f64 = cap.iter().map(|(y, w)| w * monomial(&push(y), sigma)).sum();
                jac * (a + b)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Γ at positive integers and half-integers.
    fn gamma_half(two_x: usize) -> f64 {
        match two_x {
            1 => std::f64::consts::PI.sqrt(),
            2 => 1.0,
            k => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
        }
    }

    /// `∫_{B(0,R)} x^σ` in closed form.
    fn centred_ball_moment(sigma: &[usize], radius: f64) -> f64 {
        if sigma.iter().any(|s| s % 2 == 1) {
            return 0.0;
        }
        let d = sigma.len();
        let total: usize = sigma.iter().sum();
        let num: f64 = sigma.iter().map(|&s| gamma_half(s + 1)).product();
        2.0 * num / (gamma_half(total + d) * (total + d) as f64) * radius.powi((total + d) as i32)
    }

    #[test]
    fn one_dimensional_constant() {
        let f = construct_special_function(1, 0, None).unwrap();
        assert_relative_eq!(f.coefficients[0], -0.5, epsilon = 1e-14);
        assert_eq!(f.eval(&[0.8]), 1.0);
        assert_eq!(f.eval(&[1.2]), 0.0);
        assert_relative_eq!(f.eval(&[-0.2]), -0.5, epsilon = 1e-14);
    }

    #[test]
    fn gram_matches_closed_form() {
        for d in 1..=3 {
            let basis = multi_indices(d, 3);
            let rule = ball_rule(&vec![0.0; d], 0.5, 6);
            for a in &basis {
                for b in &basis {
                    let sigma: Vec<usize> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                    let q: f64 = rule.iter().map(|(x, w)| w * monomial(x, &sigma)).sum();
                    assert_relative_eq!(q, centred_ball_moment(&sigma, 0.5), epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn moments_vanish_under_refined_rule() {
        for (d, s) in [(1, 0), (1, 1), (1, 4), (2, 1), (2, 3), (3, 2)] {
            let f = construct_special_function(d, s, None).unwrap();
            for m in f.moments(4 * f.quadrature.nodes) {
                assert!(m.abs() < 1e-10, "d={d} s={s} moment {m}");
            }
            assert!(f.max_abs >= 1.0);
        }
    }

    #[test]
    fn moments_survive_linear_maps() {
        let f = construct_special_function(2, 2, None).unwrap();
        let t = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, -0.1, 0.05]);
        for m in f.transformed_moments(&t, &[0.0, 0.0], 7.0, 12) {
            assert!(m.abs() < 1e-10);
        }
    }

    #[test]
    fn index_count() {
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }
}
