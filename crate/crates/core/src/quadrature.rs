//! Gauss rules on intervals and balls.

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `∫_a^b f` with an `n`-point Gauss rule.
pub fn integrate_interval(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Points and weights on `B(center, radius)` ⊂ ℝ^d, d ≤ 3, exact for polynomials of
/// degree below `2n - d + 1`. Polar coordinates: Gauss in the radius (and in `cos φ`
/// for d = 3), trapezoid in the azimuth.
pub fn ball_rule(center: &[f64], radius: f64, n: usize) -> Vec<(Vec<f64>, f64)> {
    let d = center.len();
    let (gx, gw) = gauss_legendre(n);
    let radial: Vec<(f64, f64)> = gx.iter().zip(&gw).map(|(x, w)| (0.5 * radius * (x + 1.0), 0.5 * radius * w)).collect();
    let shift = |p: Vec<f64>| -> Vec<f64> { p.iter().zip(center).map(|(a, c)| a + c).collect() };
    let n_az = 2 * n + 2;
    let two_pi = 2.0 * std::f64::consts::PI;
    match d {
        1 => gx.iter().zip(&gw).map(|(x, w)| (shift(vec![radius * x]), radius * w)).collect(),
        2 => {
            let mut out = Vec::with_capacity(n * n_az);
            for &(r, wr) in &radial {
                for k in 0..n_az {
                    let th = two_pi * k as f64 / n_az as f64;
                    out.push((shift(vec![r * th.cos(), r * th.sin()]), wr * r * two_pi / n_az as f64));
                }
            }
            out
        }
        3 => {
            let mut out = Vec::with_capacity(n * n * n_az);
            for &(r, wr) in &radial {
                for (t, wt) in gx.iter().zip(&gw) {
                    let s = (1.0 - t * t).sqrt();
                    for k in 0..n_az {
                        let th = two_pi * k as f64 / n_az as f64;
                        let p = vec![r * s * th.cos(), r * s * th.sin(), r * t];
                        out.push((shift(p), wr * r * r * wt * two_pi / n_az as f64));
                    }
                }
            }
            out
        }
        _ => panic!("ball rules only for d <= 3"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_exactness() {
        let (x, w) = gauss_legendre(5);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        for k in 0..10 {
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum();
            assert_relative_eq!(q, exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        let v2: f64 = ball_rule(&[0.3, -1.0], 0.5, 4).iter().map(|p| p.1).sum();
        assert_relative_eq!(v2, pi * 0.25, epsilon = 1e-13);
        let v3: f64 = ball_rule(&[0.0, 0.0, 1.0], 2.0, 4).iter().map(|p| p.1).sum();
        assert_relative_eq!(v3, 4.0 / 3.0 * pi * 8.0, epsilon = 1e-12);
        // ∫_{B(0,1)} x² y² = π/24 in the plane
        let q: f64 = ball_rule(&[0.0, 0.0], 1.0, 4).iter().map(|(p, w)| w * p[0].powi(2) * p[1].powi(2)).sum();
        assert_relative_eq!(q, pi / 24.0, epsilon = 1e-13);
    }
}
