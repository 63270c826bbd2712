//! `f_n = (1/n) Σ_{i=1}^n (n²/2) 1_{i/n + [-n^{-2}, n^{-2}]}`: unit mass on a set of
//! measure at most `2/n`, yet converging weakly to `1_{[0,1]}`.

use num_rational::Ratio;
use serde::Serialize;

use super::report::{Provenance, Report, Table};
use crate::error::{Error, Result};
use crate::quadrature::integrate_interval;

type Q = Ratio<i128>;

/// Gauss nodes per support interval.
const NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TestFunction {
    One,
    Identity,
    Exp,
    Cos3,
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] = [TestFunction::One, TestFunction::Identity, TestFunction::Exp, TestFunction::Cos3];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Identity => x,
            TestFunction::Exp => x.exp(),
            TestFunction::Cos3 => (3.0 * x).cos(),
        }
    }

    /// `∫₀¹ g`.
    pub fn limit(self) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Identity => 0.5,
            TestFunction::Exp => std::f64::consts::E - 1.0,
            TestFunction::Cos3 => 3f64.sin() / 3.0,
        }
    }

    /// Monomial degree for polynomial test functions.
    fn degree(self) -> Option<u32> {
        match self {
            TestFunction::One => Some(0),
            TestFunction::Identity => Some(1),
            _ => None,
        }
    }
}

fn check(n: u64) -> Result<()> {
    if !(2..=100_000).contains(&n) {
        return Err(Error::InvalidParameter(format!("n = {n} outside 2..=100000")));
    }
    Ok(())
}

fn interval(n: u64, i: u64) -> (Q, Q) {
    let c = Q::new(i as i128, n as i128);
    let r = Q::new(1, (n * n) as i128);
    (c - r, c + r)
}

/// `∫ f_n x^m`, exactly.
pub fn exact_moment(n: u64, m: u32) -> Result<Q> {
    check(n)?;
    let height = Q::new(n as i128, 2);
    let mut total = Q::from_integer(0);
    for i in 1..=n {
        let (a, b) = interval(n, i);
        total += height * (b.pow(m as i32 + 1) - a.pow(m as i32 + 1)) / Q::from_integer(m as i128 + 1);
    }
    Ok(total)
}

/// Lebesgue measure of `supp f_n`, exactly.
pub fn support_measure(n: u64) -> Result<Q> {
    check(n)?;
    let mut total = Q::from_integer(0);
    let mut current: Option<(Q, Q)> = None;
    for i in 1..=n {
        let (a, b) = interval(n, i);
        current = match current {
            Some((lo, hi)) if a <= hi => Some((lo, b.max(hi))),
            Some((lo, hi)) => {
                total += hi - lo;
                Some((a, b))
            }
            None => Some((a, b)),
        };
    }
    if let Some((lo, hi)) = current {
        total += hi - lo;
    }
    Ok(total)
}

/// `∫ f_n g` with a Gauss rule on each support interval.
pub fn pairing(n: u64, g: TestFunction) -> Result<f64> {
    check(n)?;
    let height = n as f64 / 2.0;
    let r = 1.0 / (n * n) as f64;
    Ok((1..=n)
        .map(|i| {
            let c = i as f64 / n as f64;
            height * integrate_interval(c - r, c + r, NODES, |x| g.eval(x))
        })
        .sum())
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

pub fn experiment_weakstar(ns: &[u64], seed: u64) -> Result<Report> {
    let config = serde_json::json!({ "ns": ns, "test_functions": ["one", "x", "exp", "cos3x"] });
    let mut report = Report::new("weakstar", seed, config);
    let mut table = Table::new(&[
        ("n", Provenance::Config),
        ("g", Provenance::Config),
        ("pairing", Provenance::Measured),
        ("pairing_exact", Provenance::Measured),
        ("limit", Provenance::Predicted),
        ("error", Provenance::Measured),
        ("l1_norm", Provenance::Measured),
        ("support_measure", Provenance::Measured),
        ("support_bound", Provenance::Predicted),
    ]);
    for &n in ns {
        let l1 = exact_moment(n, 0)?;
        if l1 != Q::from_integer(1) {
            report.notes.push(format!("n = {n}: mass {l1} is not 1"));
        }
        let supp = to_f64(support_measure(n)?);
        for (id, g) in TestFunction::ALL.iter().enumerate() {
            let measured = pairing(n, *g)?;
            let exact = match g.degree() {
                Some(m) => to_f64(exact_moment(n, m)?),
                None => f64::NAN,
            };
            table.push(vec![
                n as f64,
                id as f64,
                measured,
                exact,
                g.limit(),
                (measured - g.limit()).abs(),
                to_f64(l1),
                supp,
                2.0 / n as f64,
            ]);
        }
    }
    report.notes.push("g ids: 0 = 1, 1 = x, 2 = exp(x), 3 = cos(3x)".into());
    report.tables.push(("weakstar".into(), table));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_moment_closed_form() {
        // Σ i/n² = (n+1)/(2n)
        for n in [2, 3, 10, 100, 1000] {
            assert_eq!(exact_moment(n, 1).unwrap(), Q::new(n as i128 + 1, 2 * n as i128));
            assert_eq!(exact_moment(n, 0).unwrap(), Q::from_integer(1));
        }
    }

    #[test]
    fn support_is_small() {
        assert_eq!(support_measure(2).unwrap(), Q::from_integer(1));
        for n in [3, 10, 1000] {
            assert_eq!(support_measure(n).unwrap(), Q::new(2, n as i128));
        }
    }

    #[test]
    fn quadrature_matches_exact() {
        for n in [10, 100, 1000] {
            // summation over n intervals costs a few ulps each
            let x = pairing(n, TestFunction::Identity).unwrap();
            assert!((x - (n as f64 + 1.0) / (2.0 * n as f64)).abs() < 1e-10);
            assert!((pairing(n, TestFunction::One).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn error_decays() {
        let e = |n| (pairing(n, TestFunction::Exp).unwrap() - TestFunction::Exp.limit()).abs();
        assert!(e(1000) < e(100) / 5.0 && e(100) < e(10) / 5.0);
    }

    #[test]
    fn rejects_small_n() {
        assert!(pairing(1, TestFunction::One).is_err());
    }
}
