//! Sampled functions on the periodic box `[-L, L)^d` and their discrete transforms.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling lattice `x_k = -L + k·2L/n` per axis, last axis contiguous.
///
/// A nonzero `carrier` shifts the represented frequencies: the stored samples
/// `v` stand for `f(x) = e^{2πi carrier·x} v(x)`, so the transform covers the
/// window `carrier + [-n/(4L), n/(4L))^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub extent: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub carrier: Vec<f64>,
}

impl Grid {
    pub fn new(d: usize, n: usize, extent: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("grid dimension {d} not in 1..=3")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid size {n} must be a power of two >= 4")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid extent {extent} must be positive")));
        }
        Ok(Grid { d, n, extent, carrier: Vec::new() })
    }

    pub fn with_carrier(mut self, carrier: &[f64]) -> Result<Self> {
        if carrier.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: carrier.len() });
        }
        self.carrier = if carrier.iter().all(|&c| c == 0.0) { Vec::new() } else { carrier.to_vec() };
        Ok(self)
    }

    pub fn carrier(&self) -> Vec<f64> {
        if self.carrier.is_empty() {
            vec![0.0; self.d]
        } else {
            self.carrier.clone()
        }
    }

    pub fn has_carrier(&self) -> bool {
        !self.carrier.is_empty()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Half-width `n/(4L)` of the frequency window.
    pub fn freq_radius(&self) -> f64 {
        self.n as f64 / (4.0 * self.extent)
    }

    pub fn freq_step(&self) -> f64 {
        1.0 / (2.0 * self.extent)
    }

    /// Per-axis indices of a flat position.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        for k in (0..self.d).rev() {
            idx[k] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn coord(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.unflatten(flat).into_iter().map(|i| -self.extent + i as f64 * h).collect()
    }

    /// Signed index in `[-n/2, n/2)` for FFT position `i`.
    pub fn signed_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Frequency at FFT position `flat`.
    pub fn freq(&self, flat: usize) -> Vec<f64> {
        let step = self.freq_step();
        let c = self.carrier();
        self.unflatten(flat).into_iter().zip(c).map(|(i, c)| c + self.signed_index(i) as f64 * step).collect()
    }

    /// Whether the closed ball `B(center, radius)` lies in the frequency window.
    pub fn window_contains_ball(&self, center: &[f64], radius: f64) -> bool {
        let r = self.freq_radius();
        center.iter().zip(self.carrier()).all(|(&x, c)| x - radius >= c - r && x + radius < c + r)
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// In-place unnormalized n-dimensional transform, one axis at a time.
pub fn fft_nd(data: &mut [Complex64], d: usize, n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            data.par_chunks_mut(n).for_each(|line| fft.process(line));
            continue;
        }
        let block = stride * n;
        data.par_chunks_mut(block).for_each(|chunk| {
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for offset in 0..stride {
                for (k, v) in line.iter_mut().enumerate() {
                    *v = chunk[offset + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    chunk[offset + k * stride] = *v;
                }
            }
        });
    }
}

/// A sampled function with a lazily computed, cached transform.
#[derive(Debug)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Clone for GridFunction {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        GridFunction { grid: self.grid.clone(), values: self.values.clone(), spectrum }
    }
}

#[derive(Serialize, Deserialize)]
pub struct GridFunctionJson {
    pub d: usize,
    #[serde(rename = "L")]
    pub extent: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub carrier: Vec<f64>,
    /// Interleaved real and imaginary parts.
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(GridFunction { grid, values, spectrum: OnceLock::new() })
    }

    pub fn zeros(grid: &Grid) -> Self {
        GridFunction { grid: grid.clone(), values: vec![Complex64::new(0.0, 0.0); grid.len()], spectrum: OnceLock::new() }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Complex64 + Sync) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|k| f(&grid.coord(k))).collect();
        GridFunction { grid: grid.clone(), values, spectrum: OnceLock::new() }
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Builds the function from its unnormalized transform.
    pub fn from_spectrum(grid: &Grid, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: spectrum.len() });
        }
        let mut values = spectrum.clone();
        fft_nd(&mut values, grid.d, grid.n, true);
        let scale = 1.0 / grid.len() as f64;
        values.par_iter_mut().for_each(|v| *v *= scale);
        let cell = OnceLock::new();
        let _ = cell.set(spectrum);
        Ok(GridFunction { grid: grid.clone(), values, spectrum: cell })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Unnormalized forward DFT of the samples, computed once.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut s = self.values.clone();
            fft_nd(&mut s, self.grid.d, self.grid.n, false);
            s
        })
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn scaled(&self, c: Complex64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(GridFunction { grid: self.grid.clone(), values, spectrum: OnceLock::new() })
    }

    pub fn check_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Inverse transform of `spectrum · m`.
    pub fn apply_multiplier(&self, m: &[f64]) -> GridFunction {
        let spec: Vec<Complex64> = self.spectrum().par_iter().zip(m.par_iter()).map(|(s, w)| s * w).collect();
        GridFunction::from_spectrum(&self.grid, spec).expect("multiplier sized to grid")
    }

    pub fn to_json(&self) -> GridFunctionJson {
        GridFunctionJson {
            d: self.grid.d,
            extent: self.grid.extent,
            n: self.grid.n,
            carrier: self.grid.carrier.clone(),
            values: self.values.iter().flat_map(|v| [v.re, v.im]).collect(),
        }
    }

    pub fn from_json(j: &GridFunctionJson) -> Result<Self> {
        let grid = Grid::new(j.d, j.n, j.extent)?;
        let grid = if j.carrier.is_empty() { grid } else { grid.with_carrier(&j.carrier)? };
        if j.values.len() != 2 * grid.len() {
            return Err(Error::DimensionMismatch { expected: 2 * grid.len(), got: j.values.len() });
        }
        let values = j.values.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        GridFunction::new(grid, values)
    }
}

/// Riemann-sum `L^p` norm; `p = ∞` gives the maximum modulus.
/// Chunk length for parallel sums.
pub(crate) const REDUCE_CHUNK: usize = 4096;

pub fn lp_norm(f: &GridFunction, p: f64) -> f64 {
    lp_norm_of(&f.abs(), f.grid().cell_volume(), p)
}

pub(crate) fn lp_norm_of(abs: &[f64], cell: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return abs.iter().copied().fold(0.0, f64::max);
    }
    // fixed chunks summed in order, so the result does not depend on the thread count
    let partial: Vec<f64> = abs.par_chunks(REDUCE_CHUNK).map(|c| c.iter().map(|a| a.powf(p)).sum()).collect();
    (partial.iter().sum::<f64>() * cell).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn round_trip() {
        let g = Grid::new(2, 32, 3.0).unwrap();
        let f = GridFunction::from_fn(&g, |x| Complex64::new(x[0].sin() * x[1], x[0] * x[0]));
        let back = GridFunction::from_spectrum(&g, f.spectrum().to_vec()).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_sum() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let f = GridFunction::from_fn(&g, |x| Complex64::new(x[0] + 2.0 * x[1] * x[1], x[1]));
        let n = g.n;
        for m in [0usize, 5, 17, 63] {
            let mi = g.unflatten(m);
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..g.len() {
                let ki = g.unflatten(k);
                let ph = -2.0 * std::f64::consts::PI * (ki[0] * mi[0] + ki[1] * mi[1]) as f64 / n as f64;
                s += f.values()[k] * Complex64::from_polar(1.0, ph);
            }
            assert!((s - f.spectrum()[m]).norm() < 1e-10);
        }
    }

    #[test]
    fn indicator_norms() {
        let g = Grid::new(1, 256, 2.0).unwrap();
        let f = GridFunction::from_real_fn(&g, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 });
        for p in [0.5, 1.0, 2.0, 7.0, f64::INFINITY] {
            assert_relative_eq!(lp_norm(&f, p), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_l2() {
        let g = Grid::new(1, 1024, 8.0).unwrap();
        let f = GridFunction::from_real_fn(&g, |x| (-std::f64::consts::PI * x[0] * x[0]).exp());
        assert!((lp_norm(&f, 2.0) - 2f64.powf(-0.25)).abs() < 1e-6);
    }

    #[test]
    fn frequency_lattice() {
        let g = Grid::new(1, 16, 2.0).unwrap().with_carrier(&[10.0]).unwrap();
        assert_eq!(g.freq(0), vec![10.0]);
        assert_eq!(g.freq(1), vec![10.25]);
        assert_eq!(g.freq(8), vec![8.0]);
        assert!(g.window_contains_ball(&[10.5], 1.0));
        assert!(!g.window_contains_ball(&[10.5], 1.6));
    }

    #[test]
    fn json_round_trip() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let f = GridFunction::from_fn(&g, |x| Complex64::new(x[0], -x[0]));
        let back = GridFunction::from_json(&f.to_json()).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid(), f.grid());
    }
}
