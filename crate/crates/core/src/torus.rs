//! Spectral calculus on the flat torus `(R/PZ)^n`, `n` in 1..=3.
//!
//! Fields are stored as real samples on an isotropic grid with `N` points per
//! axis. Derivatives are Fourier multipliers applied line by line, and
//! integrals are grid means times the torus volume, which is exact for
//! band-limited integrands.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Isotropic periodic grid on `(R/PZ)^n`.
#[derive(Clone)]
pub struct PeriodicGrid {
    dim: usize,
    points: usize,
    period: f64,
    plans: Arc<Plans>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("dim", &self.dim)
            .field("points", &self.points)
            .field("period", &self.period)
            .finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.period == other.period
    }
}

impl PeriodicGrid {
    pub fn new(dim: usize, points: usize, period: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "period must be positive, got {period}"
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        };
        Ok(Self {
            dim,
            points,
            period,
            plans: Arc::new(plans),
        })
    }

    /// Grid with the default period `2π`.
    pub fn standard(dim: usize, points: usize) -> Result<Self> {
        Self::new(dim, points, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.points as f64
    }

    /// Total number of samples, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest admissible wavevector component for sampled trig polynomials.
    pub fn band_limit(&self) -> usize {
        self.points / 4
    }

    /// Torus volume `P^n`.
    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Base wavenumber `2π/P`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.period
    }

    fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    /// Multi-index of a flat sample index; axis 0 varies slowest.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
        out
    }

    /// Coordinates of a flat sample index.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(idx)
            .into_iter()
            .map(|i| i as f64 * h)
            .collect()
    }

    fn line_starts(&self, axis: usize) -> Vec<usize> {
        let stride = self.stride(axis);
        (0..self.len())
            .filter(|&idx| (idx / stride).is_multiple_of(self.points))
            .collect()
    }

    fn signed_mode(&self, i: usize) -> f64 {
        if i <= self.points / 2 {
            i as f64
        } else {
            i as f64 - self.points as f64
        }
    }
}

/// Real samples of a smooth periodic function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn constant(grid: &PeriodicGrid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Spectral derivative along `axis`.
    pub fn partial(&self, axis: usize) -> Self {
        assert!(axis < self.grid.dim, "axis {axis} out of range");
        let g = &self.grid;
        let n = g.points;
        let stride = g.stride(axis);
        let kappa = g.wavenumber();
        let mut out = vec![0.0; self.values.len()];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for start in g.line_starts(axis) {
            for (i, c) in line.iter_mut().enumerate() {
                *c = Complex64::new(self.values[start + i * stride], 0.0);
            }
            g.plans.forward.process(&mut line);
            for (i, c) in line.iter_mut().enumerate() {
                if i == n / 2 {
                    *c = Complex64::new(0.0, 0.0);
                } else {
                    *c *= Complex64::new(0.0, kappa * g.signed_mode(i));
                }
            }
            g.plans.inverse.process(&mut line);
            for (i, c) in line.iter().enumerate() {
                out[start + i * stride] = c.re / n as f64;
            }
        }
        Self {
            grid: g.clone(),
            values: out,
        }
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.grid.dim).map(|a| self.partial(a)).collect()
    }

    /// `∫ f dx` over the torus.
    pub fn integrate(&self) -> f64 {
        self.mean() * self.grid.volume()
    }

    /// Normalized n-dimensional DFT coefficients `c_k` with `f = Σ c_k e^{iκ k·x}`.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let g = &self.grid;
        let n = g.points;
        let mut data: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..g.dim {
            let stride = g.stride(axis);
            for start in g.line_starts(axis) {
                for (i, c) in line.iter_mut().enumerate() {
                    *c = data[start + i * stride];
                }
                g.plans.forward.process(&mut line);
                for (i, c) in line.iter().enumerate() {
                    data[start + i * stride] = *c;
                }
            }
        }
        let scale = 1.0 / g.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<&ScalarField> for f64 {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        rhs.scale(self)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|v| -v)
    }
}

/// Tensor field of rank 0..=2 stored component-wise, row-major in tensor indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: PeriodicGrid,
    rank: usize,
    symmetric: bool,
    components: Vec<ScalarField>,
}

impl TensorField {
    pub fn scalar(f: ScalarField) -> Self {
        Self {
            grid: f.grid.clone(),
            rank: 0,
            symmetric: false,
            components: vec![f],
        }
    }

    pub fn vector(components: Vec<ScalarField>) -> Self {
        let grid = components[0].grid.clone();
        assert_eq!(components.len(), grid.dim);
        Self {
            grid,
            rank: 1,
            symmetric: false,
            components,
        }
    }

    /// Symmetric rank-2 field built from its upper triangle; `f(a, b)` is
    /// called only for `a <= b`.
    pub fn symmetric(grid: &PeriodicGrid, mut f: impl FnMut(usize, usize) -> ScalarField) -> Self {
        let n = grid.dim;
        let mut slots: Vec<Option<ScalarField>> = vec![None; n * n];
        for a in 0..n {
            for b in a..n {
                let c = f(a, b);
                slots[b * n + a] = Some(c.clone());
                slots[a * n + b] = Some(c);
            }
        }
        let components = slots.into_iter().map(|c| c.expect("filled")).collect();
        Self {
            grid: grid.clone(),
            rank: 2,
            symmetric: true,
            components,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn component(&self, a: usize) -> &ScalarField {
        assert_eq!(self.rank, 1);
        &self.components[a]
    }

    pub fn get(&self, a: usize, b: usize) -> &ScalarField {
        assert_eq!(self.rank, 2);
        &self.components[a * self.grid.dim + b]
    }

    /// Value of component `(a, b)` at sample `idx`.
    pub fn at(&self, a: usize, b: usize, idx: usize) -> f64 {
        self.get(a, b).values[idx]
    }

    /// Max over points and index pairs of `|T_ab - T_ba|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.grid.dim;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.get(a, b) - self.get(b, a)).max_abs());
            }
        }
        worst
    }

    /// Full contraction `T^{ab} S_ab` of two rank-2 fields.
    pub fn contract_pairs(&self, other: &TensorField) -> ScalarField {
        let n = self.grid.dim;
        let mut out = ScalarField::zeros(&self.grid);
        for a in 0..n {
            for b in 0..n {
                out = &out + &(self.get(a, b) * other.get(a, b));
            }
        }
        out
    }

    /// Contraction `T(u, v) = T_ab u^a v^b`.
    pub fn contract(&self, u: &[ScalarField], v: &[ScalarField]) -> ScalarField {
        let n = self.grid.dim;
        let mut out = ScalarField::zeros(&self.grid);
        for a in 0..n {
            for b in 0..n {
                let term = &(self.get(a, b) * &u[a]) * &v[b];
                out = &out + &term;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub coefficient: f64,
    pub wavevector: Vec<i64>,
    pub phase: Phase,
}

impl TrigTerm {
    pub fn new(coefficient: f64, wavevector: impl Into<Vec<i64>>, phase: Phase) -> Self {
        Self {
            coefficient,
            wavevector: wavevector.into(),
            phase,
        }
    }
}

/// Finite sum of `c cos(κ k·x)` / `c sin(κ k·x)` terms, `κ = 2π/P`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigPolynomial {
    pub terms: Vec<TrigTerm>,
}

impl TrigPolynomial {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        Self { terms }
    }

    pub fn single(coefficient: f64, wavevector: impl Into<Vec<i64>>, phase: Phase) -> Self {
        Self {
            terms: vec![TrigTerm::new(coefficient, wavevector, phase)],
        }
    }

    pub fn cos(wavevector: impl Into<Vec<i64>>) -> Self {
        Self::single(1.0, wavevector, Phase::Cos)
    }

    pub fn sin(wavevector: impl Into<Vec<i64>>) -> Self {
        Self::single(1.0, wavevector, Phase::Sin)
    }

    pub fn plus(mut self, other: TrigPolynomial) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.coefficient *= c);
        self
    }

    pub fn eval(&self, x: &[f64], period: f64) -> f64 {
        let kappa = 2.0 * PI / period;
        self.terms
            .iter()
            .map(|t| {
                let arg: f64 = kappa
                    * t.wavevector
                        .iter()
                        .zip(x)
                        .map(|(&k, &xi)| k as f64 * xi)
                        .sum::<f64>();
                match t.phase {
                    Phase::Cos => t.coefficient * arg.cos(),
                    Phase::Sin => t.coefficient * arg.sin(),
                }
            })
            .sum()
    }

    /// Checks dimension and band limit against `grid`; reports the first offending term.
    pub fn check_band_limit(&self, grid: &PeriodicGrid) -> Result<()> {
        let limit = grid.band_limit() as i64;
        for (i, t) in self.terms.iter().enumerate() {
            if t.wavevector.len() != grid.dim() {
                return Err(Error::BandLimitExceeded {
                    term: i,
                    detail: format!(
                        "wavevector {:?} has {} components, grid dimension is {}",
                        t.wavevector,
                        t.wavevector.len(),
                        grid.dim()
                    ),
                });
            }
            if let Some(k) = t.wavevector.iter().find(|k| k.abs() > limit) {
                return Err(Error::BandLimitExceeded {
                    term: i,
                    detail: format!(
                        "wavevector {:?} has component {k} beyond N/4 = {limit}",
                        t.wavevector
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn sample(&self, grid: &PeriodicGrid) -> Result<ScalarField> {
        self.check_band_limit(grid)?;
        let p = grid.period();
        Ok(ScalarField::from_fn(grid, |x| self.eval(x, p)))
    }
}
