//! Uniform periodic discretization of the ring `θ ∈ [−π, π)`.
//!
//! All spectral work goes through the FFT plans cached on [`Grid`]. Fields
//! hold an `Arc<Grid>` so a whole ensemble of particles shares one set of
//! plans and wavenumber tables.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest accepted number of grid points.
pub const MIN_POINTS: usize = 8;

pub struct Grid {
    n_points: usize,
    spacing: f64,
    points: Vec<f64>,
    wavenumbers: Vec<i64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_points", &self.n_points)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points
    }
}

impl Grid {
    /// Builds a grid of `n_points` samples. Odd sizes and sizes below
    /// [`MIN_POINTS`] are rejected.
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < MIN_POINTS || !n_points.is_multiple_of(2) {
            return Err(Error::UnsupportedGridSize(n_points));
        }
        let spacing = 2.0 * PI / n_points as f64;
        let points = (0..n_points).map(|j| -PI + j as f64 * spacing).collect();
        let half = (n_points / 2) as i64;
        let wavenumbers = (0..n_points as i64)
            .map(|j| if j <= half { j } else { j - n_points as i64 })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_points,
            spacing,
            points,
            wavenumbers,
            forward: planner.plan_fft_forward(n_points),
            inverse: planner.plan_fft_inverse(n_points),
        })
    }

    pub fn shared(n_points: usize) -> Result<Arc<Self>> {
        Self::new(n_points).map(Arc::new)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Integer wavenumbers in DFT order: `0, 1, …, n/2, −n/2+1, …, −1`.
    pub fn wavenumbers(&self) -> &[i64] {
        &self.wavenumbers
    }

    /// Scratch length needed by [`Grid::fft_forward`] / [`Grid::fft_inverse`].
    pub fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// Unnormalized forward transform in place.
    pub fn fft_forward(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    /// Inverse transform in place without the `1/n` factor.
    pub fn fft_inverse_unscaled(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
    }

    /// Inverse transform in place, including the `1/n` factor.
    pub fn fft_inverse(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
        let scale = 1.0 / self.n_points as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    /// Rectangle-rule quadrature over one period.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.n_points {
            return Err(Error::LengthMismatch {
                expected: self.n_points,
                found: values.len(),
            });
        }
        Ok(self.spacing * values.iter().sum::<f64>())
    }

    /// Samples `f` at every grid point.
    pub fn sample<T>(&self, f: impl Fn(f64) -> T) -> Vec<T> {
        self.points.iter().map(|&x| f(x)).collect()
    }

    /// Index of the grid point mirrored through `θ = 0`; `−π` maps to itself.
    pub fn mirror_index(&self, j: usize) -> usize {
        (self.n_points - j) % self.n_points
    }
}

/// Complex amplitudes of one particle's wavefunction on a shared grid.
#[derive(Clone, Debug)]
pub struct WaveField {
    grid: Arc<Grid>,
    amplitudes: Vec<Complex64>,
}

impl WaveField {
    /// Wraps raw amplitudes without normalizing them.
    pub fn from_amplitudes(grid: Arc<Grid>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::LengthMismatch {
                expected: grid.n_points(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { grid, amplitudes })
    }

    /// Samples `f` on the grid and normalizes the result.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let amplitudes = grid.sample(f);
        Self { grid, amplitudes }.normalized()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Pointwise probability density `|ψ|²`.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.spacing() * self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Scaled copy with unit L² norm.
    pub fn normalized(mut self) -> Result<Self> {
        self.normalize_in_place()?;
        Ok(self)
    }

    pub fn normalize_in_place(&mut self) -> Result<()> {
        let norm = self.norm();
        if !norm.is_finite() || norm <= f64::MIN_POSITIVE {
            return Err(Error::DegenerateField);
        }
        let scale = 1.0 / norm;
        self.amplitudes.iter_mut().for_each(|z| *z *= scale);
        Ok(())
    }

    /// Unnormalized DFT coefficients of the field.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.amplitudes.clone();
        let mut scratch = vec![Complex64::default(); self.grid.scratch_len()];
        self.grid.fft_forward(&mut buf, &mut scratch);
        buf
    }

    /// `∫|ψ|²dθ` evaluated from the DFT coefficients (Parseval).
    pub fn spectral_norm_sqr(&self) -> f64 {
        let n = self.grid.n_points() as f64;
        self.grid.spacing() / n * self.spectrum().iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Spectral second derivative: each mode `k` is multiplied by `−k²`.
    pub fn second_derivative(&self) -> Vec<Complex64> {
        let mut buf = self.spectrum();
        for (z, &k) in buf.iter_mut().zip(self.grid.wavenumbers()) {
            *z *= -((k * k) as f64);
        }
        let mut scratch = vec![Complex64::default(); self.grid.scratch_len()];
        self.grid.fft_inverse(&mut buf, &mut scratch);
        buf
    }

    /// `∫|∂θψ|²dθ`, computed as `−∫ψ*∂²θψ` in wavenumber space.
    pub fn gradient_norm_sqr(&self) -> f64 {
        let n = self.grid.n_points() as f64;
        let sum: f64 = self
            .spectrum()
            .iter()
            .zip(self.grid.wavenumbers())
            .map(|(z, &k)| (k * k) as f64 * z.norm_sqr())
            .sum();
        self.grid.spacing() / n * sum
    }

    /// The image of the field under `θ → −θ`. Packet centers and momenta
    /// both change sign.
    pub fn mirrored(&self) -> Self {
        let amplitudes = (0..self.grid.n_points())
            .map(|j| self.amplitudes[self.grid.mirror_index(j)])
            .collect();
        Self {
            grid: Arc::clone(&self.grid),
            amplitudes,
        }
    }

    /// L² distance `‖a − b‖` on the ring.
    pub fn distance(&self, other: &Self) -> f64 {
        let sum: f64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (self.grid.spacing() * sum).sqrt()
    }
}

/// Free-function forms of the grid operations.
pub fn make_grid(n_points: usize) -> Result<Arc<Grid>> {
    Grid::shared(n_points)
}

pub fn second_derivative(f: &WaveField) -> Vec<Complex64> {
    f.second_derivative()
}

pub fn integrate(values: &[f64], grid: &Grid) -> Result<f64> {
    grid.integrate(values)
}

pub fn normalize(f: &WaveField) -> Result<WaveField> {
    f.clone().normalized()
}
