use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::Propagator;
use crate::error::{Error, Result};
use crate::grid::{Grid, WaveField};
use crate::model::{background_potential, hartree_potential, ModelParams, SystemState};

/// Dense Crank–Nicolson scheme on the same collocation points.
///
/// Works in position space with an explicit spectral differentiation
/// matrix and dense LU solves, so it shares no code path with the FFT
/// propagator. The mean field is frozen within each solve and taken at the
/// step midpoint through a few predictor-corrector sweeps. Cost is `O(n³)`
/// per field per sweep; meant for small grids.
pub struct CrankNicolson {
    kinetic: DMatrix<Complex64>,
    v0: Vec<f64>,
    hbar: f64,
    sweeps: usize,
}

/// Largest grid accepted by [`CrankNicolson`].
pub const MAX_POINTS: usize = 256;

/// Second-derivative matrix of the periodic band-limited interpolant.
pub fn spectral_second_derivative_matrix(n: usize) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    DMatrix::from_fn(n, n, |j, l| {
        if j == l {
            -PI * PI / (3.0 * h * h) - 1.0 / 6.0
        } else {
            let d = j as f64 - l as f64;
            let sign = if (j + l) % 2 == 0 { 1.0 } else { -1.0 };
            -sign / (2.0 * (0.5 * d * h).sin().powi(2))
        }
    })
}

impl CrankNicolson {
    pub const NAME: &'static str = "crank-nicolson";

    pub fn new(grid: &Arc<Grid>, p: &ModelParams) -> Result<Self> {
        let n = grid.n_points();
        if n > MAX_POINTS {
            return Err(Error::InvalidParams(format!(
                "{} supports at most {MAX_POINTS} grid points, got {n}",
                Self::NAME
            )));
        }
        let scale = -p.hbar * p.hbar / (2.0 * p.mass);
        let kinetic = spectral_second_derivative_matrix(n).map(|x| Complex64::new(scale * x, 0.0));
        Ok(Self {
            kinetic,
            v0: background_potential(grid, p),
            hbar: p.hbar,
            sweeps: 4,
        })
    }

    /// Number of solves per step (one predictor plus correctors).
    pub fn with_sweeps(mut self, sweeps: usize) -> Self {
        self.sweeps = sweeps.max(1);
        self
    }

    fn potentials(&self, state: &SystemState, p: &ModelParams) -> Result<Vec<Vec<f64>>> {
        let first = if state.system.is_some() { 0 } else { 1 };
        (first..=state.n_apparatus())
            .map(|i| {
                let mut v = hartree_potential(i, state, p)?;
                v.iter_mut().zip(&self.v0).for_each(|(a, b)| *a += b);
                Ok(v)
            })
            .collect()
    }

    fn solve(&self, psi: &DVector<Complex64>, v: &[f64], dt: f64) -> Result<DVector<Complex64>> {
        let n = v.len();
        let c = Complex64::new(0.0, 0.5 * dt / self.hbar);
        let mut h = self.kinetic.clone();
        for (j, vj) in v.iter().enumerate() {
            h[(j, j)] += vj;
        }
        let identity = DMatrix::<Complex64>::identity(n, n);
        let lhs = &identity + &h * c;
        let rhs = (&identity - &h * c) * psi;
        lhs.lu().solve(&rhs).ok_or(Error::NumericalBlowup {
            step: 0,
            time: f64::NAN,
        })
    }
}

impl Propagator for CrankNicolson {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn step(&mut self, state: &mut SystemState, p: &ModelParams, dt: f64) -> Result<()> {
        let start: Vec<DVector<Complex64>> = state
            .fields()
            .map(|f| DVector::from_column_slice(f.amplitudes()))
            .collect();
        let v_start = self.potentials(state, p)?;
        let mut v_mid = v_start.clone();
        let mut trial = state.clone();
        for _ in 0..self.sweeps {
            let solved = start
                .iter()
                .zip(&v_mid)
                .map(|(psi, v)| self.solve(psi, v, dt))
                .collect::<Result<Vec<_>>>()?;
            for (f, psi) in trial.fields_mut().zip(&solved) {
                f.amplitudes_mut().copy_from_slice(psi.as_slice());
            }
            let v_end = self.potentials(&trial, p)?;
            for ((m, a), b) in v_mid.iter_mut().zip(&v_start).zip(&v_end) {
                for ((mj, aj), bj) in m.iter_mut().zip(a).zip(b) {
                    *mj = 0.5 * (aj + bj);
                }
            }
        }
        if trial
            .fields()
            .any(|f| f.amplitudes().iter().any(|z| !z.is_finite()))
        {
            return Err(Error::NumericalBlowup {
                step: 0,
                time: state.time,
            });
        }
        for (dst, src) in state.fields_mut().zip(trial.fields()) {
            copy_field(dst, src);
        }
        state.time += dt;
        Ok(())
    }
}

fn copy_field(dst: &mut WaveField, src: &WaveField) {
    dst.amplitudes_mut().copy_from_slice(src.amplitudes());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_matches_fft_derivative() {
        let g = Grid::shared(32).unwrap();
        let d2 = spectral_second_derivative_matrix(32);
        let f = WaveField::from_fn(Arc::clone(&g), |x| {
            Complex64::new((-(x - 0.3f64).powi(2) / 0.2).exp(), 0.2 * (3.0 * x).sin())
        })
        .unwrap();
        let v = DVector::from_column_slice(f.amplitudes());
        let via_matrix = d2.map(|x| Complex64::new(x, 0.0)) * v;
        for (a, b) in via_matrix.iter().zip(f.second_derivative()) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn refuses_large_grids() {
        let g = Grid::shared(512).unwrap();
        assert!(CrankNicolson::new(&g, &ModelParams::default()).is_err());
    }
}
