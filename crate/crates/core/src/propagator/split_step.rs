use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{offset_step, PotentialBuilder, Propagator};
use crate::error::Result;
use crate::grid::{Grid, WaveField};
use crate::model::{ModelParams, SystemState};

/// Strang splitting with a spectral kinetic substep.
///
/// A step is a half kick by `V₀ + V_HF`, a full kinetic drift in
/// wavenumber space and a second half kick with the mean field rebuilt from
/// the drifted densities. Both substeps are unitary, so norms only move by
/// rounding.
pub struct SplitStep {
    grid: Arc<Grid>,
    potentials: PotentialBuilder,
    hbar: f64,
    mass: f64,
    kinetic: Vec<Complex64>,
    kinetic_dt: f64,
}

impl SplitStep {
    pub const NAME: &'static str = "split-step";

    pub fn new(grid: &Arc<Grid>, p: &ModelParams) -> Self {
        Self {
            grid: Arc::clone(grid),
            potentials: PotentialBuilder::new(grid, p),
            hbar: p.hbar,
            mass: p.mass,
            kinetic: Vec::new(),
            kinetic_dt: f64::NAN,
        }
    }

    /// `exp(−iħk²dt/2m)/n`; the `1/n` of the inverse transform is folded in.
    fn prepare_kinetic(&mut self, dt: f64) {
        if self.kinetic_dt == dt {
            return;
        }
        let n = self.grid.n_points() as f64;
        let c = self.hbar * dt / (2.0 * self.mass);
        self.kinetic = self
            .grid
            .wavenumbers()
            .iter()
            .map(|&k| Complex64::from_polar(1.0 / n, -c * (k * k) as f64))
            .collect();
        self.kinetic_dt = dt;
    }

    /// `ψ_i ← exp(−i·tau·(V₀ + V_HF,i)/ħ)·ψ_i` for every field.
    fn kick(&self, state: &mut SystemState, p: &ModelParams, tau: f64) -> Result<()> {
        let (shared, coupling, system_in_sum) = self.potentials.shared(state, p)?;
        let scale = -tau / self.hbar;
        let has_system = state.system.is_some();
        let mut fields: Vec<(&mut WaveField, bool)> = state
            .fields_mut()
            .enumerate()
            .map(|(k, f)| (f, !(has_system && k == 0) || system_in_sum))
            .collect();
        fields.par_iter_mut().for_each(|(f, in_sum)| {
            let own = if *in_sum { coupling } else { 0.0 };
            for (z, v) in f.amplitudes_mut().iter_mut().zip(&shared) {
                let angle = scale * (v - own * z.norm_sqr());
                let (s, c) = angle.sin_cos();
                *z *= Complex64::new(c, s);
            }
        });
        Ok(())
    }

    fn drift(&self, state: &mut SystemState) {
        let grid = &self.grid;
        let kinetic = &self.kinetic;
        let mut fields: Vec<&mut WaveField> = state.fields_mut().collect();
        fields.par_iter_mut().for_each_init(
            || vec![Complex64::default(); grid.scratch_len()],
            |scratch, f| {
                let buf = f.amplitudes_mut();
                grid.fft_forward(buf, scratch);
                buf.iter_mut().zip(kinetic).for_each(|(z, k)| *z *= k);
                grid.fft_inverse_unscaled(buf, scratch);
            },
        );
    }
}

impl Propagator for SplitStep {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn step(&mut self, state: &mut SystemState, p: &ModelParams, dt: f64) -> Result<()> {
        self.advance(state, p, dt, 1)
    }

    /// Consecutive half kicks are merged into one full kick; the densities,
    /// and hence the mean field, do not change across a kick.
    fn advance(&mut self, state: &mut SystemState, p: &ModelParams, dt: f64, n: u64) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        self.prepare_kinetic(dt);
        self.kick(state, p, 0.5 * dt)?;
        for k in 0..n {
            self.drift(state);
            let tau = if k + 1 == n { 0.5 * dt } else { dt };
            self.kick(state, p, tau).map_err(|e| offset_step(e, k))?;
            state.time += dt;
        }
        Ok(())
    }
}
