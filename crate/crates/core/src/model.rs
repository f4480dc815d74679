//! Background potential, order variable, Hartree mean field and the energy
//! functional of the coupled ring.
//!
//! Particle indices follow the measurement setup: index `0` is the system
//! (trigger) particle when present, indices `1..=N` are the apparatus.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, WaveField};

/// Divisor of the mean field once the system particle joins the sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanfieldNorm {
    /// Keep the apparatus count `N` as divisor.
    OverN,
    /// Divide by the number of summed fields, `N + 1`.
    OverNPlus1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub hbar: f64,
    pub mass: f64,
    /// Pair coupling; negative is attractive.
    pub lambda: f64,
    pub n_apparatus: usize,
    /// Variance parameter `s²` of the initial apparatus packets.
    pub s2: f64,
    /// Dispersion of the random packet centers and momenta.
    pub sigma: f64,
    pub meanfield_norm: MeanfieldNorm,
    pub include_system_in_meanfield: bool,
    pub potential_on: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            hbar: 0.02,
            mass: 1.0,
            lambda: -0.15,
            n_apparatus: 100,
            s2: 0.1,
            sigma: 0.1,
            meanfield_norm: MeanfieldNorm::OverNPlus1,
            include_system_in_meanfield: true,
            potential_on: true,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return bad("hbar must be positive");
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass must be positive");
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite");
        }
        if self.n_apparatus < 1 {
            return bad("n_apparatus must be at least 1");
        }
        if !(self.s2 > 0.0 && self.s2.is_finite()) {
            return bad("s2 must be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be non-negative");
        }
        Ok(())
    }

    /// A measurement needs an attractive coupling.
    pub fn validate_for_measurement(&self) -> Result<()> {
        self.validate()?;
        if self.lambda >= 0.0 {
            return Err(Error::InvalidParams(
                "lambda must be negative (attractive) for a measurement run".into(),
            ));
        }
        Ok(())
    }
}

/// `V₀(θ) = cos²θ`.
pub fn v0(theta: f64) -> f64 {
    theta.cos().powi(2)
}

/// `V₀′(θ) = −sin 2θ`.
pub fn v0_prime(theta: f64) -> f64 {
    -(2.0 * theta).sin()
}

/// Background potential sampled on the grid; zeros when the potential is
/// switched off.
pub fn background_potential(grid: &Grid, p: &ModelParams) -> Vec<f64> {
    if p.potential_on {
        grid.sample(v0)
    } else {
        vec![0.0; grid.n_points()]
    }
}

/// Apparatus fields, the optional system field and the clock.
#[derive(Clone, Debug)]
pub struct SystemState {
    grid: Arc<Grid>,
    pub apparatus: Vec<WaveField>,
    pub system: Option<WaveField>,
    pub time: f64,
}

impl SystemState {
    pub fn new(
        grid: Arc<Grid>,
        apparatus: Vec<WaveField>,
        system: Option<WaveField>,
    ) -> Result<Self> {
        for f in apparatus.iter().chain(system.iter()) {
            if !Arc::ptr_eq(f.grid(), &grid) && **f.grid() != *grid {
                return Err(Error::LengthMismatch {
                    expected: grid.n_points(),
                    found: f.grid().n_points(),
                });
            }
        }
        Ok(Self {
            grid,
            apparatus,
            system,
            time: 0.0,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n_apparatus(&self) -> usize {
        self.apparatus.len()
    }

    /// Total number of fields, system included.
    pub fn n_fields(&self) -> usize {
        self.apparatus.len() + usize::from(self.system.is_some())
    }

    /// Field by particle index (`0` is the system).
    pub fn field(&self, i: usize) -> Result<&WaveField> {
        match i {
            0 => self.system.as_ref().ok_or(Error::NoSuchParticle(0)),
            i => self.apparatus.get(i - 1).ok_or(Error::NoSuchParticle(i)),
        }
    }

    /// All fields in index order: system first (if present), then apparatus.
    pub fn fields(&self) -> impl Iterator<Item = &WaveField> {
        self.system.iter().chain(self.apparatus.iter())
    }

    pub fn fields_mut(&mut self) -> impl Iterator<Item = &mut WaveField> {
        self.system.iter_mut().chain(self.apparatus.iter_mut())
    }

    /// Largest `|‖ψ‖ − 1|` over all fields.
    pub fn max_norm_error(&self) -> f64 {
        self.fields()
            .map(|f| (f.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// The state reflected through `θ = 0`, field by field.
    pub fn mirrored(&self) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            apparatus: self.apparatus.iter().map(WaveField::mirrored).collect(),
            system: self.system.as_ref().map(WaveField::mirrored),
            time: self.time,
        }
    }
}

/// How the mean-field sum is formed for a given state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanfieldLayout {
    /// Whether the system field is part of the sum.
    pub system_in_sum: bool,
    /// Divisor `M`.
    pub divisor: f64,
}

impl MeanfieldLayout {
    pub fn for_state(state: &SystemState, p: &ModelParams) -> Self {
        let n = state.n_apparatus() as f64;
        let system_in_sum = state.system.is_some() && p.include_system_in_meanfield;
        let divisor = match (system_in_sum, p.meanfield_norm) {
            (true, MeanfieldNorm::OverNPlus1) => n + 1.0,
            _ => n,
        };
        Self {
            system_in_sum,
            divisor,
        }
    }
}

/// Sum of `|ψ_k|²` over the given fields, accumulated in iteration order so
/// the result does not depend on scheduling.
pub fn density_sum<'a>(grid: &Grid, fields: impl Iterator<Item = &'a WaveField>) -> Vec<f64> {
    let mut acc = vec![0.0; grid.n_points()];
    for f in fields {
        for (a, z) in acc.iter_mut().zip(f.amplitudes()) {
            *a += z.norm_sqr();
        }
    }
    acc
}

/// Order variable `φ²(θ)`.
///
/// For the meter readout the sum runs over the apparatus only, divided by
/// `N`. Otherwise it is the dynamical mean field, which includes the system
/// when the model says so.
pub fn order_variable(state: &SystemState, p: &ModelParams, for_readout: bool) -> Result<Vec<f64>> {
    if for_readout {
        if state.n_apparatus() == 0 {
            return Err(Error::NoApparatus);
        }
        let mut phi2 = density_sum(state.grid(), state.apparatus.iter());
        let inv = 1.0 / state.n_apparatus() as f64;
        phi2.iter_mut().for_each(|v| *v *= inv);
        return Ok(phi2);
    }
    let layout = MeanfieldLayout::for_state(state, p);
    if layout.divisor == 0.0 {
        return Err(Error::NoApparatus);
    }
    let mut phi2 = meanfield_density_sum(state, &layout);
    let inv = 1.0 / layout.divisor;
    phi2.iter_mut().for_each(|v| *v *= inv);
    Ok(phi2)
}

/// `Σ|ψ_k|²` over the fields that enter the mean field.
pub(crate) fn meanfield_density_sum(state: &SystemState, layout: &MeanfieldLayout) -> Vec<f64> {
    if layout.system_in_sum {
        density_sum(state.grid(), state.fields())
    } else {
        density_sum(state.grid(), state.apparatus.iter())
    }
}

/// Hartree potential felt by particle `i`: the mean field minus its own
/// contribution.
pub fn hartree_potential(i: usize, state: &SystemState, p: &ModelParams) -> Result<Vec<f64>> {
    let field = state.field(i)?;
    let layout = MeanfieldLayout::for_state(state, p);
    let sum = meanfield_density_sum(state, &layout);
    let in_sum = i > 0 || layout.system_in_sum;
    let scale = p.lambda / layout.divisor;
    Ok(sum
        .iter()
        .zip(field.amplitudes())
        .map(|(s, z)| {
            let own = if in_sum { z.norm_sqr() } else { 0.0 };
            scale * (s - own)
        })
        .collect())
}

/// Components of the energy functional.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub external: f64,
    pub interaction: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.external + self.interaction
    }
}

pub fn energy_parts(state: &SystemState, p: &ModelParams) -> EnergyParts {
    let grid = state.grid();
    let h = grid.spacing();
    let v0 = background_potential(grid, p);
    let kin_scale = p.hbar * p.hbar / (2.0 * p.mass);

    let mut parts = EnergyParts::default();
    for f in state.fields() {
        parts.kinetic += kin_scale * f.gradient_norm_sqr();
        parts.external += h * f
            .amplitudes()
            .iter()
            .zip(&v0)
            .map(|(z, v)| v * z.norm_sqr())
            .sum::<f64>();
    }

    let layout = MeanfieldLayout::for_state(state, p);
    if layout.divisor > 0.0 {
        // Σ_{i≠k} ρ_iρ_k = (Σρ)² − Σρ²
        let total = meanfield_density_sum(state, &layout);
        let mut squares = vec![0.0; grid.n_points()];
        let summed: Box<dyn Iterator<Item = &WaveField>> = if layout.system_in_sum {
            Box::new(state.fields())
        } else {
            Box::new(state.apparatus.iter())
        };
        for f in summed {
            for (s, z) in squares.iter_mut().zip(f.amplitudes()) {
                *s += z.norm_sqr().powi(2);
            }
        }
        let pair: f64 = total.iter().zip(&squares).map(|(t, s)| t * t - s).sum();
        parts.interaction = p.lambda / (2.0 * layout.divisor) * h * pair;

        // A system outside the sum only feels the apparatus field.
        if let (false, Some(sys)) = (layout.system_in_sum, state.system.as_ref()) {
            let overlap: f64 = sys
                .amplitudes()
                .iter()
                .zip(&total)
                .map(|(z, t)| z.norm_sqr() * t)
                .sum();
            parts.interaction += p.lambda / layout.divisor * h * overlap;
        }
    }
    parts
}

/// Kinetic + external + pairwise Hartree energy, self-interaction excluded.
pub fn total_energy(state: &SystemState, p: &ModelParams) -> f64 {
    energy_parts(state, p).total()
}

/// Sign weight of grid point `θ`: the points `0` and `−π` sit on the
/// boundary between the two halves and count for neither.
pub fn side_weight(theta: f64, grid: &Grid) -> f64 {
    let tol = 0.25 * grid.spacing();
    if theta.abs() < tol || (theta + std::f64::consts::PI).abs() < tol {
        0.0
    } else {
        theta.signum()
    }
}

/// Scalar meter reading `∫sign(θ)φ²dθ`.
pub fn readout_sign(phi2: &[f64], grid: &Grid) -> f64 {
    grid.spacing()
        * grid
            .points()
            .iter()
            .zip(phi2)
            .map(|(&x, v)| side_weight(x, grid) * v)
            .sum::<f64>()
}

/// Mass of a density on `θ > 0`, boundary points split evenly.
pub fn positive_mass(density: &[f64], grid: &Grid) -> f64 {
    let total = grid.spacing() * density.iter().sum::<f64>();
    0.5 * (total + readout_sign(density, grid))
}
