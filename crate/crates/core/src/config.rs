//! Complete simulation configuration, one section per concern.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::TriggerParams;
use crate::integrator::EvolveConfig;
use crate::measurement::DEFAULT_SIZE;
use crate::model::ModelParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: 512 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerConfig {
    /// Include the system particle; `false` gives apparatus-only runs.
    pub enabled: bool,
    pub alpha: f64,
    pub delta_theta: f64,
    pub p0: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        let t = TriggerParams::default();
        Self {
            enabled: true,
            alpha: t.alpha,
            delta_theta: t.delta_theta,
            p0: t.p0,
        }
    }
}

impl TriggerConfig {
    pub fn params(&self) -> TriggerParams {
        TriggerParams {
            alpha: self.alpha,
            delta_theta: self.delta_theta,
            p0: self.p0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Width of the undecided band around ½.
    pub margin: f64,
    /// Typical potential size in the timescale estimate.
    pub size: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            margin: 0.2,
            size: DEFAULT_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Trigger angles; each sees the same apparatus draws.
    pub alphas: Vec<f64>,
    pub trials: u64,
    /// Prepare every apparatus as the mirror image of its seeded draw.
    pub mirror_draws: bool,
}

/// `α` with `sin²α` = 0, 0.1, …, 0.9, 1.
pub fn default_alphas() -> Vec<f64> {
    (0..=10)
        .map(|k| match k {
            0 => 0.0,
            10 => FRAC_PI_2,
            _ => (k as f64 / 10.0).sqrt().asin(),
        })
        .collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alphas: default_alphas(),
            trials: 100,
            mirror_draws: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub trial_index: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trial_index: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: GridConfig,
    pub model: ModelParams,
    pub trigger: TriggerConfig,
    pub evolve: EvolveConfig,
    pub measurement: MeasurementConfig,
    pub sweep: SweepConfig,
    pub run: RunConfig,
}

impl Config {
    /// Reduced profile for quick ensembles: `N = 40` on 256 points.
    pub fn reduced() -> Self {
        let mut c = Self::default();
        c.model.n_apparatus = 40;
        c.grid.points = 256;
        c
    }

    pub fn validate(&self) -> Result<()> {
        crate::grid::Grid::new(self.grid.points)?;
        self.model.validate()?;
        self.trigger.params().validate()?;
        self.evolve.n_steps()?;
        crate::propagator::Registry::builtin()
            .names()
            .find(|n| *n == self.evolve.scheme)
            .ok_or_else(|| Error::UnknownPropagator(self.evolve.scheme.clone()))?;
        if !(0.0..1.0).contains(&self.measurement.margin) {
            return Err(Error::InvalidParams(
                "measurement.margin must lie in [0, 1)".into(),
            ));
        }
        if !(self.measurement.size > 0.0 && self.measurement.size.is_finite()) {
            return Err(Error::InvalidParams(
                "measurement.size must be positive".into(),
            ));
        }
        if self.evolve.energy_budget.is_nan() || self.evolve.energy_budget <= 0.0 {
            return Err(Error::InvalidParams(
                "evolve.energy_budget must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        self.validate()?;
        if self.sweep.trials == 0 {
            return Err(Error::InvalidParams(
                "sweep.trials must be at least 1".into(),
            ));
        }
        if self.sweep.alphas.is_empty() {
            return Err(Error::InvalidParams("sweep.alphas is empty".into()));
        }
        for &alpha in &self.sweep.alphas {
            TriggerParams {
                alpha,
                ..self.trigger.params()
            }
            .validate()?;
        }
        Ok(())
    }
}
