//! Time propagators for the coupled Hartree equations.
//!
//! Every scheme implements [`Propagator`] and is registered by name in a
//! [`Registry`]; the evolve driver looks schemes up by the name given in its
//! configuration.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{background_potential, MeanfieldLayout, ModelParams, SystemState};

mod crank_nicolson;
mod split_step;

pub use crank_nicolson::{spectral_second_derivative_matrix, CrankNicolson};
pub use split_step::SplitStep;

/// Advances a [`SystemState`] in time.
pub trait Propagator: Send {
    fn name(&self) -> &'static str;

    /// One step of length `dt`. On blow-up the error carries `step = 0`.
    fn step(&mut self, state: &mut SystemState, p: &ModelParams, dt: f64) -> Result<()>;

    /// `n` consecutive steps. Schemes may fuse work across step boundaries
    /// as long as the result equals repeated [`Propagator::step`] calls up to
    /// rounding. A blow-up reports the 0-based offset of the failing step.
    fn advance(&mut self, state: &mut SystemState, p: &ModelParams, dt: f64, n: u64) -> Result<()> {
        for k in 0..n {
            self.step(state, p, dt).map_err(|e| offset_step(e, k))?;
        }
        Ok(())
    }
}

pub(crate) fn offset_step(e: Error, by: u64) -> Error {
    match e {
        Error::NumericalBlowup { step, time } => Error::NumericalBlowup {
            step: step + by,
            time,
        },
        other => other,
    }
}

pub type Factory = fn(&Arc<Grid>, &ModelParams) -> Result<Box<dyn Propagator>>;

/// Name → constructor table of available schemes.
#[derive(Clone)]
pub struct Registry {
    factories: BTreeMap<&'static str, Factory>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// The built-in schemes: `split-step` and `crank-nicolson`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(SplitStep::NAME, |g, p| Ok(Box::new(SplitStep::new(g, p))));
        r.register(CrankNicolson::NAME, |g, p| {
            Ok(Box::new(CrankNicolson::new(g, p)?))
        });
        r
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn create(
        &self,
        name: &str,
        grid: &Arc<Grid>,
        p: &ModelParams,
    ) -> Result<Box<dyn Propagator>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownPropagator(name.to_string()))?;
        factory(grid, p)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Looks `name` up in the built-in registry.
pub fn create(name: &str, grid: &Arc<Grid>, p: &ModelParams) -> Result<Box<dyn Propagator>> {
    Registry::builtin().create(name, grid, p)
}

/// One split-step of the coupled system.
pub fn step(state: &mut SystemState, p: &ModelParams, dt: f64) -> Result<()> {
    SplitStep::new(state.grid(), p).step(state, p, dt)
}

/// Per-field potentials `V₀ + V_HF,i` for the current densities.
///
/// The shared part `V₀ + (λ/M)Σρ` is built once; each field subtracts its
/// own density when it belongs to the mean-field sum.
pub(crate) struct PotentialBuilder {
    v0: Vec<f64>,
}

impl PotentialBuilder {
    pub(crate) fn new(grid: &Grid, p: &ModelParams) -> Self {
        Self {
            v0: background_potential(grid, p),
        }
    }

    /// Returns the shared potential and `(λ/M, system_in_sum)`. Fails when
    /// any density is not finite.
    pub(crate) fn shared(
        &self,
        state: &SystemState,
        p: &ModelParams,
    ) -> Result<(Vec<f64>, f64, bool)> {
        let layout = MeanfieldLayout::for_state(state, p);
        let coupling = if layout.divisor > 0.0 {
            p.lambda / layout.divisor
        } else {
            0.0
        };
        let sum = crate::model::meanfield_density_sum(state, &layout);
        if sum.iter().any(|v| !v.is_finite())
            || state
                .fields()
                .any(|f| f.amplitudes().iter().any(|z| !z.is_finite()))
        {
            return Err(Error::NumericalBlowup {
                step: 0,
                time: state.time,
            });
        }
        let shared = self
            .v0
            .iter()
            .zip(&sum)
            .map(|(v, s)| v + coupling * s)
            .collect();
        Ok((shared, coupling, layout.system_in_sum))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let r = Registry::builtin();
        let names: Vec<_> = r.names().collect();
        assert_eq!(names, vec!["crank-nicolson", "split-step"]);
        let g = Grid::shared(32).unwrap();
        let p = ModelParams::default();
        assert_eq!(r.create("split-step", &g, &p).unwrap().name(), "split-step");
        assert!(matches!(
            r.create("leapfrog", &g, &p),
            Err(Error::UnknownPropagator(n)) if n == "leapfrog"
        ));
    }

    #[test]
    fn custom_registration() {
        struct Frozen;
        impl Propagator for Frozen {
            fn name(&self) -> &'static str {
                "frozen"
            }
            fn step(&mut self, state: &mut SystemState, _: &ModelParams, dt: f64) -> Result<()> {
                state.time += dt;
                Ok(())
            }
        }
        let mut r = Registry::empty();
        r.register("frozen", |_, _| Ok(Box::new(Frozen)));
        let g = Grid::shared(16).unwrap();
        let mut prop = r.create("frozen", &g, &ModelParams::default()).unwrap();
        let mut s = SystemState::new(g, vec![], None).unwrap();
        prop.advance(&mut s, &ModelParams::default(), 0.5, 4)
            .unwrap();
        assert_eq!(s.time, 2.0);
    }
}
