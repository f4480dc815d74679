//! Time evolution driver: repeated propagator steps with snapshots,
//! conservation diagnostics and drift-triggered step tightening.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{order_variable, total_energy, ModelParams, SystemState};
use crate::propagator::{Propagator, Registry};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Steps between snapshots; `0` disables them. The final state is
    /// always included when enabled.
    pub snapshot_every: u64,
    /// Steps between energy/norm checks; `0` checks only at the ends.
    pub diagnostics_every: u64,
    /// Registered propagator name.
    pub scheme: String,
    /// Allowed relative energy drift. Crossing half of it mid-run halves
    /// `dt` for the rest of the run.
    pub energy_budget: f64,
    pub max_tightenings: u32,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 5e-4,
            t_final: 24.0,
            snapshot_every: 2000,
            diagnostics_every: 200,
            scheme: "split-step".to_string(),
            energy_budget: 1e-3,
            max_tightenings: 3,
        }
    }
}

impl EvolveConfig {
    /// Number of steps of length `dt` to reach `t_final`.
    pub fn n_steps(&self) -> Result<u64> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams("dt must be positive".into()));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParams("t_final must be non-negative".into()));
        }
        let ratio = self.t_final / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::InvalidParams(format!(
                "t_final = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as u64)
    }
}

/// Data handed to the snapshot observer.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: u64,
    pub time: f64,
    /// Apparatus order variable (meter definition).
    pub phi2: Vec<f64>,
    pub system_density: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSample {
    pub step: u64,
    pub time: f64,
    pub energy: f64,
    pub max_norm_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsLog {
    pub samples: Vec<DiagnosticSample>,
    /// `(time, new dt)` for every tightening.
    pub tightenings: Vec<(f64, f64)>,
}

impl DiagnosticsLog {
    pub fn initial_energy(&self) -> Option<f64> {
        self.samples.first().map(|s| s.energy)
    }

    /// `max_t |E(t) − E(0)| / |E(0)|`; absolute drift when `E(0) = 0`.
    pub fn max_energy_drift(&self) -> f64 {
        let Some(e0) = self.initial_energy() else {
            return 0.0;
        };
        let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
        self.samples
            .iter()
            .map(|s| (s.energy - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.max_norm_error)
            .fold(0.0, f64::max)
    }
}

/// An evolve error together with the diagnostics gathered before it.
#[derive(Debug)]
pub struct EvolveFailure {
    pub error: Error,
    pub log: DiagnosticsLog,
}

impl std::fmt::Display for EvolveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for EvolveFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn snapshot(state: &SystemState, p: &ModelParams, step: u64) -> Result<Snapshot> {
    Ok(Snapshot {
        step,
        time: state.time,
        phi2: order_variable(state, p, true)?,
        system_density: state.system.as_ref().map(|f| f.density()),
    })
}

fn sample(state: &SystemState, p: &ModelParams, step: u64) -> DiagnosticSample {
    DiagnosticSample {
        step,
        time: state.time,
        energy: total_energy(state, p),
        max_norm_error: state.max_norm_error(),
    }
}

/// Evolves `state` to `cfg.t_final` with the scheme named in the config.
pub fn evolve(
    state: &mut SystemState,
    p: &ModelParams,
    cfg: &EvolveConfig,
    observer: impl FnMut(&Snapshot),
) -> Result<DiagnosticsLog, EvolveFailure> {
    let fail = |error| EvolveFailure {
        error,
        log: DiagnosticsLog::default(),
    };
    let mut prop = Registry::builtin()
        .create(&cfg.scheme, state.grid(), p)
        .map_err(fail)?;
    evolve_with(prop.as_mut(), state, p, cfg, observer)
}

/// Evolves with an explicit propagator.
///
/// Steps are counted in units of the configured `dt`; after `k`
/// tightenings each such step is carried out as `2^k` substeps.
pub fn evolve_with(
    prop: &mut dyn Propagator,
    state: &mut SystemState,
    p: &ModelParams,
    cfg: &EvolveConfig,
    mut observer: impl FnMut(&Snapshot),
) -> Result<DiagnosticsLog, EvolveFailure> {
    let mut log = DiagnosticsLog::default();
    let n_steps = match cfg.n_steps() {
        Ok(n) => n,
        Err(error) => return Err(EvolveFailure { error, log }),
    };
    if n_steps == 0 {
        return Ok(log);
    }
    let t0 = state.time;
    let observe = cfg.snapshot_every > 0;
    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(EvolveFailure { error, log }),
            }
        };
    }

    log.samples.push(sample(state, p, 0));
    if observe {
        observer(&bail!(snapshot(state, p, 0)));
    }

    let mut substeps: u64 = 1;
    let mut done = 0;
    while done < n_steps {
        let mut next = n_steps;
        if observe {
            next = next.min((done / cfg.snapshot_every + 1) * cfg.snapshot_every);
        }
        if let Some(k) = done.checked_div(cfg.diagnostics_every) {
            next = next.min((k + 1) * cfg.diagnostics_every);
        }
        let count = next - done;
        let dt = cfg.dt / substeps as f64;
        if let Err(e) = prop.advance(state, p, dt, count * substeps) {
            let error = match e {
                Error::NumericalBlowup { step, .. } => {
                    let global = done + step / substeps;
                    Error::NumericalBlowup {
                        step: global,
                        time: t0 + (done as f64 + (step as f64 + 1.0) / substeps as f64) * cfg.dt,
                    }
                }
                other => other,
            };
            return Err(EvolveFailure { error, log });
        }
        done = next;
        state.time = t0 + done as f64 * cfg.dt;

        let at_diag = cfg.diagnostics_every > 0 && done % cfg.diagnostics_every == 0;
        if at_diag || done == n_steps {
            log.samples.push(sample(state, p, done));
            let drift = log.max_energy_drift();
            if drift > 0.5 * cfg.energy_budget
                && (log.tightenings.len() as u32) < cfg.max_tightenings
                && done < n_steps
            {
                substeps *= 2;
                let new_dt = cfg.dt / substeps as f64;
                log::warn!(
                    "relative energy drift {drift:.3e} at t = {:.3}; reducing dt to {new_dt:e}",
                    state.time
                );
                log.tightenings.push((state.time, new_dt));
            }
        }
        if observe && (done % cfg.snapshot_every == 0 || done == n_steps) {
            observer(&bail!(snapshot(state, p, done)));
        }
    }
    Ok(log)
}
